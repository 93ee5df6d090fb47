#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muonad/tensor.hpp"

namespace muonad {

/// Sum p_i ln(p_i / q_i) with 0 ln 0 = 0. Throws on a support violation.
double kl_divergence(std::span<const double> p, std::span<const double> q);

inline constexpr int kSsimWindow = 11;

/// Mean SSIM over every valid window position (uniform window, population
/// statistics, dynamic range 1).
double ssim(const Tensor& a, const Tensor& b, int window = kSsimWindow);

struct GaussianFit {
  std::vector<double> mean;
  Tensor covariance;  // (dim, dim)
};

/// Fits rows of `samples` (N x D); covariance uses the N-1 normalization.
GaussianFit fit_gaussian(const Tensor& samples);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}), clamped at zero.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

/// `level` rounds of 2x2 box averaging; odd edges replicate the last
/// row/column. Accepts (H, W) or (C, H, W).
Tensor mipmap_downsample(const Tensor& t, int level);

struct TextureAsset {
  Tensor base;
  std::vector<Tensor> mip_chain;  // mip_chain[s] is level s; mip_chain[0] == base

  static TextureAsset from_base(Tensor base, int levels = 4);
  const Tensor& level(int s) const;
};

/// Percentage of pairs whose relative L1 error at `level` is strictly below tau.
double mcr(std::span<const TextureAsset> gen, std::span<const TextureAsset> gt, int level, double tau = 0.05);

/// Rotation about the image centre by `degrees` (counter-clockwise with y up,
/// so clockwise as displayed with row 0 on top) with
/// bilinear resampling, followed by the largest centred square crop whose
/// pixels all sample inside the source. Exposed for testing.
Tensor rotate_and_crop(const Tensor& image, double degrees, std::size_t crop_side);
/// Side of that crop for an H x W image at `degrees`.
std::size_t interior_crop_side(std::size_t height, std::size_t width, double degrees);

/// Mean SSIM over rotated/cropped views of the two textures.
double adf(const TextureAsset& gen, const TextureAsset& gt, std::span<const double> angles_deg,
           int window = kSsimWindow);

struct MemoryLedger {
  struct Entry {
    std::uint64_t t = 0;
    std::uint64_t geometry_bytes = 0;
    std::uint64_t texture_bytes = 0;
  };
  std::vector<Entry> timeline;

  void record(std::uint64_t t, std::uint64_t geometry, std::uint64_t texture) {
    timeline.push_back({t, geometry, texture});
  }
};

/// max_t (geometry + texture).
std::uint64_t peak_memory(const MemoryLedger& ledger);

}  // namespace muonad
