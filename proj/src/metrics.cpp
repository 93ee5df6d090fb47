#include "muonad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "muonad/error.hpp"

namespace muonad {

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "kl_divergence: length mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, "kl_divergence: negative probability");
    sp += p[i];
    sq += q[i];
  }
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9, "kl_divergence: inputs must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) {
      continue;
    }
    require(q[i] > 0.0, "support mismatch");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

namespace {

// Summed-area table with a zero border: sat(r+1, c+1) = sum over [0..r]x[0..c].
std::vector<double> summed_area(const Tensor& img, auto&& f) {
  const std::size_t h = img.rows(), w = img.cols();
  std::vector<double> sat((h + 1) * (w + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row += f(r, c);
      sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + row;
    }
  }
  return sat;
}

double box(const std::vector<double>& sat, std::size_t w, std::size_t r0, std::size_t c0, std::size_t k) {
  const std::size_t stride = w + 1;
  return sat[(r0 + k) * stride + c0 + k] - sat[r0 * stride + c0 + k] - sat[(r0 + k) * stride + c0] +
         sat[r0 * stride + c0];
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, int window) {
  require(a.rank() == 2 && b.rank() == 2, "ssim expects rank-2 images");
  require(a.shape() == b.shape(), [&] { return "ssim: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()); });
  require(window >= 1 && window % 2 == 1, "ssim: window must be a positive odd integer");
  const auto k = static_cast<std::size_t>(window);
  const std::size_t h = a.rows(), w = a.cols();
  require(h >= k && w >= k, "ssim: image smaller than window");

  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const auto sa = summed_area(a, [&](auto r, auto c) { return a(r, c); });
  const auto sb = summed_area(b, [&](auto r, auto c) { return b(r, c); });
  const auto saa = summed_area(a, [&](auto r, auto c) { return a(r, c) * a(r, c); });
  const auto sbb = summed_area(b, [&](auto r, auto c) { return b(r, c) * b(r, c); });
  const auto sab = summed_area(a, [&](auto r, auto c) { return a(r, c) * b(r, c); });

  const double inv_n = 1.0 / static_cast<double>(k * k);
  double total = 0.0;
  for (std::size_t r = 0; r + k <= h; ++r) {
    for (std::size_t c = 0; c + k <= w; ++c) {
      const double mu_a = box(sa, w, r, c, k) * inv_n;
      const double mu_b = box(sb, w, r, c, k) * inv_n;
      const double var_a = std::max(box(saa, w, r, c, k) * inv_n - mu_a * mu_a, 0.0);
      const double var_b = std::max(box(sbb, w, r, c, k) * inv_n - mu_b * mu_b, 0.0);
      const double cov = box(sab, w, r, c, k) * inv_n - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  }
  return total / static_cast<double>((h - k + 1) * (w - k + 1));
}

GaussianFit fit_gaussian(const Tensor& samples) {
  require(samples.rank() == 2 && !samples.empty(), "fit_gaussian expects a non-empty (N, D) tensor");
  const std::size_t n = samples.rows(), d = samples.cols();
  GaussianFit fit{std::vector<double>(d, 0.0), Tensor({d, d})};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      fit.mean[j] += samples(i, j);
    }
  }
  for (auto& m : fit.mean) {
    m /= static_cast<double>(n);
  }
  if (n < 2) {
    return fit;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < d; ++p) {
      const double dp = samples(i, p) - fit.mean[p];
      for (std::size_t q = 0; q < d; ++q) {
        fit.covariance(p, q) += dp * (samples(i, q) - fit.mean[q]);
      }
    }
  }
  fit.covariance = (1.0 / static_cast<double>(n - 1)) * fit.covariance;
  return fit;
}

namespace {

Eigen::MatrixXd to_eigen(const Tensor& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(i, j) = m(i, j);
    }
  }
  return out;
}

constexpr double kPsdTol = 1e-8;

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  const std::size_t d = a.mean.size();
  require(d > 0 && b.mean.size() == d, "frechet_distance: dimension mismatch");
  require(a.covariance.rows() == d && a.covariance.cols() == d && b.covariance.rows() == d &&
              b.covariance.cols() == d,
          "frechet_distance: covariance dimension mismatch");
  const Eigen::MatrixXd sa = to_eigen(a.covariance);
  const Eigen::MatrixXd sb = to_eigen(b.covariance);
  require((sa - sa.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, sa.cwiseAbs().maxCoeff()) &&
              (sb - sb.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, sb.cwiseAbs().maxCoeff()),
          "frechet_distance: covariance is not symmetric");

  // tr (S_a S_b)^{1/2} == tr (S_a^{1/2} S_b S_a^{1/2})^{1/2}; the inner matrix is symmetric PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(0.5 * (sa + sa.transpose()));
  require(eig_a.eigenvalues().minCoeff() >= -kPsdTol, "frechet_distance: covariance is not PSD");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_b(0.5 * (sb + sb.transpose()), Eigen::EigenvaluesOnly);
  require(eig_b.eigenvalues().minCoeff() >= -kPsdTol, "frechet_distance: covariance is not PSD");

  const Eigen::VectorXd root_vals = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root_a = eig_a.eigenvectors() * root_vals.asDiagonal() * eig_a.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inner(inner, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < eig_inner.eigenvalues().size(); ++i) {
    const double ev = eig_inner.eigenvalues()(i);
    require(ev >= -kPsdTol, "frechet_distance: product has a negative eigenvalue");
    tr_sqrt += std::sqrt(std::max(ev, 0.0));
  }

  double mean_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a.mean[i] - b.mean[i];
    mean_sq += diff * diff;
  }
  const double dist = mean_sq + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  require(dist >= -kPsdTol, "frechet_distance: negative distance beyond tolerance");
  return std::max(dist, 0.0);
}

namespace {

Tensor downsample_once(const Tensor& img) {
  const std::size_t h = img.rows(), w = img.cols();
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({oh, ow});
  for (std::size_t r = 0; r < oh; ++r) {
    const std::size_t r0 = 2 * r, r1 = std::min(2 * r + 1, h - 1);
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t c0 = 2 * c, c1 = std::min(2 * c + 1, w - 1);
      out(r, c) = 0.25 * (img(r0, c0) + img(r0, c1) + img(r1, c0) + img(r1, c1));
    }
  }
  return out;
}

Tensor channel(const Tensor& t, std::size_t ch) {
  const std::size_t h = t.shape()[1], w = t.shape()[2];
  std::vector<double> data(t.data().begin() + static_cast<std::ptrdiff_t>(ch * h * w),
                           t.data().begin() + static_cast<std::ptrdiff_t>((ch + 1) * h * w));
  return Tensor({h, w}, std::move(data));
}

}  // namespace

Tensor mipmap_downsample(const Tensor& t, int level) {
  require(level >= 0, "mipmap_downsample: negative level");
  require(t.rank() == 2 || t.rank() == 3, "mipmap_downsample expects (H, W) or (C, H, W)");
  if (t.rank() == 3) {
    std::vector<double> data;
    Shape out_shape;
    for (std::size_t ch = 0; ch < t.shape()[0]; ++ch) {
      const Tensor m = mipmap_downsample(channel(t, ch), level);
      out_shape = {t.shape()[0], m.rows(), m.cols()};
      data.insert(data.end(), m.data().begin(), m.data().end());
    }
    return Tensor(out_shape, std::move(data));
  }
  Tensor out = t;
  for (int i = 0; i < level; ++i) {
    out = downsample_once(out);
  }
  return out;
}

TextureAsset TextureAsset::from_base(Tensor base, int levels) {
  require(levels >= 0, "TextureAsset: negative level count");
  TextureAsset asset;
  asset.mip_chain.push_back(base);
  for (int s = 1; s <= levels; ++s) {
    asset.mip_chain.push_back(mipmap_downsample(asset.mip_chain.back(), 1));
  }
  asset.base = std::move(base);
  return asset;
}

const Tensor& TextureAsset::level(int s) const {
  require(s >= 0 && static_cast<std::size_t>(s) < mip_chain.size(), "TextureAsset: mip level out of range");
  return mip_chain[static_cast<std::size_t>(s)];
}

double mcr(std::span<const TextureAsset> gen, std::span<const TextureAsset> gt, int level, double tau) {
  require(!gen.empty() && gen.size() == gt.size(), "mcr: texture sets must be non-empty and equal in size");
  require(level >= 1, "mcr: level must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    require(gen[i].base.shape() == gt[i].base.shape(), [&] { return "mcr: shape mismatch at pair " + std::to_string(i); });
    const Tensor g = static_cast<std::size_t>(level) < gen[i].mip_chain.size() ? gen[i].level(level)
                                                                             : mipmap_downsample(gen[i].base, level);
    const Tensor t = static_cast<std::size_t>(level) < gt[i].mip_chain.size() ? gt[i].level(level)
                                                                            : mipmap_downsample(gt[i].base, level);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      num += std::abs(g[k] - t[k]);
      den += std::abs(t[k]);
    }
    require(den > 0.0, [&] { return "mcr: ground-truth texture " + std::to_string(i) + " has zero L1 norm"; });
    if (num / den < tau) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gen.size());
}

namespace {

constexpr double kEdgeTol = 1e-9;

struct SourceCoord {
  double x, y;
};

SourceCoord source_of(double r, double c, std::size_t h, std::size_t w, double cos_t, double sin_t) {
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double dx = c - cx, dy = r - cy;
  return {cx + cos_t * dx + sin_t * dy, cy - sin_t * dx + cos_t * dy};
}

bool inside(SourceCoord s, std::size_t h, std::size_t w) {
  return s.x >= -kEdgeTol && s.y >= -kEdgeTol && s.x <= static_cast<double>(w) - 1.0 + kEdgeTol &&
         s.y <= static_cast<double>(h) - 1.0 + kEdgeTol;
}

}  // namespace

std::size_t interior_crop_side(std::size_t height, std::size_t width, double degrees) {
  const double th = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(th), sin_t = std::sin(th);
  for (std::size_t s = std::min(height, width); s > 0; --s) {
    const std::size_t r0 = (height - s) / 2, c0 = (width - s) / 2;
    const double rs[2] = {static_cast<double>(r0), static_cast<double>(r0 + s - 1)};
    const double cs[2] = {static_cast<double>(c0), static_cast<double>(c0 + s - 1)};
    bool ok = true;
    for (double r : rs) {
      for (double c : cs) {
        ok = ok && inside(source_of(r, c, height, width, cos_t, sin_t), height, width);
      }
    }
    if (ok) {
      return s;
    }
  }
  return 0;
}

Tensor rotate_and_crop(const Tensor& image, double degrees, std::size_t crop_side) {
  require(image.rank() == 2, "rotate_and_crop expects a rank-2 image");
  const std::size_t h = image.rows(), w = image.cols();
  require(crop_side >= 1 && crop_side <= std::min(h, w), "rotate_and_crop: invalid crop side");
  const double th = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(th), sin_t = std::sin(th);
  const std::size_t r0 = (h - crop_side) / 2, c0 = (w - crop_side) / 2;
  Tensor out({crop_side, crop_side});
  for (std::size_t r = 0; r < crop_side; ++r) {
    for (std::size_t c = 0; c < crop_side; ++c) {
      const auto src = source_of(static_cast<double>(r0 + r), static_cast<double>(c0 + c), h, w, cos_t, sin_t);
      const double x = std::clamp(src.x, 0.0, static_cast<double>(w) - 1.0);
      const double y = std::clamp(src.y, 0.0, static_cast<double>(h) - 1.0);
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const auto y0 = static_cast<std::size_t>(std::floor(y));
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
      out(r, c) = (1 - fy) * ((1 - fx) * image(y0, x0) + fx * image(y0, x1)) +
                  fy * ((1 - fx) * image(y1, x0) + fx * image(y1, x1));
    }
  }
  return out;
}

double adf(const TextureAsset& gen, const TextureAsset& gt, std::span<const double> angles_deg, int window) {
  require(!angles_deg.empty(), "adf: empty angle set");
  require(gen.base.shape() == gt.base.shape(), "adf: shape mismatch");
  require(gen.base.rank() == 2 || gen.base.rank() == 3, "adf expects (H, W) or (C, H, W) textures");
  const std::size_t channels = gen.base.rank() == 3 ? gen.base.shape()[0] : 1;
  double total = 0.0;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const Tensor a = gen.base.rank() == 3 ? channel(gen.base, ch) : gen.base;
    const Tensor b = gt.base.rank() == 3 ? channel(gt.base, ch) : gt.base;
    for (double theta : angles_deg) {
      const std::size_t side = interior_crop_side(a.rows(), a.cols(), theta);
      require(side >= static_cast<std::size_t>(window), "texture too small for angle set");
      total += ssim(rotate_and_crop(a, theta, side), rotate_and_crop(b, theta, side), window);
    }
  }
  return total / static_cast<double>(angles_deg.size() * channels);
}

std::uint64_t peak_memory(const MemoryLedger& ledger) {
  require(!ledger.timeline.empty(), "peak_memory: empty ledger");
  std::uint64_t peak = 0;
  for (const auto& e : ledger.timeline) {
    peak = std::max(peak, e.geometry_bytes + e.texture_bytes);
  }
  return peak;
}

}  // namespace muonad
