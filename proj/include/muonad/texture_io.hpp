#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "muonad/tensor.hpp"

namespace muonad {

/// Textures (and optionally feature rows) read from one file.
struct AssetFile {
  std::vector<Tensor> textures;  // each (H, W), values in [0, 1]
  std::optional<Tensor> features;
};

/// Two accepted layouts:
///   * plain ASCII graymap ("P2", width, height, maxval, then samples),
///     yielding one texture scaled to [0, 1];
///   * JSON {"textures": [{"shape": [H, W], "data": [...]}, ...],
///           "features": {"shape": [N, D], "data": [...]}} (features optional).
/// Missing, unreadable or malformed input throws Error naming the file and,
/// for content problems, the byte offset.
AssetFile load_asset_file(const std::string& path);
AssetFile parse_asset(std::string_view text, const std::string& name);

/// ASCII graymap with the given maxval, values clamped to [0, 1] first.
std::string to_graymap(const Tensor& texture, int maxval = 65535);

}  // namespace muonad
