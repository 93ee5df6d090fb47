#include "muonad/texture_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "muonad/error.hpp"

namespace muonad {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t offset, const std::string& what) {
  throw Error(name + ": byte " + std::to_string(offset) + ": " + what);
}

class GraymapReader {
 public:
  GraymapReader(std::string_view text, const std::string& name) : text_(text), name_(name) {}

  std::size_t offset() const { return pos_; }
  void advance(std::size_t n) { pos_ = std::min(pos_ + n, text_.size()); }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long read_int(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    long v = 0;
    const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc() || ptr == text_.data() + pos_) {
      fail(name_, start, std::string("expected ") + what);
    }
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '#') {
      fail(name_, pos_, std::string("unexpected character after ") + what);
    }
    return v;
  }

 private:
  std::string_view text_;
  const std::string& name_;
  std::size_t pos_ = 0;
};

AssetFile parse_graymap(std::string_view text, const std::string& name) {
  GraymapReader r(text, name);
  r.skip_space();
  if (text.substr(r.offset(), 2) != "P2") {
    fail(name, r.offset(), "expected graymap magic \"P2\"");
  }
  r.advance(2);
  const long width = r.read_int("width");
  const long height = r.read_int("height");
  const long maxval = r.read_int("maxval");
  if (width <= 0 || height <= 0) fail(name, r.offset(), "width and height must be positive");
  if (maxval <= 0 || maxval > 65535) fail(name, r.offset(), "maxval must lie in [1, 65535]");
  Tensor t({static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
  for (std::size_t i = 0; i < t.size(); ++i) {
    r.skip_space();
    const std::size_t at = r.offset();
    const long v = r.read_int("sample");
    if (v < 0 || v > maxval) fail(name, at, "sample " + std::to_string(v) + " outside [0, maxval]");
    t[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  r.skip_space();
  if (r.offset() != text.size()) {
    fail(name, r.offset(), "trailing data after " + std::to_string(t.size()) + " samples");
  }
  AssetFile out;
  out.textures.push_back(std::move(t));
  return out;
}

Tensor read_tensor(const nlohmann::json& j, const std::string& name, std::size_t offset, const std::string& what) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    fail(name, offset, what + " needs \"shape\" and \"data\"");
  }
  try {
    const auto shape = j.at("shape").get<Shape>();
    if (shape.size() != 2) fail(name, offset, what + " must be rank 2");
    return Tensor(shape, j.at("data").get<std::vector<double>>());
  } catch (const Error& e) {
    if (std::string_view(e.what()).starts_with(name)) throw;
    fail(name, offset, what + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(name, offset, what + ": " + e.what());
  }
}

AssetFile parse_json_asset(std::string_view text, const std::string& name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(name, e.byte > 0 ? e.byte - 1 : 0, "malformed JSON");
  }
  if (!j.is_object()) fail(name, 0, "top-level JSON value must be an object");
  const auto key_offset = [&](const char* key) {
    const auto p = text.find(std::string("\"") + key + "\"");
    return p == std::string_view::npos ? std::size_t{0} : p;
  };
  for (const auto& [key, _] : j.items()) {
    if (key != "textures" && key != "features") fail(name, key_offset(key.c_str()), "unknown field '" + key + "'");
  }
  AssetFile out;
  if (j.contains("textures")) {
    const std::size_t at = key_offset("textures");
    if (!j["textures"].is_array() || j["textures"].empty()) fail(name, at, "\"textures\" must be a non-empty array");
    for (std::size_t i = 0; i < j["textures"].size(); ++i) {
      Tensor t = read_tensor(j["textures"][i], name, at, "textures[" + std::to_string(i) + "]");
      for (double v : t.data()) {
        if (!(v >= 0.0 && v <= 1.0)) fail(name, at, "textures[" + std::to_string(i) + "] has a value outside [0, 1]");
      }
      out.textures.push_back(std::move(t));
    }
  }
  if (j.contains("features")) {
    out.features = read_tensor(j["features"], name, key_offset("features"), "features");
  }
  if (out.textures.empty() && !out.features) fail(name, 0, "file holds neither textures nor features");
  return out;
}

}  // namespace

AssetFile parse_asset(std::string_view text, const std::string& name) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i == text.size()) fail(name, i, "empty file");
  if (text[i] == 'P') return parse_graymap(text, name);
  return parse_json_asset(text, name);
}

AssetFile load_asset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(path + ": cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw Error(path + ": read error");
  }
  return parse_asset(buf.str(), path);
}

std::string to_graymap(const Tensor& texture, int maxval) {
  require(texture.rank() == 2, "to_graymap expects a rank-2 texture");
  require(maxval >= 1 && maxval <= 65535, "to_graymap: maxval must lie in [1, 65535]");
  std::ostringstream out;
  out << "P2\n" << texture.cols() << ' ' << texture.rows() << '\n' << maxval << '\n';
  for (std::size_t r = 0; r < texture.rows(); ++r) {
    for (std::size_t c = 0; c < texture.cols(); ++c) {
      const double v = std::clamp(texture(r, c), 0.0, 1.0);
      out << (c ? " " : "") << static_cast<long>(std::lround(v * maxval));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace muonad
