#include "muonad/precision.hpp"

#include <cmath>

#include "muonad/error.hpp"

namespace muonad {

std::string_view to_string(PrecisionTag tag) {
  switch (tag) {
    case PrecisionTag::HighRange16:
      return "HIGH_RANGE_16";
    case PrecisionTag::HighPrec16:
      return "HIGH_PREC_16";
    case PrecisionTag::Full64:
      return "FULL_64";
  }
  return "?";
}

namespace {

// significand_bits counts the implicit leading one.
double round_to_format(double x, int significand_bits, int min_normal_exp, double max_finite) {
  require(std::isfinite(x), "quantize: non-finite input");
  if (x == 0.0) {
    return x;
  }
  const double mag = std::abs(x);
  int e = 0;
  std::frexp(mag, &e);  // mag = m * 2^e, m in [0.5, 1)
  const double quantum = std::ldexp(1.0, e - significand_bits);
  double r = std::nearbyint(mag / quantum) * quantum;  // default rounding mode: ties to even
  if (r > max_finite) {
    r = max_finite;
  }
  if (r < std::ldexp(1.0, min_normal_exp)) {
    r = 0.0;
  }
  return std::copysign(r, x);
}

}  // namespace

double quantize_hr16(double x) { return round_to_format(x, 8, -126, kHr16Max); }

double quantize_hp16(double x) { return round_to_format(x, 11, -14, kHp16Max); }

double quantize(double x, PrecisionTag tag) {
  switch (tag) {
    case PrecisionTag::HighRange16:
      return quantize_hr16(x);
    case PrecisionTag::HighPrec16:
      return quantize_hp16(x);
    case PrecisionTag::Full64:
      return x;
  }
  return x;
}

Tensor quantize(const Tensor& t, PrecisionTag tag) {
  Tensor out = t;
  for (auto& v : out.values()) {
    v = quantize(v, tag);
  }
  return out;
}

std::vector<PrecisionTag> assign_precision(const Tensor& scores, double tau) {
  require(tau >= 0.0, "assign_precision: tau must be non-negative");
  std::vector<PrecisionTag> tags;
  tags.reserve(scores.size());
  for (double s : scores.values()) {
    tags.push_back(s > tau ? PrecisionTag::HighRange16 : PrecisionTag::HighPrec16);
  }
  return tags;
}

Tensor quantize_tagged(const Tensor& t, const std::vector<PrecisionTag>& tags) {
  require(tags.size() == t.size(), "quantize_tagged: tag count does not match tensor size");
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = quantize(out[i], tags[i]);
  }
  return out;
}

}  // namespace muonad
