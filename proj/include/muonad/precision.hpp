#pragma once

#include <string_view>
#include <vector>

#include "muonad/tensor.hpp"

namespace muonad {

/// HIGH_RANGE_16: 8-bit exponent / 7-bit mantissa (bfloat16 layout).
/// HIGH_PREC_16:  5-bit exponent / 10-bit mantissa (IEEE binary16 layout).
enum class PrecisionTag { HighRange16, HighPrec16, Full64 };

std::string_view to_string(PrecisionTag tag);

/// Round-to-nearest-even into the 16-bit formats, widened back to double.
/// Overflow saturates to the largest finite value; subnormal results flush to
/// signed zero.
double quantize_hr16(double x);
double quantize_hp16(double x);
double quantize(double x, PrecisionTag tag);
Tensor quantize(const Tensor& t, PrecisionTag tag);

inline constexpr double kHr16Max = 0x1.FEp127;
inline constexpr double kHp16Max = 65504.0;

/// score > tau -> HighRange16 (trainable); otherwise HighPrec16 and the
/// caller freezes the gradient.
std::vector<PrecisionTag> assign_precision(const Tensor& scores, double tau);

/// Quantizes each entry with its own tag.
Tensor quantize_tagged(const Tensor& t, const std::vector<PrecisionTag>& tags);

}  // namespace muonad
