#include <algorithm>
#include <cmath>

#include "nemo/workload.hpp"

namespace nemo::workload {

double Quantizer::scale() const {
    return (x_max - x_min) / (std::ldexp(1.0, bits) - 1.0);
}

double Quantizer::zero_point() const { return -x_min / scale(); }

std::int64_t Quantizer::max_level() const { return (std::int64_t{1} << bits) - 1; }

Quantizer make_quantizer(int bits, double x_min, double x_max) {
    require(bits >= 2 && bits <= 32, "quantizer: bit width must be in [2, 32]");
    require(std::isfinite(x_min) && std::isfinite(x_max), "quantizer: non-finite range");
    require(x_min < x_max, "quantizer: x_min must be below x_max");
    return Quantizer{bits, x_min, x_max};
}

Quantized quantize_dequantize(const Quantizer& q, double x) {
    const double s = q.scale();
    const double z = q.zero_point();
    const double clamped = std::clamp(x, q.x_min, q.x_max);
    auto level = static_cast<std::int64_t>(std::llround(clamped / s + z));
    level = std::clamp<std::int64_t>(level, 0, q.max_level());
    return {level, s * (static_cast<double>(level) - z)};
}

}  // namespace nemo::workload
