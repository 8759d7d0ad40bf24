#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nemo {

/// All randomness in the library flows through this generator type.
using Rng = std::mt19937_64;

/// A point in minimization space.
using ObjectiveVector = std::vector<double>;

/// Raised when a caller breaks an operation's precondition.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed configuration or input files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractError(message);
}

/// Per-quantizer bit widths in canonical quantizer order.
struct BitConfig {
    std::vector<int> bits;

    [[nodiscard]] std::size_t size() const noexcept { return bits.size(); }
    int operator[](std::size_t i) const { return bits[i]; }

    friend bool operator==(const BitConfig&, const BitConfig&) = default;
    friend auto operator<=>(const BitConfig&, const BitConfig&) = default;
};

struct BitConfigHash {
    std::size_t operator()(const BitConfig& c) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (int b : c.bits) {
            h ^= static_cast<std::uint64_t>(b) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace nemo
