#pragma once

// Real-coded genomes over per-quantizer bit values with simulated binary
// crossover and bounded polynomial mutation.

#include <span>
#include <utility>
#include <vector>

#include "nemo/common.hpp"

namespace nemo::direct {

enum class Rounding { nearest, floor };

struct Bounds {
    double lo = 2.0;
    double hi = 8.0;
};

struct DirectGenome {
    std::vector<double> values;
    Rounding rounding = Rounding::nearest;

    friend bool operator==(const DirectGenome&, const DirectGenome&) = default;
};

/// Nearest allowed width (halves round up) or the largest allowed width not
/// above `value` (clamped to the smallest). `allowed` must be ascending.
int decode_value(double value, Rounding rounding, std::span<const int> allowed);

BitConfig decode_direct(const DirectGenome& genome, std::span<const int> allowed);

DirectGenome random_genome(std::size_t length, Rounding rounding, Bounds bounds, Rng& rng);

/// Spread factor of SBX for a uniform draw u in [0, 1).
double sbx_beta(double u, double eta_c);

std::pair<DirectGenome, DirectGenome> sbx_crossover(const DirectGenome& p1, const DirectGenome& p2,
                                                    double eta_c, Bounds bounds, Rng& rng);

DirectGenome polynomial_mutation(const DirectGenome& genome, double eta_m, double per_gene_prob,
                                 Bounds bounds, Rng& rng);

}  // namespace nemo::direct
