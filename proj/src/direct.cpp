#include "nemo/direct.hpp"

#include <algorithm>
#include <cmath>

namespace nemo::direct {

int decode_value(double value, Rounding rounding, std::span<const int> allowed) {
    require(!allowed.empty(), "decode: empty bit set");
    if (rounding == Rounding::floor) {
        int best = allowed.front();
        for (int b : allowed) {
            if (static_cast<double>(b) <= value) best = b;
        }
        return best;
    }
    int best = allowed.front();
    double best_gap = std::abs(value - best);
    for (int b : allowed) {
        const double gap = std::abs(value - b);
        if (gap <= best_gap) {  // ascending scan: equal gap keeps the wider width
            best = b;
            best_gap = gap;
        }
    }
    return best;
}

BitConfig decode_direct(const DirectGenome& genome, std::span<const int> allowed) {
    BitConfig c;
    c.bits.reserve(genome.values.size());
    for (double v : genome.values) c.bits.push_back(decode_value(v, genome.rounding, allowed));
    return c;
}

DirectGenome random_genome(std::size_t length, Rounding rounding, Bounds bounds, Rng& rng) {
    std::uniform_real_distribution<double> u(bounds.lo, bounds.hi);
    DirectGenome g{std::vector<double>(length), rounding};
    for (auto& v : g.values) v = u(rng);
    return g;
}

double sbx_beta(double u, double eta_c) {
    const double exponent = 1.0 / (eta_c + 1.0);
    if (u <= 0.5) return std::pow(2.0 * u, exponent);
    return std::pow(1.0 / (2.0 * (1.0 - u)), exponent);
}

std::pair<DirectGenome, DirectGenome> sbx_crossover(const DirectGenome& p1, const DirectGenome& p2,
                                                    double eta_c, Bounds bounds, Rng& rng) {
    require(p1.values.size() == p2.values.size(), "sbx: parent length mismatch");
    require(p1.rounding == p2.rounding, "sbx: parents use different rounding modes");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DirectGenome c1 = p1;
    DirectGenome c2 = p2;
    for (std::size_t i = 0; i < p1.values.size(); ++i) {
        const double a = p1.values[i];
        const double b = p2.values[i];
        const double beta = sbx_beta(unit(rng), eta_c);
        double x1 = std::clamp(0.5 * ((1.0 + beta) * a + (1.0 - beta) * b), bounds.lo, bounds.hi);
        double x2 = std::clamp(0.5 * ((1.0 - beta) * a + (1.0 + beta) * b), bounds.lo, bounds.hi);
        if (unit(rng) < 0.5) std::swap(x1, x2);
        c1.values[i] = x1;
        c2.values[i] = x2;
    }
    return {std::move(c1), std::move(c2)};
}

DirectGenome polynomial_mutation(const DirectGenome& genome, double eta_m, double per_gene_prob,
                                 Bounds bounds, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DirectGenome out = genome;
    const double span = bounds.hi - bounds.lo;
    const double power = 1.0 / (eta_m + 1.0);
    for (auto& x : out.values) {
        if (!(unit(rng) < per_gene_prob)) continue;
        const double d1 = (x - bounds.lo) / span;
        const double d2 = (bounds.hi - x) / span;
        const double u = unit(rng);
        double delta = 0.0;
        if (u < 0.5) {
            const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta_m + 1.0);
            delta = std::pow(v, power) - 1.0;
        } else {
            const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta_m + 1.0);
            delta = 1.0 - std::pow(v, power);
        }
        x = std::clamp(x + delta * span, bounds.lo, bounds.hi);
    }
    return out;
}

}  // namespace nemo::direct
