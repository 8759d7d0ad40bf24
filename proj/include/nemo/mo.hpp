#pragma once

// Multi-objective primitives: Pareto dominance, non-dominated sorting,
// simplex-lattice weight vectors, the R2 indicator and reference-point
// (NSGA-III style) survival selection. Everything is minimization.

#include <cstddef>
#include <span>
#include <vector>

#include "nemo/common.hpp"

namespace nemo::mo {

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);

struct FrontPartition {
    std::vector<std::vector<std::size_t>> fronts;  // each front sorted ascending
    std::vector<std::size_t> rank;                 // front index per input point
};

/// Fast non-dominated sort. Throws ContractError on empty or ragged input.
FrontPartition non_dominated_sort(std::span<const ObjectiveVector> points);

/// Indices of the mutually non-dominated points (the first front).
std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> points);

/// Das-Dennis lattice on the unit simplex with the smallest division count H
/// such that C(H+k-1, k-1) >= target_count.
struct WeightVectorSet {
    std::vector<ObjectiveVector> vectors;
    int divisions = 0;

    [[nodiscard]] std::size_t size() const noexcept { return vectors.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept {
        return vectors.empty() ? 0 : vectors.front().size();
    }
};

WeightVectorSet uniform_weight_vectors(std::size_t k, std::size_t target_count);

/// Number of lattice points C(h+k-1, k-1).
std::size_t lattice_size(std::size_t k, std::size_t h);

/// Mean over weights of the best weighted-Tchebycheff distance to `utopia`.
/// Lower is better. Throws ContractError on an empty front.
double r2_indicator(std::span<const ObjectiveVector> front,
                    const WeightVectorSet& weights,
                    std::span<const double> utopia);

/// Reference-point survival selection. Whole fronts are taken in rank order;
/// the front that overflows `target_size` is thinned by niching against the
/// reference directions after translating by the pool's ideal point and
/// scaling by its per-objective range.
std::vector<std::size_t> nsga3_select(std::span<const ObjectiveVector> candidates,
                                      std::size_t target_size,
                                      const WeightVectorSet& refs, Rng& rng);

/// Full survival order of the pool: front by front, and inside each front the
/// order in which niching would pick its members. Any prefix of length K is a
/// valid nsga3 selection of size K. `position[i]` gives the place of point i.
struct SurvivalOrder {
    std::vector<std::size_t> order;
    std::vector<std::size_t> position;
    FrontPartition partition;
};

SurvivalOrder nsga3_order(std::span<const ObjectiveVector> candidates,
                          const WeightVectorSet& refs, Rng& rng);

/// Ideal-point translation and range scaling over the whole pool.
std::vector<ObjectiveVector> normalize(std::span<const ObjectiveVector> points);

/// Nearest reference direction (by perpendicular distance) for each point.
struct Association {
    std::vector<std::size_t> niche;
    std::vector<double> distance;
};

Association associate(std::span<const ObjectiveVector> normalized,
                      const WeightVectorSet& refs);

}  // namespace nemo::mo
