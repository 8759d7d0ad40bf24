#include "nemo/mo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nemo::mo {

namespace {

constexpr double kMinRange = 1e-12;

void check_uniform(std::span<const ObjectiveVector> points) {
    require(!points.empty(), "empty point set");
    const auto k = points.front().size();
    require(k >= 1, "zero-dimensional objective vector");
    for (const auto& p : points) require(p.size() == k, "objective dimension mismatch");
}

// Picks `count` members of `front` by niching; `niche_count` carries the
// counts contributed by already selected points and is updated in place.
std::vector<std::size_t> niche_fill(std::span<const std::size_t> front, std::size_t count,
                                    const Association& assoc,
                                    std::vector<std::size_t>& niche_count, Rng& rng) {
    const std::size_t n_refs = niche_count.size();
    std::vector<std::vector<std::size_t>> members(n_refs);
    for (auto idx : front) members[assoc.niche[idx]].push_back(idx);

    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::vector<std::size_t> tied;
    while (picked.size() < count) {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < n_refs; ++j) {
            if (!members[j].empty()) best = std::min(best, niche_count[j]);
        }
        tied.clear();
        for (std::size_t j = 0; j < n_refs; ++j) {
            if (!members[j].empty() && niche_count[j] == best) tied.push_back(j);
        }
        const auto j = tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
        auto& pool = members[j];

        std::size_t slot = 0;
        if (niche_count[j] == 0) {
            // closest to the reference line; ties drawn at random
            double closest = std::numeric_limits<double>::infinity();
            for (auto idx : pool) closest = std::min(closest, assoc.distance[idx]);
            std::vector<std::size_t> near;
            for (std::size_t s = 0; s < pool.size(); ++s) {
                if (assoc.distance[pool[s]] == closest) near.push_back(s);
            }
            slot = near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
        } else {
            slot = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
        }
        picked.push_back(pool[slot]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(slot));
        ++niche_count[j];
    }
    return picked;
}

}  // namespace

bool dominates(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dominates: dimension mismatch");
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

FrontPartition non_dominated_sort(std::span<const ObjectiveVector> points) {
    check_uniform(points);
    const auto n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(points[i], points[j])) {
                dominated_by_me[i].push_back(j);
                ++domination_count[j];
            } else if (dominates(points[j], points[i])) {
                dominated_by_me[j].push_back(i);
                ++domination_count[i];
            }
        }
    }

    FrontPartition out;
    out.rank.assign(n, 0);
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        if (domination_count[i] == 0) current.push_back(i);
    }
    std::size_t r = 0;
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto i : current) {
            out.rank[i] = r;
            for (auto j : dominated_by_me[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        out.fronts.push_back(std::move(current));
        current = std::move(next);
        ++r;
    }
    return out;
}

std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> points) {
    if (points.empty()) return {};
    return non_dominated_sort(points).fronts.front();
}

std::size_t lattice_size(std::size_t k, std::size_t h) {
    // C(h+k-1, k-1) computed incrementally; exact for the sizes used here
    std::size_t result = 1;
    for (std::size_t i = 1; i < k; ++i) result = result * (h + i) / i;
    return result;
}

WeightVectorSet uniform_weight_vectors(std::size_t k, std::size_t target_count) {
    require(k >= 2, "uniform_weight_vectors: k must be >= 2");
    require(target_count >= k, "uniform_weight_vectors: target_count must be >= k");

    std::size_t h = 1;
    while (lattice_size(k, h) < target_count) ++h;

    WeightVectorSet set;
    set.divisions = static_cast<int>(h);
    std::vector<std::size_t> parts(k, 0);
    // enumerate compositions of h into k parts, first coordinate ascending
    auto recurse = [&](auto& self, std::size_t dim, std::size_t left) -> void {
        if (dim + 1 == k) {
            parts[dim] = left;
            ObjectiveVector w(k);
            for (std::size_t i = 0; i < k; ++i) {
                w[i] = static_cast<double>(parts[i]) / static_cast<double>(h);
            }
            set.vectors.push_back(std::move(w));
            return;
        }
        for (std::size_t v = 0; v <= left; ++v) {
            parts[dim] = v;
            self(self, dim + 1, left - v);
        }
    };
    recurse(recurse, 0, h);
    return set;
}

double r2_indicator(std::span<const ObjectiveVector> front, const WeightVectorSet& weights,
                    std::span<const double> utopia) {
    require(!front.empty(), "r2_indicator: empty front");
    require(weights.size() > 0, "r2_indicator: empty weight set");
    const auto k = utopia.size();
    for (const auto& g : front) require(g.size() == k, "r2_indicator: dimension mismatch");
    require(weights.dimension() == k, "r2_indicator: weight dimension mismatch");

    double total = 0.0;
    for (const auto& lambda : weights.vectors) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& gamma : front) {
            double worst = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                worst = std::max(worst, lambda[i] * std::abs(utopia[i] - gamma[i]));
            }
            best = std::min(best, worst);
        }
        total += best;
    }
    return total / static_cast<double>(weights.size());
}

std::vector<ObjectiveVector> normalize(std::span<const ObjectiveVector> points) {
    check_uniform(points);
    const auto k = points.front().size();
    ObjectiveVector lo(k, std::numeric_limits<double>::infinity());
    ObjectiveVector hi(k, -std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
        for (std::size_t i = 0; i < k; ++i) {
            lo[i] = std::min(lo[i], p[i]);
            hi[i] = std::max(hi[i], p[i]);
        }
    }
    std::vector<ObjectiveVector> out(points.size(), ObjectiveVector(k));
    for (std::size_t n = 0; n < points.size(); ++n) {
        for (std::size_t i = 0; i < k; ++i) {
            out[n][i] = (points[n][i] - lo[i]) / std::max(hi[i] - lo[i], kMinRange);
        }
    }
    return out;
}

Association associate(std::span<const ObjectiveVector> normalized, const WeightVectorSet& refs) {
    require(refs.size() > 0, "associate: empty reference set");
    Association assoc;
    assoc.niche.resize(normalized.size());
    assoc.distance.resize(normalized.size());
    for (std::size_t n = 0; n < normalized.size(); ++n) {
        const auto& p = normalized[n];
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_ref = 0;
        for (std::size_t j = 0; j < refs.size(); ++j) {
            const auto& w = refs.vectors[j];
            double ww = 0.0;
            double pw = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                ww += w[i] * w[i];
                pw += p[i] * w[i];
            }
            const double t = pw / ww;
            double d2 = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double diff = p[i] - t * w[i];
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (d < best) {
                best = d;
                best_ref = j;
            }
        }
        assoc.niche[n] = best_ref;
        assoc.distance[n] = best;
    }
    return assoc;
}

std::vector<std::size_t> nsga3_select(std::span<const ObjectiveVector> candidates,
                                      std::size_t target_size, const WeightVectorSet& refs,
                                      Rng& rng) {
    require(target_size <= candidates.size(), "nsga3_select: target exceeds candidate count");
    if (target_size == 0) return {};
    const auto partition = non_dominated_sort(candidates);

    std::vector<std::size_t> selected;
    selected.reserve(target_size);
    std::size_t f = 0;
    while (f < partition.fronts.size() &&
           selected.size() + partition.fronts[f].size() <= target_size) {
        selected.insert(selected.end(), partition.fronts[f].begin(), partition.fronts[f].end());
        ++f;
    }
    if (selected.size() == target_size) return selected;

    const auto assoc = associate(normalize(candidates), refs);
    std::vector<std::size_t> niche_count(refs.size(), 0);
    for (auto idx : selected) ++niche_count[assoc.niche[idx]];
    const auto picked =
        niche_fill(partition.fronts[f], target_size - selected.size(), assoc, niche_count, rng);
    selected.insert(selected.end(), picked.begin(), picked.end());
    return selected;
}

SurvivalOrder nsga3_order(std::span<const ObjectiveVector> candidates,
                          const WeightVectorSet& refs, Rng& rng) {
    SurvivalOrder out;
    out.partition = non_dominated_sort(candidates);
    const auto assoc = associate(normalize(candidates), refs);
    std::vector<std::size_t> niche_count(refs.size(), 0);
    out.order.reserve(candidates.size());
    for (const auto& front : out.partition.fronts) {
        const auto picked = niche_fill(front, front.size(), assoc, niche_count, rng);
        out.order.insert(out.order.end(), picked.begin(), picked.end());
    }
    out.position.assign(candidates.size(), 0);
    for (std::size_t p = 0; p < out.order.size(); ++p) out.position[out.order[p]] = p;
    return out;
}

}  // namespace nemo::mo
