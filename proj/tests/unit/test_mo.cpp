#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "nemo/mo.hpp"

using namespace nemo;
using namespace nemo::mo;

namespace {

std::vector<ObjectiveVector> random_points(std::size_t n, std::size_t k, Rng& rng, int grid = 0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObjectiveVector> pts(n, ObjectiveVector(k));
    for (auto& p : pts) {
        for (auto& x : p) x = grid > 0 ? std::floor(u(rng) * grid) / grid : u(rng);
    }
    return pts;
}

// O(n^2 k) peeling: a point is in the current front if nothing left dominates it.
std::vector<std::size_t> brute_force_ranks(const std::vector<ObjectiveVector>& pts) {
    auto dom = [](const ObjectiveVector& a, const ObjectiveVector& b) {
        bool strict = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] > b[i]) return false;
            if (a[i] < b[i]) strict = true;
        }
        return strict;
    };
    std::vector<std::size_t> rank(pts.size(), SIZE_MAX);
    std::size_t assigned = 0;
    for (std::size_t r = 0; assigned < pts.size(); ++r) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] != SIZE_MAX) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
                dominated = rank[j] == SIZE_MAX && j != i && dom(pts[j], pts[i]);
            }
            if (!dominated) front.push_back(i);
        }
        for (auto i : front) rank[i] = r;
        assigned += front.size();
    }
    return rank;
}

double hand_r2(const std::vector<ObjectiveVector>& front, const std::vector<ObjectiveVector>& weights) {
    double sum = 0.0;
    for (const auto& w : weights) {
        double best = INFINITY;
        for (const auto& g : front) {
            double worst = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, w[i] * std::abs(g[i]));
            best = std::min(best, worst);
        }
        sum += best;
    }
    return sum / static_cast<double>(weights.size());
}

}  // namespace

TEST_SUITE("mo") {

TEST_CASE("dominance examples") {
    CHECK(dominates(ObjectiveVector{0.1, 0.2}, ObjectiveVector{0.2, 0.3}));
    CHECK_FALSE(dominates(ObjectiveVector{0.1, 0.2}, ObjectiveVector{0.1, 0.2}));
    CHECK_FALSE(dominates(ObjectiveVector{0.1, 0.5}, ObjectiveVector{0.2, 0.3}));
    CHECK_FALSE(dominates(ObjectiveVector{0.2, 0.3}, ObjectiveVector{0.1, 0.5}));
    CHECK_THROWS_AS(dominates(ObjectiveVector{0.1, 0.2}, ObjectiveVector{0.1, 0.2, 0.3}), ContractError);
}

TEST_CASE("dominance is irreflexive, antisymmetric and transitive") {
    Rng rng(7);
    for (int t = 0; t < 300; ++t) {
        auto p = random_points(3, 3, rng, 4);
        CHECK_FALSE(dominates(p[0], p[0]));
        if (dominates(p[0], p[1])) CHECK_FALSE(dominates(p[1], p[0]));
        if (dominates(p[0], p[1]) && dominates(p[1], p[2])) CHECK(dominates(p[0], p[2]));
    }
}

TEST_CASE("non-dominated sort small cases") {
    auto part = non_dominated_sort(std::vector<ObjectiveVector>{{1, 2}, {2, 1}, {3, 3}});
    REQUIRE(part.fronts.size() == 2);
    CHECK(part.fronts[0] == std::vector<std::size_t>{0, 1});
    CHECK(part.fronts[1] == std::vector<std::size_t>{2});

    auto single = non_dominated_sort(std::vector<ObjectiveVector>{{1, 1}});
    CHECK(single.fronts == std::vector<std::vector<std::size_t>>{{0}});

    CHECK_THROWS_AS(non_dominated_sort(std::vector<ObjectiveVector>{}), ContractError);
    CHECK_THROWS_AS(non_dominated_sort(std::vector<ObjectiveVector>{{1, 2}, {1}}), ContractError);
}

TEST_CASE("non-dominated sort matches the brute-force oracle") {
    Rng rng(11);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 1 + rng() % 200;
        const std::size_t k = 2 + rng() % 3;
        // coarse grid forces ties and duplicates
        auto pts = random_points(n, k, rng, t % 2 ? 5 : 0);
        const auto part = non_dominated_sort(pts);
        const auto expect = brute_force_ranks(pts);
        CHECK(part.rank == expect);
        std::size_t covered = 0;
        for (std::size_t f = 0; f < part.fronts.size(); ++f) {
            covered += part.fronts[f].size();
            CHECK(std::is_sorted(part.fronts[f].begin(), part.fronts[f].end()));
            for (auto i : part.fronts[f]) CHECK(part.rank[i] == f);
        }
        CHECK(covered == n);
    }
}

TEST_CASE("weight vector lattices") {
    auto w = uniform_weight_vectors(3, 25);
    CHECK(w.size() == 28);
    CHECK(w.divisions == 6);
    std::set<ObjectiveVector> unique(w.vectors.begin(), w.vectors.end());
    CHECK(unique.size() == 28);
    for (const auto& v : w.vectors) {
        double s = 0;
        for (double x : v) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }

    auto two = uniform_weight_vectors(2, 3);
    CHECK(two.divisions == 2);
    std::set<ObjectiveVector> got(two.vectors.begin(), two.vectors.end());
    CHECK(got == std::set<ObjectiveVector>{{0, 1}, {0.5, 0.5}, {1, 0}});

    auto corners = uniform_weight_vectors(3, 3);
    CHECK(corners.size() == 3);
    CHECK(corners.divisions == 1);

    CHECK(lattice_size(3, 6) == 28);
    CHECK(lattice_size(2, 2) == 3);
}

TEST_CASE("R2 worked example") {
    WeightVectorSet w{{{1, 0}, {0, 1}, {0.5, 0.5}}, 0};
    const std::vector<double> z{0, 0};
    std::vector<ObjectiveVector> front{{0.2, 0.8}, {0.6, 0.3}};
    const double expected = hand_r2(front, w.vectors);
    CHECK(std::abs(expected - 0.8 / 3.0) < 1e-12);
    CHECK(std::abs(r2_indicator(front, w, z) - 0.2667) < 1e-4);
    CHECK(r2_indicator(front, w, z) == doctest::Approx(expected).epsilon(1e-12));

    auto bigger = front;
    bigger.push_back({0.1, 0.1});
    CHECK(r2_indicator(bigger, w, z) < r2_indicator(front, w, z));

    CHECK(r2_indicator(std::vector<ObjectiveVector>{{0, 0}}, w, z) == 0.0);
    CHECK_THROWS_AS(r2_indicator(std::vector<ObjectiveVector>{}, w, z), ContractError);
}

TEST_CASE("R2 is monotone under supersets") {
    Rng rng(3);
    const auto w = uniform_weight_vectors(3, 25);
    const std::vector<double> z{0, 0, 0};
    for (int t = 0; t < 1000; ++t) {
        auto small = random_points(1 + rng() % 6, 3, rng);
        auto large = small;
        auto extra = random_points(1 + rng() % 6, 3, rng);
        large.insert(large.end(), extra.begin(), extra.end());
        CHECK(r2_indicator(large, w, z) <= r2_indicator(small, w, z));
        CHECK(r2_indicator(small, w, z) == doctest::Approx(hand_r2(small, w.vectors)));
    }
}

TEST_CASE("R2 is zero iff the utopia is a member (interior weights)") {
    WeightVectorSet w{{{0.2, 0.8}, {0.5, 0.5}, {0.7, 0.3}}, 0};
    const std::vector<double> z{0, 0};
    CHECK(r2_indicator(std::vector<ObjectiveVector>{{0.3, 0.1}, {0, 0}}, w, z) == 0.0);
    CHECK(r2_indicator(std::vector<ObjectiveVector>{{0.3, 0.1}, {0, 1e-9}}, w, z) > 0.0);
}

TEST_CASE("nsga3 select takes whole fronts and niches the overflow") {
    Rng rng(5);
    const auto refs = uniform_weight_vectors(2, 5);

    std::vector<ObjectiveVector> four{{0, 1}, {0.3, 0.6}, {0.6, 0.3}, {1, 0}};
    auto all = nsga3_select(four, 4, refs, rng);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});

    // fronts of sizes (3, 5)
    std::vector<ObjectiveVector> pts{{0, 1}, {0.5, 0.5}, {1, 0}};
    for (int i = 0; i < 5; ++i) pts.push_back({0.2 + 0.25 * i, 1.4 - 0.25 * i});
    auto exact = nsga3_select(pts, 3, refs, rng);
    std::sort(exact.begin(), exact.end());
    CHECK(exact == std::vector<std::size_t>{0, 1, 2});

    CHECK_THROWS_AS(nsga3_select(pts, 9, refs, rng), ContractError);
}

TEST_CASE("nsga3 niching balance on fronts of sizes (2, 6)") {
    const auto refs = uniform_weight_vectors(2, 5);  // 5 directions
    std::vector<ObjectiveVector> pts{{0.0, 0.0}, {0.05, -0.01}};
    // second front spread over directions, two points per outer direction
    const std::vector<ObjectiveVector> second{{1.0, 0.2}, {0.98, 0.24}, {0.6, 0.6}, {0.58, 0.63},
                                              {0.2, 1.0}, {0.24, 0.97}};
    pts.insert(pts.end(), second.begin(), second.end());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto sel = nsga3_select(pts, 5, refs, rng);
        REQUIRE(sel.size() == 5);
        std::set<std::size_t> chosen(sel.begin(), sel.end());
        CHECK(chosen.count(0) == 1);
        CHECK(chosen.count(1) == 1);

        const auto normed = normalize(pts);
        const auto assoc = associate(normed, refs);
        std::map<std::size_t, int> count;
        for (auto i : sel) ++count[assoc.niche[i]];
        int lo = 1 << 20, hi = 0;
        std::set<std::size_t> occupied;
        for (std::size_t i = 2; i < pts.size(); ++i) occupied.insert(assoc.niche[i]);
        for (auto n : occupied) {
            lo = std::min(lo, count[n]);
            hi = std::max(hi, count[n]);
        }
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("nsga3 is rank consistent and deterministic") {
    const auto refs = uniform_weight_vectors(3, 25);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng gen(seed);
        auto pts = random_points(40, 3, gen, 6);
        Rng a(seed), b(seed);
        const auto sel = nsga3_select(pts, 17, refs, a);
        CHECK(sel == nsga3_select(pts, 17, refs, b));
        const auto part = non_dominated_sort(pts);
        std::size_t worst_selected = 0;
        std::set<std::size_t> chosen(sel.begin(), sel.end());
        CHECK(chosen.size() == 17);
        for (auto i : sel) worst_selected = std::max(worst_selected, part.rank[i]);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!chosen.count(i)) CHECK(part.rank[i] >= worst_selected);
        }
    }
}

TEST_CASE("survival order prefixes are valid selections") {
    const auto refs = uniform_weight_vectors(3, 25);
    Rng gen(9);
    auto pts = random_points(30, 3, gen, 4);
    Rng rng(1);
    const auto order = nsga3_order(pts, refs, rng);
    REQUIRE(order.order.size() == pts.size());
    std::vector<std::size_t> sorted = order.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    for (std::size_t p = 0; p < order.order.size(); ++p) CHECK(order.position[order.order[p]] == p);
    for (std::size_t p = 1; p < order.order.size(); ++p) {
        CHECK(order.partition.rank[order.order[p - 1]] <= order.partition.rank[order.order[p]]);
    }
}

TEST_CASE("normalization handles degenerate ranges") {
    std::vector<ObjectiveVector> pts{{1, 5}, {2, 5}, {3, 5}};
    const auto n = normalize(pts);
    CHECK(n[0][0] == 0.0);
    CHECK(n[2][0] == doctest::Approx(1.0));
    for (const auto& p : n) CHECK(std::isfinite(p[1]));
}

}
