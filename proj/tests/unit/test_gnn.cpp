#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nemo/gnn.hpp"

using namespace nemo;
using namespace nemo::gnn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = u(rng);
    return t;
}

Tensor identity(std::size_t n) {
    Tensor t = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

WorkloadGraph random_graph(std::size_t n, std::size_t width, Rng& rng) {
    WorkloadGraph g;
    g.nodes = n;
    g.feature_width = width;
    std::uniform_real_distribution<double> u(0.0, 3.0);
    g.features.resize(n * width);
    for (auto& v : g.features) v = u(rng);
    for (std::size_t i = 1; i < n; ++i) g.edges.emplace_back(rng() % i, i);
    return g;
}

}  // namespace

TEST_SUITE("gnn") {

TEST_CASE("selu constants") {
    CHECK(selu(0.0) == 0.0);
    CHECK(selu(1.0) == doctest::Approx(1.0507).epsilon(1e-4));
    CHECK(selu(-50.0) == doctest::Approx(-kSeluLambda * kSeluAlpha));
    CHECK(kSeluLambda * kSeluAlpha == doctest::Approx(1.7581).epsilon(1e-4));
}

TEST_CASE("GCN hand-evaluated cases") {
    Tensor one({1, 2}, {0.3, -0.7});
    CHECK(gcn_forward(one, {}, identity(2)) == one);

    // 2-node path: D^-1/2 (A+I) D^-1/2 = [[1/2, 1/2], [1/2, 1/2]]
    Tensor h({2, 2}, {1, 0, 0, 1});
    const auto out = gcn_forward(h, {{0, 1}}, identity(2));
    for (double v : out.data) CHECK(v == doctest::Approx(0.5));

    // 3-node path, node degrees (2, 3, 2) with self loops
    Tensor x({3, 1}, {1, 2, 4});
    const auto y = gcn_forward(x, {{0, 1}, {1, 2}}, identity(1));
    CHECK(y.at(0, 0) == doctest::Approx(1.0 / 2 + 2.0 / std::sqrt(6.0)));
    CHECK(y.at(1, 0) == doctest::Approx(1.0 / std::sqrt(6.0) + 2.0 / 3 + 4.0 / std::sqrt(6.0)));
    CHECK(y.at(2, 0) == doctest::Approx(2.0 / std::sqrt(6.0) + 4.0 / 2));

    Rng rng(1);
    const auto f = random_tensor({5, 4}, rng);
    const auto w = random_tensor({4, 3}, rng);
    CHECK(gcn_forward(f, {{0, 1}, {1, 2}}, w).shape == std::vector<std::size_t>{5, 3});
    CHECK_THROWS_AS(gcn_forward(f, {}, random_tensor({3, 3}, rng)), ContractError);
}

TEST_CASE("graph attention normalization") {
    Rng rng(2);
    std::vector<AttentionHead> heads;
    for (int i = 0; i < 4; ++i) heads.push_back({random_tensor({3, 5}, rng), random_tensor({10}, rng)});

    Tensor single({1, 3}, {1, 2, 3});
    const auto iso = gat_forward_detailed(single, {}, heads);
    for (const auto& h : iso.attention) CHECK(h[0] == std::vector<double>{1.0});

    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng() % 8;
        const auto f = random_tensor({n, 3}, rng, 3.0);
        Edges e;
        for (std::size_t i = 1; i < n; ++i) e.emplace_back(i - 1, i);
        const auto out = gat_forward_detailed(f, e, heads);
        CHECK(out.features.shape == std::vector<std::size_t>{n, 5});
        for (const auto& h : out.attention) {
            for (const auto& row : h) {
                CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }

    std::vector<AttentionHead> flat{{random_tensor({3, 5}, rng), Tensor::zeros({10})}};
    const auto f = random_tensor({4, 3}, rng);
    const auto out = gat_forward_detailed(f, {{0, 1}, {1, 2}, {2, 3}}, flat);
    CHECK(out.attention[0][1] == std::vector<double>(3, 1.0 / 3.0));
    CHECK(out.attention[0][0] == std::vector<double>(2, 0.5));
}

TEST_CASE("top-k pooling and unpooling") {
    Tensor f({4, 2}, {1, 0, 3, 0, 2, 0, 0, 0});
    Tensor p({2}, {1, 0});
    const auto pooled = top_k_pool(f, {{0, 1}, {1, 2}, {2, 3}}, p, 0.5);
    CHECK(pooled.kept == std::vector<std::size_t>{1, 2});
    CHECK(pooled.features.at(0, 0) == doctest::Approx(3.0 / (1.0 + std::exp(-3.0))));
    CHECK(pooled.edges == Edges{{0, 1}});

    // nodes 0 and 2 kept from a path: linked through the second power
    Tensor g({3, 1}, {5, -5, 4});
    const auto skip = top_k_pool(g, {{0, 1}, {1, 2}}, Tensor({1}, {1}), 0.6);
    CHECK(skip.kept == std::vector<std::size_t>{0, 2});
    CHECK(skip.edges == Edges{{0, 1}});

    const auto identity_pool = top_k_pool(f, {{0, 1}}, p, 1.0);
    CHECK(identity_pool.kept == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(top_k_pool(Tensor({1, 2}, {1, 1}), {}, p, 0.1).kept.size() == 1);

    const auto back = unpool(pooled.features, pooled.kept, 4);
    CHECK(back.rows() == 4);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(back.at(0, c) == 0.0);
        CHECK(back.at(3, c) == 0.0);
    }
    CHECK(back.at(1, 0) == pooled.features.at(0, 0));
}

TEST_CASE("graph U-Net keeps the node count") {
    Architecture a;
    a.kind = GraphLayer::graph_unet;
    a.in_features = 6;
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const auto g = random_graph(1 + rng() % 20, 6, rng);
        const auto genome = GnnGenome::random(a, rng);
        const auto out = gnn_infer(genome, g);
        CHECK(out.rows() == g.nodes);
        CHECK(out.cols() == 7);
    }
}

TEST_CASE("genome shapes and inference") {
    Architecture a;
    a.in_features = 8;
    const auto specs = parameter_specs(a);
    CHECK(specs.front().shape == std::vector<std::size_t>{8, 10});
    CHECK(specs.back().shape == std::vector<std::size_t>{7});
    std::size_t heads = 0;
    for (const auto& s : specs) heads += s.name.find(".vector") != std::string::npos;
    CHECK(heads == 4);

    auto params = GnnGenome::zeros(a).params();
    params[0] = Tensor::zeros({8, 9});
    CHECK_THROWS_AS(GnnGenome(a, params), ContractError);

    Rng rng(4);
    const auto g = random_graph(6, 8, rng);
    const auto zero = gnn_infer(GnnGenome::zeros(a), g);
    CHECK(zero.shape == std::vector<std::size_t>{6, 7});
    for (double v : zero.data) CHECK(v == 0.0);

    const auto genome = GnnGenome::random(a, rng);
    CHECK(gnn_infer(genome, g) == gnn_infer(genome, g));

    for (const auto& spec : specs) CHECK(spec.fan_in > 0);
    const auto r = GnnGenome::random(a, rng);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(specs[i].fan_in));
        for (double v : r.params()[i].data) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("no overflow for bounded weights") {
    Rng rng(5);
    for (auto kind : {GraphLayer::gcn, GraphLayer::graph_unet}) {
        Architecture a;
        a.kind = kind;
        a.in_features = 8;
        for (int t = 0; t < 20; ++t) {
            auto params = GnnGenome::zeros(a).params();
            for (auto& p : params) p = random_tensor(p.shape, rng, 10.0);
            const GnnGenome genome(a, params);
            const auto g = random_graph(16, 8, rng);
            for (double v : gnn_infer(genome, g).data) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("permutation equivariance") {
    Rng rng(6);
    for (auto kind : {GraphLayer::gcn, GraphLayer::graph_unet}) {
        Architecture a;
        a.kind = kind;
        a.in_features = 5;
        for (int t = 0; t < 20; ++t) {
            const auto g = random_graph(3 + rng() % 9, 5, rng);
            const auto genome = GnnGenome::random(a, rng);
            std::vector<std::size_t> perm(g.nodes);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            WorkloadGraph h = g;
            for (std::size_t i = 0; i < g.nodes; ++i) {
                std::copy_n(g.features.begin() + i * 5, 5, h.features.begin() + perm[i] * 5);
            }
            for (auto& [x, y] : h.edges) {
                x = perm[x];
                y = perm[y];
            }
            const auto base = gnn_infer(genome, g);
            const auto moved = gnn_infer(genome, h);
            for (std::size_t i = 0; i < g.nodes; ++i) {
                for (std::size_t c = 0; c < 7; ++c) {
                    CHECK(moved.at(perm[i], c) == doctest::Approx(base.at(i, c)).epsilon(1e-9));
                }
            }
        }
    }
}

TEST_CASE("genome json round trip is exact") {
    Rng rng(7);
    for (auto kind : {GraphLayer::gcn, GraphLayer::graph_unet}) {
        Architecture a;
        a.kind = kind;
        a.in_features = 8;
        a.outputs = 3;
        const auto g = GnnGenome::random(a, rng);
        const auto back = genome_from_json(nlohmann::json::parse(to_json(g).dump()));
        CHECK(back == g);
    }
    CHECK_THROWS(genome_from_json(nlohmann::json{{"format", "other"}}));
}

}
