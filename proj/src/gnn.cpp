#include "nemo/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace nemo::gnn {

namespace {

constexpr double kLeakySlope = 0.2;

Tensor features_of(const WorkloadGraph& g) {
    return Tensor({g.nodes, g.feature_width}, g.features);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    require(data.size() == shape_numel(shape), "tensor data does not match shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_) {
    const auto n = shape_numel(shape_);
    return Tensor(std::move(shape_), std::vector<double>(n, 0.0));
}

std::size_t shape_numel(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape.size() == 2 && b.shape.size() == 2, "matmul: expects 2-d tensors");
    require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
    Tensor out = Tensor::zeros({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double v = a.at(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += v * b.at(k, j);
        }
    }
    return out;
}

Tensor add_bias(Tensor x, const Tensor& bias) {
    if (bias.numel() == 0) return x;
    require(bias.numel() == x.cols(), "bias width mismatch");
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) += bias.data[j];
    }
    return x;
}

double selu(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

Tensor selu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data) v = selu(v);
    return out;
}

std::vector<std::vector<std::size_t>> neighbours(std::size_t nodes, const Edges& edges) {
    std::vector<std::set<std::size_t>> sets(nodes);
    for (const auto& [a, b] : edges) {
        require(a < nodes && b < nodes, "edge endpoint out of range");
        if (a == b) continue;
        sets[a].insert(b);
        sets[b].insert(a);
    }
    std::vector<std::vector<std::size_t>> out(nodes);
    for (std::size_t i = 0; i < nodes; ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

Tensor gcn_forward(const Tensor& features, const Edges& edges, const Tensor& weight,
                   const Tensor& bias) {
    require(features.shape.size() == 2 && weight.shape.size() == 2, "gcn: expects 2-d tensors");
    require(features.cols() == weight.rows(), "gcn: feature width does not match weight input");
    const std::size_t n = features.rows();
    const auto nbrs = neighbours(n, edges);
    const Tensor hw = matmul(features, weight);

    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(nbrs[i].size() + 1));
    }
    Tensor out = Tensor::zeros({n, weight.cols()});
    for (std::size_t i = 0; i < n; ++i) {
        const double self = inv_sqrt_deg[i] * inv_sqrt_deg[i];
        for (std::size_t c = 0; c < hw.cols(); ++c) out.at(i, c) += self * hw.at(i, c);
        for (auto j : nbrs[i]) {
            const double coef = inv_sqrt_deg[i] * inv_sqrt_deg[j];
            for (std::size_t c = 0; c < hw.cols(); ++c) out.at(i, c) += coef * hw.at(j, c);
        }
    }
    return add_bias(std::move(out), bias);
}

AttentionOutput gat_forward_detailed(const Tensor& features, const Edges& edges,
                                     std::span<const AttentionHead> heads) {
    require(!heads.empty(), "gat: at least one head required");
    const std::size_t n = features.rows();
    const std::size_t out_dim = heads.front().weight.cols();
    for (const auto& h : heads) {
        require(h.weight.shape.size() == 2 && h.weight.rows() == features.cols(),
                "gat: head weight does not match feature width");
        require(h.weight.cols() == out_dim, "gat: heads must share output width");
        require(h.attention.numel() == 2 * out_dim, "gat: attention vector must be 2*out");
    }
    const auto nbrs = neighbours(n, edges);

    AttentionOutput result;
    result.features = Tensor::zeros({n, out_dim});
    result.attention.resize(heads.size());
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const Tensor wh = matmul(features, heads[h].weight);
        const auto& a = heads[h].attention.data;
        std::vector<double> src(n, 0.0), dst(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < out_dim; ++c) {
                src[i] += a[c] * wh.at(i, c);
                dst[i] += a[out_dim + c] * wh.at(i, c);
            }
        }
        auto& att = result.attention[h];
        att.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> hood{i};
            hood.insert(hood.end(), nbrs[i].begin(), nbrs[i].end());
            std::vector<double> logits(hood.size());
            for (std::size_t t = 0; t < hood.size(); ++t) {
                const double e = src[i] + dst[hood[t]];
                logits[t] = e > 0.0 ? e : kLeakySlope * e;
            }
            const double top = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (auto& l : logits) z += l = std::exp(l - top);
            for (auto& l : logits) l /= z;
            for (std::size_t t = 0; t < hood.size(); ++t) {
                for (std::size_t c = 0; c < out_dim; ++c) {
                    result.features.at(i, c) += logits[t] * wh.at(hood[t], c);
                }
            }
            att[i] = std::move(logits);
        }
    }
    const double inv = 1.0 / static_cast<double>(heads.size());
    for (auto& v : result.features.data) v *= inv;
    return result;
}

Tensor gat_forward(const Tensor& features, const Edges& edges, std::span<const AttentionHead> heads) {
    return gat_forward_detailed(features, edges, heads).features;
}

PoolResult top_k_pool(const Tensor& features, const Edges& edges, const Tensor& projection,
                      double ratio) {
    require(projection.numel() == features.cols(), "pool: projection width mismatch");
    require(ratio > 0.0 && ratio <= 1.0, "pool: ratio must be in (0, 1]");
    const std::size_t n = features.rows();
    require(n >= 1, "pool: empty graph");

    double norm = 0.0;
    for (double p : projection.data) norm += p * p;
    norm = std::sqrt(norm);
    std::vector<double> score(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < features.cols(); ++c) s += features.at(i, c) * projection.data[c];
        score[i] = norm > 0.0 ? s / norm : 0.0;
    }
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9)), 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    PoolResult out;
    out.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(out.kept.begin(), out.kept.end());

    out.features = Tensor::zeros({keep, features.cols()});
    for (std::size_t r = 0; r < keep; ++r) {
        const auto src = out.kept[r];
        const double gate = sigmoid(score[src]);
        for (std::size_t c = 0; c < features.cols(); ++c) out.features.at(r, c) = features.at(src, c) * gate;
    }

    // connectivity of A + A^2 restricted to the kept nodes
    const auto nbrs = neighbours(n, edges);
    std::vector<std::size_t> slot(n, n);
    for (std::size_t r = 0; r < keep; ++r) slot[out.kept[r]] = r;
    std::set<std::pair<std::size_t, std::size_t>> linked;
    auto link = [&](std::size_t a, std::size_t b) {
        if (a == b || slot[a] == n || slot[b] == n) return;
        linked.emplace(std::min(slot[a], slot[b]), std::max(slot[a], slot[b]));
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (auto j : nbrs[i]) {
            link(i, j);
            for (auto k : nbrs[j]) link(i, k);
        }
    }
    out.edges.assign(linked.begin(), linked.end());
    return out;
}

Tensor unpool(const Tensor& pooled, std::span<const std::size_t> kept, std::size_t nodes) {
    require(pooled.rows() == kept.size(), "unpool: row count does not match kept indices");
    Tensor out = Tensor::zeros({nodes, pooled.cols()});
    for (std::size_t r = 0; r < kept.size(); ++r) {
        require(kept[r] < nodes, "unpool: index out of range");
        for (std::size_t c = 0; c < pooled.cols(); ++c) out.at(kept[r], c) = pooled.at(r, c);
    }
    return out;
}

Tensor graph_unet_forward(const Tensor& features, const Edges& edges, const UnetParams& params,
                          std::size_t depth, double pool_ratio) {
    require(depth >= 1, "graph_unet: depth must be >= 1");
    require(params.pool_projection.size() == depth && params.down_weight.size() == depth &&
                params.up_weight.size() == depth,
            "graph_unet: parameter count does not match depth");

    struct Level {
        Tensor skip;
        Edges edges;
        std::vector<std::size_t> kept;
    };
    std::vector<Level> levels;
    levels.reserve(depth);

    Tensor h = selu(gcn_forward(features, edges, params.in_weight, params.in_bias));
    Edges current = edges;
    for (std::size_t d = 0; d < depth; ++d) {
        auto pooled = top_k_pool(h, current, params.pool_projection[d], pool_ratio);
        levels.push_back({h, current, pooled.kept});
        current = std::move(pooled.edges);
        h = selu(gcn_forward(pooled.features, current, params.down_weight[d], params.down_bias[d]));
    }
    for (std::size_t d = depth; d-- > 0;) {
        const auto& level = levels[d];
        Tensor up = unpool(h, level.kept, level.skip.rows());
        for (std::size_t i = 0; i < up.numel(); ++i) up.data[i] += level.skip.data[i];
        h = gcn_forward(up, level.edges, params.up_weight[d], params.up_bias[d]);
        if (d > 0) h = selu(h);
    }
    return h;
}

// ---------------------------------------------------------------------------

std::string to_string(GraphLayer kind) { return kind == GraphLayer::gcn ? "gcn" : "graph_unet"; }

GraphLayer graph_layer_from_string(const std::string& name) {
    if (name == "gcn") return GraphLayer::gcn;
    if (name == "graph_unet") return GraphLayer::graph_unet;
    throw ConfigError("unknown graph layer kind '" + name + "'");
}

std::vector<ParamSpec> parameter_specs(const Architecture& a) {
    require(a.in_features > 0 && a.graph_hidden > 0 && a.attention_hidden > 0 && a.outputs > 0,
            "gnn architecture: sizes must be positive");
    require(a.heads >= 1, "gnn architecture: at least one attention head");
    std::vector<ParamSpec> specs;
    const auto g = a.graph_hidden;
    if (a.kind == GraphLayer::gcn) {
        specs.push_back({"graph.weight", {a.in_features, g}, a.in_features});
        specs.push_back({"graph.bias", {g}, a.in_features});
    } else {
        require(a.unet_depth >= 1, "gnn architecture: unet depth must be >= 1");
        require(a.pool_ratio > 0.0 && a.pool_ratio <= 1.0, "gnn architecture: pool ratio in (0, 1]");
        specs.push_back({"unet.in.weight", {a.in_features, g}, a.in_features});
        specs.push_back({"unet.in.bias", {g}, a.in_features});
        for (std::size_t d = 0; d < a.unet_depth; ++d) {
            const auto p = "unet.down" + std::to_string(d);
            specs.push_back({p + ".projection", {g}, g});
            specs.push_back({p + ".weight", {g, g}, g});
            specs.push_back({p + ".bias", {g}, g});
        }
        for (std::size_t d = 0; d < a.unet_depth; ++d) {
            const auto p = "unet.up" + std::to_string(d);
            specs.push_back({p + ".weight", {g, g}, g});
            specs.push_back({p + ".bias", {g}, g});
        }
    }
    for (std::size_t h = 0; h < a.heads; ++h) {
        const auto p = "attention.head" + std::to_string(h);
        specs.push_back({p + ".weight", {g, a.attention_hidden}, g});
        specs.push_back({p + ".vector", {2 * a.attention_hidden}, 2 * a.attention_hidden});
    }
    specs.push_back({"linear.weight", {a.attention_hidden, a.outputs}, a.attention_hidden});
    specs.push_back({"linear.bias", {a.outputs}, a.attention_hidden});
    return specs;
}

GnnGenome::GnnGenome(Architecture arch, std::vector<Tensor> params)
    : arch_(arch), params_(std::move(params)) {
    const auto specs = parameter_specs(arch_);
    require(specs.size() == params_.size(),
            "gnn genome: expected " + std::to_string(specs.size()) + " tensors, got " +
                std::to_string(params_.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        require(params_[i].shape == specs[i].shape, "gnn genome: bad shape for " + specs[i].name);
        require(params_[i].data.size() == shape_numel(specs[i].shape),
                "gnn genome: bad data size for " + specs[i].name);
    }
}

GnnGenome GnnGenome::zeros(const Architecture& arch) {
    std::vector<Tensor> params;
    for (const auto& s : parameter_specs(arch)) params.push_back(Tensor::zeros(s.shape));
    return GnnGenome(arch, std::move(params));
}

GnnGenome GnnGenome::random(const Architecture& arch, Rng& rng) {
    std::vector<Tensor> params;
    for (const auto& s : parameter_specs(arch)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor t = Tensor::zeros(s.shape);
        for (auto& v : t.data) v = u(rng);
        params.push_back(std::move(t));
    }
    return GnnGenome(arch, std::move(params));
}

Tensor gnn_infer(const GnnGenome& genome, const WorkloadGraph& graph) {
    const auto& a = genome.arch();
    require(graph.feature_width == a.in_features, "gnn_infer: graph feature width mismatch");
    const auto& p = genome.params();
    const Tensor x = features_of(graph);
    const Edges& edges = graph.edges;

    std::size_t next = 0;
    Tensor h;
    if (a.kind == GraphLayer::gcn) {
        h = gcn_forward(x, edges, p[0], p[1]);
        next = 2;
    } else {
        UnetParams up;
        up.in_weight = p[0];
        up.in_bias = p[1];
        next = 2;
        for (std::size_t d = 0; d < a.unet_depth; ++d) {
            up.pool_projection.push_back(p[next++]);
            up.down_weight.push_back(p[next++]);
            up.down_bias.push_back(p[next++]);
        }
        for (std::size_t d = 0; d < a.unet_depth; ++d) {
            up.up_weight.push_back(p[next++]);
            up.up_bias.push_back(p[next++]);
        }
        h = graph_unet_forward(x, edges, up, a.unet_depth, a.pool_ratio);
    }
    h = selu(h);

    std::vector<AttentionHead> heads;
    for (std::size_t i = 0; i < a.heads; ++i) {
        heads.push_back({p[next], p[next + 1]});
        next += 2;
    }
    h = selu(gat_forward(h, edges, heads));
    h = add_bias(matmul(h, p[next]), p[next + 1]);
    return selu(h);
}

nlohmann::json to_json(const GnnGenome& genome) {
    const auto& a = genome.arch();
    nlohmann::json params = nlohmann::json::array();
    const auto specs = genome.specs();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        params.push_back({{"name", specs[i].name},
                          {"shape", genome.params()[i].shape},
                          {"data", genome.params()[i].data}});
    }
    return {{"format", "nemo-gnn-genome"},
            {"version", 1},
            {"arch",
             {{"kind", to_string(a.kind)},
              {"in_features", a.in_features},
              {"graph_hidden", a.graph_hidden},
              {"attention_hidden", a.attention_hidden},
              {"heads", a.heads},
              {"unet_depth", a.unet_depth},
              {"pool_ratio", a.pool_ratio},
              {"outputs", a.outputs}}},
            {"params", std::move(params)}};
}

GnnGenome genome_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", "") != "nemo-gnn-genome" || j.value("version", 0) != 1) {
            throw ConfigError("gnn genome: unsupported format or version");
        }
        const auto& ja = j.at("arch");
        Architecture a;
        a.kind = graph_layer_from_string(ja.at("kind").get<std::string>());
        a.in_features = ja.at("in_features").get<std::size_t>();
        a.graph_hidden = ja.at("graph_hidden").get<std::size_t>();
        a.attention_hidden = ja.at("attention_hidden").get<std::size_t>();
        a.heads = ja.at("heads").get<std::size_t>();
        a.unet_depth = ja.at("unet_depth").get<std::size_t>();
        a.pool_ratio = ja.at("pool_ratio").get<double>();
        a.outputs = ja.at("outputs").get<std::size_t>();
        const auto specs = parameter_specs(a);
        std::vector<Tensor> params;
        for (const auto& jp : j.at("params")) {
            const auto name = jp.at("name").get<std::string>();
            if (params.size() >= specs.size() || specs[params.size()].name != name) {
                throw ConfigError("gnn genome: unexpected tensor '" + name + "'");
            }
            params.emplace_back(jp.at("shape").get<std::vector<std::size_t>>(),
                                jp.at("data").get<std::vector<double>>());
        }
        return GnnGenome(a, std::move(params));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("gnn genome: ") + e.what());
    } catch (const ContractError& e) {
        throw ConfigError(std::string("gnn genome: ") + e.what());
    }
}

}  // namespace nemo::gnn
