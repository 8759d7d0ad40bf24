#pragma once

// Forward-only graph neural networks used as genomes by the neuroevolution
// species: dense tensors, GCN convolution, multi-head graph attention and a
// Graph U-Net with top-k pooling.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nemo/common.hpp"
#include "nemo/graph.hpp"

namespace nemo::gnn {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

/// Row-major dense tensor.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);
    static Tensor zeros(std::vector<std::size_t> shape_);

    [[nodiscard]] std::size_t numel() const noexcept { return data.size(); }
    [[nodiscard]] std::size_t rows() const { return shape.at(0); }
    [[nodiscard]] std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_numel(std::span<const std::size_t> shape);

/// (n x k) * (k x m).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Adds a length-m bias to every row of an (n x m) tensor.
Tensor add_bias(Tensor x, const Tensor& bias);

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

double selu(double x);
Tensor selu(const Tensor& x);

/// Undirected neighbour lists (deduplicated, no self entries).
std::vector<std::vector<std::size_t>> neighbours(std::size_t nodes, const Edges& edges);

/// D^-1/2 (A + I) D^-1/2 H W (+ bias) over the undirected closure of `edges`.
Tensor gcn_forward(const Tensor& features, const Edges& edges, const Tensor& weight,
                   const Tensor& bias = {});

struct AttentionHead {
    Tensor weight;     // in x out
    Tensor attention;  // 2*out
};

struct AttentionOutput {
    Tensor features;
    /// attention[h][i] holds node i's weights over (self, neighbours...) in the
    /// order of `neighbours()` with self first.
    std::vector<std::vector<std::vector<double>>> attention;
};

/// Multi-head graph attention; head outputs are averaged.
AttentionOutput gat_forward_detailed(const Tensor& features, const Edges& edges,
                                     std::span<const AttentionHead> heads);
Tensor gat_forward(const Tensor& features, const Edges& edges, std::span<const AttentionHead> heads);

struct PoolResult {
    Tensor features;                // kept rows gated by sigmoid(score)
    std::vector<std::size_t> kept;  // ascending original indices
    Edges edges;                    // induced on kept nodes over A + A^2
};

/// Keeps ceil(ratio * n) (at least one) nodes with the largest projection
/// score x.p/|p|; ties go to the lower index.
PoolResult top_k_pool(const Tensor& features, const Edges& edges, const Tensor& projection,
                      double ratio);

/// Scatters rows back to their original positions; dropped rows are zero.
Tensor unpool(const Tensor& pooled, std::span<const std::size_t> kept, std::size_t nodes);

struct UnetParams {
    Tensor in_weight, in_bias;
    std::vector<Tensor> pool_projection;
    std::vector<Tensor> down_weight, down_bias;
    std::vector<Tensor> up_weight, up_bias;
};

Tensor graph_unet_forward(const Tensor& features, const Edges& edges, const UnetParams& params,
                          std::size_t depth, double pool_ratio);

// ---------------------------------------------------------------------------
// Genome

enum class GraphLayer { gcn, graph_unet };

std::string to_string(GraphLayer kind);
GraphLayer graph_layer_from_string(const std::string& name);

struct Architecture {
    GraphLayer kind = GraphLayer::gcn;
    std::size_t in_features = 0;
    std::size_t graph_hidden = 10;
    std::size_t attention_hidden = 8;
    std::size_t heads = 4;
    std::size_t unet_depth = 3;
    double pool_ratio = 0.5;
    std::size_t outputs = 7;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in;
};

/// Canonical, stable parameter list for an architecture.
std::vector<ParamSpec> parameter_specs(const Architecture& arch);

/// Architecture plus its parameter tensors in canonical order. Shapes are
/// checked on construction so inference never sees an inconsistent genome.
class GnnGenome {
public:
    GnnGenome(Architecture arch, std::vector<Tensor> params);

    static GnnGenome zeros(const Architecture& arch);
    /// Uniform in +-1/sqrt(fan_in) per tensor.
    static GnnGenome random(const Architecture& arch, Rng& rng);

    [[nodiscard]] const Architecture& arch() const noexcept { return arch_; }
    [[nodiscard]] const std::vector<Tensor>& params() const noexcept { return params_; }
    [[nodiscard]] std::vector<ParamSpec> specs() const { return parameter_specs(arch_); }

    friend bool operator==(const GnnGenome&, const GnnGenome&) = default;

private:
    Architecture arch_;
    std::vector<Tensor> params_;
};

/// Graph layer, SELU, graph attention, SELU, linear, SELU. Returns one logit
/// row per node.
Tensor gnn_infer(const GnnGenome& genome, const WorkloadGraph& graph);

nlohmann::json to_json(const GnnGenome& genome);
GnnGenome genome_from_json(const nlohmann::json& j);

}  // namespace nemo::gnn
