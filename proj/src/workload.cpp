#include <algorithm>
#include <cmath>
#include <limits>

#include "nemo/workload.hpp"

namespace nemo::workload {

namespace {

constexpr double kDegenerateWiden = 1e-6;

void check_config(const Workload& w, const BitConfig& config) {
    require(config.size() == w.quantizer_count(),
            "bit config length " + std::to_string(config.size()) + " does not match " +
                std::to_string(w.quantizer_count()) + " quantizers");
    for (int b : config.bits) require(b >= 2 && b <= 32, "bit width out of range [2, 32]");
}

Range widen(double lo, double hi) {
    if (!(lo < hi)) {
        const double mid = 0.5 * (lo + hi);
        return {mid - kDegenerateWiden, mid + kDegenerateWiden};
    }
    return {lo, hi};
}

// Dense forward over a batch. `weights_for(l)` supplies the weight matrix
// actually used; `transform_input(l, x)` may rewrite each layer input in place.
template <class WeightsFor, class InputHook>
std::vector<double> forward(const Workload& w, const Dataset& batch, WeightsFor&& weights_for,
                            InputHook&& input_hook) {
    require(batch.features == w.input_dim(), "batch feature width does not match workload");
    const auto& layers = w.layers();
    const std::size_t n = batch.size();
    std::vector<double> act(batch.inputs.begin(), batch.inputs.begin() +
                                                      static_cast<std::ptrdiff_t>(n * batch.features));
    std::vector<double> next;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        input_hook(l, act);
        const std::vector<double>& wm = weights_for(l);
        next.assign(n * layer.out_dim, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            const double* x = act.data() + s * layer.in_dim;
            double* y = next.data() + s * layer.out_dim;
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                const double* row = wm.data() + o * layer.in_dim;
                double acc = layer.bias[o];
                for (std::size_t i = 0; i < layer.in_dim; ++i) acc += row[i] * x[i];
                y[o] = (l + 1 < layers.size()) ? std::max(acc, 0.0) : acc;
            }
        }
        act.swap(next);
    }
    return act;
}

}  // namespace

std::size_t QuantizerNode::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Workload::Workload(std::vector<Layer> layers, std::string name)
    : name_(std::move(name)), layers_(std::move(layers)) {
    require(!layers_.empty(), "workload needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        require(layer.in_dim > 0 && layer.out_dim > 0, "layer dimensions must be positive");
        require(layer.weights.size() == layer.in_dim * layer.out_dim, "layer weight size mismatch");
        require(layer.bias.size() == layer.out_dim, "layer bias size mismatch");
        require(layer.group_id >= 0 && static_cast<std::size_t>(layer.group_id) < kGroupCount,
                "layer group id out of range");
        require(std::find(kOpTypes.begin(), kOpTypes.end(), layer.op_type) != kOpTypes.end(),
                "unknown op type '" + layer.op_type + "'");
        if (l > 0) require(layers_[l - 1].out_dim == layer.in_dim, "layer chain dimension mismatch");
    }
}

std::vector<QuantizerNode> Workload::quantizer_nodes() const {
    std::vector<QuantizerNode> nodes;
    nodes.reserve(quantizer_count());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        nodes.push_back({l, true, {layers_[l].out_dim, layers_[l].in_dim}});
        nodes.push_back({l, false, {layers_[l].in_dim}});
    }
    return nodes;
}

void Workload::set_ranges(std::vector<Range> ranges) {
    require(ranges.size() == quantizer_count(), "calibration range count mismatch");
    for (const auto& r : ranges) require(r.lo < r.hi, "calibration range must satisfy lo < hi");
    ranges_ = std::move(ranges);
}

std::vector<Range> calibrate(const Workload& workload, const Dataset& calibration,
                             std::size_t n_batches, std::size_t batch_size) {
    require(calibration.size() > 0, "calibrate: empty calibration data");
    require(n_batches >= 1 && batch_size >= 1, "calibrate: need at least one batch");

    const auto& layers = workload.layers();
    std::vector<Range> ranges(workload.quantizer_count());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto [lo, hi] = std::minmax_element(layers[l].weights.begin(), layers[l].weights.end());
        ranges[2 * l] = widen(*lo, *hi);
    }

    std::vector<double> min_sum(layers.size(), 0.0);
    std::vector<double> max_sum(layers.size(), 0.0);
    std::size_t used = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t begin = b * batch_size;
        if (begin >= calibration.size()) break;
        const auto batch = calibration.slice(begin, std::min(batch_size, calibration.size() - begin));
        forward(
            workload, batch, [&](std::size_t l) -> const std::vector<double>& { return layers[l].weights; },
            [&](std::size_t l, const std::vector<double>& x) {
                const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
                min_sum[l] += *lo;
                max_sum[l] += *hi;
            });
        ++used;
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        ranges[2 * l + 1] = widen(min_sum[l] / static_cast<double>(used),
                                  max_sum[l] / static_cast<double>(used));
    }
    return ranges;
}

std::vector<double> full_precision_forward(const Workload& workload, const Dataset& batch) {
    const auto& layers = workload.layers();
    return forward(
        workload, batch, [&](std::size_t l) -> const std::vector<double>& { return layers[l].weights; },
        [](std::size_t, std::vector<double>&) {});
}

std::vector<double> quantized_forward(const Workload& workload, const BitConfig& config,
                                      const Dataset& batch) {
    if (!workload.calibrated()) throw std::logic_error("quantized_forward: workload is not calibrated");
    check_config(workload, config);
    const auto& layers = workload.layers();
    const auto& ranges = workload.ranges();

    std::vector<std::vector<double>> qweights(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto q = make_quantizer(config[2 * l], ranges[2 * l].lo, ranges[2 * l].hi);
        qweights[l].reserve(layers[l].weights.size());
        for (double v : layers[l].weights) qweights[l].push_back(quantize_dequantize(q, v).value);
    }
    return forward(
        workload, batch, [&](std::size_t l) -> const std::vector<double>& { return qweights[l]; },
        [&](std::size_t l, std::vector<double>& x) {
            const auto q = make_quantizer(config[2 * l + 1], ranges[2 * l + 1].lo, ranges[2 * l + 1].hi);
            for (auto& v : x) v = quantize_dequantize(q, v).value;
        });
}

double top_k_accuracy(std::span<const double> scores, std::span<const int> labels,
                      std::size_t classes, std::size_t k) {
    require(classes > 0 && scores.size() == labels.size() * classes, "top_k_accuracy: shape mismatch");
    require(k >= 1, "top_k_accuracy: k must be >= 1");
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        const double* row = scores.data() + s * classes;
        const auto y = static_cast<std::size_t>(labels[s]);
        std::size_t ahead = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++ahead;
        }
        if (ahead < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double model_ratio(const Workload& workload, const BitConfig& config) {
    check_config(workload, config);
    std::uint64_t bits = 0;
    std::uint64_t params = 0;
    const auto& layers = workload.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        bits += layers[l].params() * static_cast<std::uint64_t>(config[2 * l]);
        params += layers[l].params();
    }
    return static_cast<double>(bits) / (32.0 * static_cast<double>(params));
}

double bitops_ratio(const Workload& workload, const BitConfig& config) {
    check_config(workload, config);
    std::uint64_t bops = 0;
    std::uint64_t full = 0;
    const auto& layers = workload.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto m = static_cast<std::uint64_t>(layers[l].macs());
        bops += m * static_cast<std::uint64_t>(config[2 * l]) * static_cast<std::uint64_t>(config[2 * l + 1]);
        full += m * 32u * 32u;
    }
    return static_cast<double>(bops) / static_cast<double>(full);
}

Metrics evaluate_metrics(const Workload& workload, const BitConfig& config, const Dataset& split,
                         std::size_t top_k) {
    const auto scores = quantized_forward(workload, config, split);
    Metrics m;
    m.top1 = top_k_accuracy(scores, split.labels, workload.output_dim(), 1);
    m.topk = top_k == 1 ? m.top1 : top_k_accuracy(scores, split.labels, workload.output_dim(), top_k);
    m.model_ratio = model_ratio(workload, config);
    m.bitops_ratio = bitops_ratio(workload, config);
    return m;
}

ObjectiveVector evaluate_objectives(const Workload& workload, const BitConfig& config,
                                    const Dataset& split, std::size_t top_k) {
    const auto m = evaluate_metrics(workload, config, split, top_k);
    return {1.0 - m.topk, m.model_ratio, m.bitops_ratio};
}

WorkloadGraph build_graph(const Workload& workload) {
    const auto nodes = workload.quantizer_nodes();
    WorkloadGraph g;
    g.nodes = nodes.size();
    g.feature_width = node_feature_width();
    g.features.assign(g.nodes * g.feature_width, 0.0);
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        const auto& layer = workload.layers()[nodes[n].layer];
        double* row = g.features.data() + n * g.feature_width;
        const auto op = static_cast<std::size_t>(
            std::find(kOpTypes.begin(), kOpTypes.end(), layer.op_type) - kOpTypes.begin());
        row[op] = 1.0;
        std::size_t col = kOpTypes.size();
        row[col++] = nodes[n].is_weight ? 1.0 : 0.0;
        row[col++] = static_cast<double>(nodes[n].shape.size());
        row[col++] = std::log1p(static_cast<double>(nodes[n].numel()));
        row[col + static_cast<std::size_t>(layer.group_id)] = 1.0;
    }
    for (std::size_t n = 0; n + 1 < g.nodes; ++n) g.edges.emplace_back(n, n + 1);
    return g;
}

}  // namespace nemo::workload
