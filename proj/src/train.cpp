#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nemo/workload.hpp"

namespace nemo::workload {

Architecture architecture(const std::string& name) {
    if (name == "tiny") return {"tiny", {8, 16, 4}};
    if (name == "small") return {"small", {8, 32, 32, 32, 32, 32, 32, 32, 4}};
    throw ConfigError("unknown architecture '" + name + "' (expected tiny or small)");
}

namespace {

struct Net {
    std::vector<std::size_t> dims;
    std::vector<std::vector<double>> w;  // out x in
    std::vector<std::vector<double>> b;

    [[nodiscard]] std::size_t depth() const { return w.size(); }
};

Net init_net(const std::vector<std::size_t>& dims, Rng& rng) {
    Net net;
    net.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(dims[l])));
        std::vector<double> w(dims[l] * dims[l + 1]);
        for (auto& v : w) v = he(rng);
        net.w.push_back(std::move(w));
        net.b.emplace_back(dims[l + 1], 0.0);
    }
    return net;
}

// One SGD step on rows `idx` of the training set.
void sgd_step(Net& net, const Dataset& data, std::span<const std::size_t> idx, double lr) {
    const std::size_t depth = net.depth();
    std::vector<std::vector<double>> gw(depth), gb(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        gw[l].assign(net.w[l].size(), 0.0);
        gb[l].assign(net.b[l].size(), 0.0);
    }
    std::vector<std::vector<double>> acts(depth + 1);
    for (auto s : idx) {
        const auto x = data.row(s);
        acts[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l < depth; ++l) {
            const auto in = net.dims[l];
            const auto out = net.dims[l + 1];
            acts[l + 1].assign(out, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                double acc = net.b[l][o];
                for (std::size_t i = 0; i < in; ++i) acc += net.w[l][o * in + i] * acts[l][i];
                acts[l + 1][o] = (l + 1 < depth) ? std::max(acc, 0.0) : acc;
            }
        }
        // softmax cross-entropy gradient
        auto& logits = acts[depth];
        const double top = *std::max_element(logits.begin(), logits.end());
        std::vector<double> delta(logits.size());
        double z = 0.0;
        for (std::size_t c = 0; c < logits.size(); ++c) z += delta[c] = std::exp(logits[c] - top);
        for (auto& d : delta) d /= z;
        delta[static_cast<std::size_t>(data.labels[s])] -= 1.0;

        for (std::size_t l = depth; l-- > 0;) {
            const auto in = net.dims[l];
            const auto out = net.dims[l + 1];
            std::vector<double> prev(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                gb[l][o] += delta[o];
                for (std::size_t i = 0; i < in; ++i) {
                    gw[l][o * in + i] += delta[o] * acts[l][i];
                    prev[i] += net.w[l][o * in + i] * delta[o];
                }
            }
            if (l > 0) {
                for (std::size_t i = 0; i < in; ++i) {
                    if (acts[l][i] <= 0.0) prev[i] = 0.0;
                }
            }
            delta.swap(prev);
        }
    }
    const double step = lr / static_cast<double>(idx.size());
    for (std::size_t l = 0; l < depth; ++l) {
        for (std::size_t i = 0; i < net.w[l].size(); ++i) net.w[l][i] -= step * gw[l][i];
        for (std::size_t i = 0; i < net.b[l].size(); ++i) net.b[l][i] -= step * gb[l][i];
    }
}

Workload freeze(const Net& net, const std::string& name) {
    std::vector<Layer> layers;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        Layer layer;
        layer.in_dim = net.dims[l];
        layer.out_dim = net.dims[l + 1];
        layer.weights = net.w[l];
        layer.bias = net.b[l];
        layer.group_id = l == 0 ? 0 : (l + 1 == net.depth() ? 2 : 1);
        layers.push_back(std::move(layer));
    }
    return Workload(std::move(layers), name);
}

nlohmann::json blob_spec_json(const BlobSpec& s) {
    return {{"features", s.features},
            {"classes", s.classes},
            {"center_radius", s.center_radius},
            {"noise", s.noise},
            {"train_per_class", s.train_per_class},
            {"calibration_per_class", s.calibration_per_class},
            {"evaluation_per_class", s.evaluation_per_class},
            {"validation_per_class", s.validation_per_class}};
}

}  // namespace

Workload train_reference(const Architecture& arch, const DatasetSplits& data,
                         const TrainOptions& options, Rng& rng) {
    require(data.train.size() > 0, "train_reference: empty training split");
    require(arch.dims.size() >= 2, "train_reference: architecture needs at least one layer");
    require(arch.dims.front() == data.train.features, "train_reference: input width mismatch");
    require(arch.dims.back() == data.train.classes, "train_reference: class count mismatch");

    Net net = init_net(arch.dims, rng);
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
            const auto count = std::min(options.batch_size, order.size() - begin);
            sgd_step(net, data.train, std::span<const std::size_t>(order).subspan(begin, count),
                     options.learning_rate);
        }
    }

    Workload workload = freeze(net, arch.name);
    const auto scores = full_precision_forward(workload, data.validation);
    const double acc = top_k_accuracy(scores, data.validation.labels, data.validation.classes, 1);
    if (!(acc >= options.required_accuracy)) {
        std::ostringstream msg;
        msg << "reference training for '" << arch.name << "' reached validation accuracy " << acc
            << " after " << options.epochs << " epochs (lr " << options.learning_rate
            << ", batch " << options.batch_size << "); required " << options.required_accuracy;
        throw TrainingError(msg.str());
    }
    workload.metadata()["arch"] = arch.name;
    workload.metadata()["validation_accuracy"] = acc;
    workload.metadata()["epochs"] = options.epochs;
    return workload;
}

Workload bundled_workload(const std::string& arch_name, std::uint64_t seed) {
    const BlobSpec spec;
    const auto data = make_blobs(spec, seed);
    Rng rng(seed ^ 0x5eedf00dULL);
    Workload w = train_reference(architecture(arch_name), data, TrainOptions{}, rng);
    w.set_ranges(calibrate(w, data.calibration));
    w.metadata()["dataset_seed"] = seed;
    w.metadata()["blob_spec"] = blob_spec_json(spec);
    w.metadata()["calibration"] = {{"batches", 8}, {"batch_size", 32}};
    return w;
}

DatasetSplits dataset_for(const Workload& workload) {
    const auto& meta = workload.metadata();
    if (!meta.contains("dataset_seed")) {
        throw ConfigError("workload metadata has no dataset_seed; cannot regenerate its data");
    }
    BlobSpec spec;
    if (meta.contains("blob_spec")) {
        const auto& s = meta.at("blob_spec");
        spec.features = s.value("features", spec.features);
        spec.classes = s.value("classes", spec.classes);
        spec.center_radius = s.value("center_radius", spec.center_radius);
        spec.noise = s.value("noise", spec.noise);
        spec.train_per_class = s.value("train_per_class", spec.train_per_class);
        spec.calibration_per_class = s.value("calibration_per_class", spec.calibration_per_class);
        spec.evaluation_per_class = s.value("evaluation_per_class", spec.evaluation_per_class);
        spec.validation_per_class = s.value("validation_per_class", spec.validation_per_class);
    }
    return make_blobs(spec, meta.at("dataset_seed").get<std::uint64_t>());
}

}  // namespace nemo::workload
