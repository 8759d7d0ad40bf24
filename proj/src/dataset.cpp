#include <algorithm>
#include <cmath>
#include <numeric>

#include "nemo/workload.hpp"

namespace nemo::workload {

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
    require(begin + count <= size(), "dataset slice out of range");
    Dataset out;
    out.features = features;
    out.classes = classes;
    out.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(begin * features),
                      inputs.begin() + static_cast<std::ptrdiff_t>((begin + count) * features));
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
}

namespace {

Dataset draw_split(const std::vector<std::vector<double>>& centers, const BlobSpec& spec,
                   std::size_t per_class, Rng& rng) {
    std::normal_distribution<double> noise(0.0, spec.noise);
    const std::size_t n = per_class * spec.classes;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    Dataset d;
    d.features = spec.features;
    d.classes = spec.classes;
    d.inputs.resize(n * spec.features);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cls = order[i] % spec.classes;
        d.labels[i] = static_cast<int>(cls);
        for (std::size_t f = 0; f < spec.features; ++f) {
            d.inputs[i * spec.features + f] = centers[cls][f] + noise(rng);
        }
    }
    return d;
}

}  // namespace

DatasetSplits make_blobs(const BlobSpec& spec, std::uint64_t seed) {
    require(spec.features > 0 && spec.classes >= 2, "make_blobs: bad shape");
    Rng rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> centers(spec.classes, std::vector<double>(spec.features));
    for (auto& c : centers) {
        double norm = 0.0;
        for (auto& v : c) {
            v = unit(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : c) v *= spec.center_radius / norm;
    }
    DatasetSplits s;
    s.train = draw_split(centers, spec, spec.train_per_class, rng);
    s.calibration = draw_split(centers, spec, spec.calibration_per_class, rng);
    s.evaluation = draw_split(centers, spec, spec.evaluation_per_class, rng);
    s.validation = draw_split(centers, spec, spec.validation_per_class, rng);
    return s;
}

}  // namespace nemo::workload
