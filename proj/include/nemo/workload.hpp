#pragma once

// The quantization problem: a small trained dense network, its affine
// quantizers, calibration, simulated quantized inference and the three
// objectives (top-k error, model ratio, bit-operation ratio).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "nemo/common.hpp"
#include "nemo/graph.hpp"

namespace nemo::workload {

// ---------------------------------------------------------------------------
// Affine quantizer

struct Quantizer {
    int bits = 8;
    double x_min = 0.0;
    double x_max = 1.0;

    /// Step between adjacent levels: (x_max - x_min) / (2^b - 1).
    [[nodiscard]] double scale() const;
    /// Real-valued zero point -x_min / s (deliberately not rounded).
    [[nodiscard]] double zero_point() const;
    [[nodiscard]] std::int64_t max_level() const;
};

/// Validates b >= 2 and x_min < x_max.
Quantizer make_quantizer(int bits, double x_min, double x_max);

struct Quantized {
    std::int64_t level;
    double value;
};

/// level = round(clamp(x)/s + z) in {0..2^b-1}; value = s * (level - z).
Quantized quantize_dequantize(const Quantizer& q, double x);

// ---------------------------------------------------------------------------
// Data

struct Dataset {
    std::size_t features = 0;
    std::size_t classes = 0;
    std::vector<double> inputs;  // samples x features, row-major
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {inputs.data() + i * features, features};
    }
    /// Rows [begin, begin+count) as a new dataset.
    [[nodiscard]] Dataset slice(std::size_t begin, std::size_t count) const;
};

struct BlobSpec {
    std::size_t features = 8;
    std::size_t classes = 4;
    double center_radius = 4.0;
    double noise = 1.0;
    std::size_t train_per_class = 500;
    std::size_t calibration_per_class = 64;
    std::size_t evaluation_per_class = 50;
    std::size_t validation_per_class = 200;
};

struct DatasetSplits {
    Dataset train;
    Dataset calibration;
    Dataset evaluation;  // class-stratified
    Dataset validation;
};

/// Seeded Gaussian-blob classification data; every split is class balanced.
DatasetSplits make_blobs(const BlobSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Workload

/// Fixed op-type vocabulary for the one-hot node feature.
inline constexpr std::array<std::string_view, 2> kOpTypes{"dense", "conv2d"};
/// Layer groups: first, hidden, last.
inline constexpr std::size_t kGroupCount = 3;

struct Layer {
    std::string op_type = "dense";
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;  // out_dim x in_dim
    std::vector<double> bias;     // out_dim
    int group_id = 0;

    /// P_l: weights plus biases.
    [[nodiscard]] std::size_t params() const { return weights.size() + bias.size(); }
    /// M_l: multiply-accumulates of the dense product.
    [[nodiscard]] std::size_t macs() const { return in_dim * out_dim; }
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Range&, const Range&) = default;
};

/// Quantizer node i: layer i/2, weight tensor when i is even, the layer's
/// input activation when i is odd.
struct QuantizerNode {
    std::size_t layer = 0;
    bool is_weight = true;
    std::vector<std::size_t> shape;

    [[nodiscard]] std::size_t numel() const;
};

class Workload {
public:
    Workload() = default;
    explicit Workload(std::vector<Layer> layers, std::string name = "custom");

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
    [[nodiscard]] std::size_t quantizer_count() const noexcept { return 2 * layers_.size(); }
    [[nodiscard]] std::vector<QuantizerNode> quantizer_nodes() const;
    [[nodiscard]] std::size_t input_dim() const { return layers_.front().in_dim; }
    [[nodiscard]] std::size_t output_dim() const { return layers_.back().out_dim; }

    [[nodiscard]] bool calibrated() const noexcept { return !ranges_.empty(); }
    [[nodiscard]] const std::vector<Range>& ranges() const noexcept { return ranges_; }
    void set_ranges(std::vector<Range> ranges);

    /// Free-form provenance (dataset seed, architecture, training accuracy).
    nlohmann::json& metadata() noexcept { return metadata_; }
    [[nodiscard]] const nlohmann::json& metadata() const noexcept { return metadata_; }

private:
    std::string name_ = "custom";
    std::vector<Layer> layers_;
    std::vector<Range> ranges_;
    nlohmann::json metadata_ = nlohmann::json::object();
};

/// Per-quantizer (x_min, x_max): static min/max for weights, mean of
/// per-batch minima and maxima of each layer input for activations.
std::vector<Range> calibrate(const Workload& workload, const Dataset& calibration,
                             std::size_t n_batches = 8, std::size_t batch_size = 32);

/// Float forward pass; returns samples x classes scores.
std::vector<double> full_precision_forward(const Workload& workload, const Dataset& batch);

/// Simulated quantization of every weight tensor and layer input.
std::vector<double> quantized_forward(const Workload& workload, const BitConfig& config,
                                      const Dataset& batch);

/// Fraction of samples whose label is among the k best scores; ties go to the
/// lower class index.
double top_k_accuracy(std::span<const double> scores, std::span<const int> labels,
                      std::size_t classes, std::size_t k);

double model_ratio(const Workload& workload, const BitConfig& config);
double bitops_ratio(const Workload& workload, const BitConfig& config);

struct Metrics {
    double top1 = 0.0;
    double topk = 0.0;
    double model_ratio = 0.0;
    double bitops_ratio = 0.0;
};

Metrics evaluate_metrics(const Workload& workload, const BitConfig& config,
                         const Dataset& split, std::size_t top_k);

/// (1 - top-k accuracy, model ratio, bit-ops ratio).
ObjectiveVector evaluate_objectives(const Workload& workload, const BitConfig& config,
                                    const Dataset& split, std::size_t top_k);

/// One node per quantizer with features
/// [op one-hot | is_weight | ndim | ln(1+numel) | group one-hot] and a
/// sequential chain of edges.
WorkloadGraph build_graph(const Workload& workload);

/// Width of the feature vector produced by build_graph.
constexpr std::size_t node_feature_width() { return kOpTypes.size() + 3 + kGroupCount; }

// ---------------------------------------------------------------------------
// Reference network training

struct Architecture {
    std::string name;
    std::vector<std::size_t> dims;  // input, hidden..., classes
};

/// "tiny": 8-16-4 (4 quantizers); "small": 8 dense layers (16 quantizers).
Architecture architecture(const std::string& name);

struct TrainOptions {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double required_accuracy = 0.90;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trains a ReLU MLP with softmax cross-entropy and plain SGD, then freezes it
/// into a calibrated Workload. Throws TrainingError below the required
/// validation accuracy.
Workload train_reference(const Architecture& arch, const DatasetSplits& data,
                         const TrainOptions& options, Rng& rng);

/// Builds, trains and calibrates a bundled workload from a single seed.
Workload bundled_workload(const std::string& arch_name, std::uint64_t seed);

/// The dataset a workload was trained on, regenerated from its metadata.
DatasetSplits dataset_for(const Workload& workload);

// ---------------------------------------------------------------------------
// Files

nlohmann::json to_json(const Workload& workload);
Workload workload_from_json(const nlohmann::json& j);
void save_workload(const Workload& workload, const std::filesystem::path& path);
Workload load_workload(const std::filesystem::path& path);

BitConfig bit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BitConfig& config);
BitConfig load_bit_config(const std::filesystem::path& path);

}  // namespace nemo::workload
