#pragma once

// Orchestration around the engine: cached parallel fitness evaluation,
// exhaustive ground truth for small spaces, analytic benchmark problems, run
// configuration and result files.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nemo/engine.hpp"
#include "nemo/workload.hpp"

namespace nemo::harness {

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Thread-safe memo of objective vectors keyed by bit configuration.
class FitnessCache {
public:
    std::optional<ObjectiveVector> find(const BitConfig& key) const;
    void insert(const BitConfig& key, ObjectiveVector value);
    [[nodiscard]] std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<BitConfig, ObjectiveVector, BitConfigHash> map_;
};

struct EvaluationStats {
    std::atomic<std::uint64_t> workload_evaluations{0};
    std::atomic<std::uint64_t> cache_hits{0};
    std::atomic<std::uint64_t> failures{0};
};

/// Objectives for every config, positionally aligned. Duplicates (within the
/// batch and against `cache`) are evaluated once. Failures are logged and
/// yield the worst-case vector (1, 1, 1).
std::vector<ObjectiveVector> parallel_evaluate(std::span<const BitConfig> configs,
                                               const workload::Workload& workload,
                                               const workload::Dataset& split, std::size_t top_k,
                                               std::size_t threads, FitnessCache* cache = nullptr,
                                               EvaluationStats* stats = nullptr);

/// Engine evaluator for the quantization problem.
class QuantizationEvaluator final : public engine::Evaluator {
public:
    QuantizationEvaluator(std::shared_ptr<const workload::Workload> workload, workload::Dataset split,
                          std::size_t top_k, std::size_t threads);

    [[nodiscard]] std::size_t objectives() const override { return 3; }
    std::vector<std::optional<ObjectiveVector>> evaluate(
        std::span<const engine::EvaluationRequest> batch) override;

    [[nodiscard]] const EvaluationStats& stats() const noexcept { return stats_; }
    [[nodiscard]] const FitnessCache& cache() const noexcept { return cache_; }

private:
    std::shared_ptr<const workload::Workload> workload_;
    workload::Dataset split_;
    std::size_t top_k_;
    std::size_t threads_;
    FitnessCache cache_;
    EvaluationStats stats_;
};

// ---------------------------------------------------------------------------
// Exhaustive oracle

struct ReportRow {
    std::uint64_t id = 0;
    std::string species;
    std::int64_t generation = 0;
    workload::Metrics metrics;
    BitConfig bits;

    [[nodiscard]] ObjectiveVector objectives() const {
        return {1.0 - metrics.topk, metrics.model_ratio, metrics.bitops_ratio};
    }
};

struct ParetoReport {
    std::vector<ReportRow> rows;
    std::size_t quantizers = 0;
};

class SearchSpaceTooLarge : public std::runtime_error {
public:
    explicit SearchSpaceTooLarge(double size);
    [[nodiscard]] double size() const noexcept { return size_; }

private:
    double size_;
};

inline constexpr double kOracleLimit = 1e5;

/// |bit_set|^quantizers, as a double.
double search_space_size(std::size_t bit_choices, std::size_t quantizers);

/// Evaluates every configuration and keeps the exact Pareto set.
ParetoReport exhaustive_oracle(const workload::Workload& workload, const std::vector<int>& bit_set,
                               const workload::Dataset& split, std::size_t top_k,
                               std::size_t threads = 1, std::uint64_t* evaluations = nullptr);

/// Every configuration of the space in lexicographic order of the bit set.
std::vector<BitConfig> enumerate_space(const std::vector<int>& bit_set, std::size_t quantizers);

// ---------------------------------------------------------------------------
// Analytic benchmarks (engine validation without a workload)

/// Names: "sphere-2d", "dtlz2-3d". Throws ConfigError otherwise.
std::size_t benchmark_objectives(const std::string& name);

/// Maps values in [lo, hi] to [0, 1] and evaluates the problem.
ObjectiveVector benchmark_evaluate(const std::string& name, std::span<const double> decision,
                                   double lo = 2.0, double hi = 8.0);

/// Uses the direct genome's continuous values when available, otherwise the
/// decoded bit widths.
class BenchmarkEvaluator final : public engine::Evaluator {
public:
    BenchmarkEvaluator(std::string name, double lo = 2.0, double hi = 8.0);

    [[nodiscard]] std::size_t objectives() const override { return objectives_; }
    std::vector<std::optional<ObjectiveVector>> evaluate(
        std::span<const engine::EvaluationRequest> batch) override;

private:
    std::string name_;
    double lo_;
    double hi_;
    std::size_t objectives_;
};

// ---------------------------------------------------------------------------
// Run configuration and outputs

struct WorkloadSource {
    std::optional<std::filesystem::path> path;
    std::string arch = "tiny";
    std::uint64_t seed = 0;
};

struct RunConfig {
    engine::EngineConfig engine;
    std::vector<std::string> species = species::roster_names();
    WorkloadSource workload;
    std::vector<int> bit_set{2, 3, 4, 5, 6, 7, 8};
    std::size_t top_k = 1;
    std::size_t threads = 1;

    void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ConfigError naming
/// the offending key. Relative workload paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

struct SearchOutputs {
    engine::SearchResult result;
    ParetoReport report;
    nlohmann::json metadata;
};

/// Loads or trains the workload named by the config.
workload::Workload resolve_workload(const RunConfig& config);

/// Runs the search and, when `out_dir` is non-empty, writes pareto.csv,
/// telemetry.jsonl and run-metadata.json there.
SearchOutputs run_search(const RunConfig& config, const std::filesystem::path& out_dir = {});

/// Re-scores archive entries (top-1 and top-k) into report rows sorted by
/// objectives.
ParetoReport report_from_archive(const engine::ParetoArchive& archive,
                                 const std::vector<std::string>& species_names,
                                 const workload::Workload& workload, const workload::Dataset& split,
                                 std::size_t top_k);

/// id,species,generation,top1,topk,model_ratio,bitops_ratio,b0..bN-1
std::string to_csv(const ParetoReport& report);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nemo::harness
