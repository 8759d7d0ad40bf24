#include "nemo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

namespace nemo::harness {

using nlohmann::json;

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::optional<ObjectiveVector> FitnessCache::find(const BitConfig& key) const {
    std::shared_lock lock(mutex_);
    const auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void FitnessCache::insert(const BitConfig& key, ObjectiveVector value) {
    std::unique_lock lock(mutex_);
    map_.try_emplace(key, std::move(value));
}

std::size_t FitnessCache::size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
}

std::vector<ObjectiveVector> parallel_evaluate(std::span<const BitConfig> configs,
                                               const workload::Workload& workload,
                                               const workload::Dataset& split, std::size_t top_k,
                                               std::size_t threads, FitnessCache* cache,
                                               EvaluationStats* stats) {
    std::vector<ObjectiveVector> out(configs.size());
    if (configs.empty()) return out;

    // first occurrence of each distinct config
    std::unordered_map<BitConfig, std::size_t, BitConfigHash> slot_of;
    std::vector<std::size_t> slot(configs.size());
    std::vector<const BitConfig*> unique;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto [it, fresh] = slot_of.try_emplace(configs[i], unique.size());
        if (fresh) unique.push_back(&configs[i]);
        slot[i] = it->second;
    }

    std::vector<ObjectiveVector> values(unique.size());
    std::vector<std::size_t> todo;
    for (std::size_t u = 0; u < unique.size(); ++u) {
        if (cache) {
            if (auto hit = cache->find(*unique[u])) {
                values[u] = std::move(*hit);
                continue;
            }
        }
        todo.push_back(u);
    }
    if (stats) stats->cache_hits += configs.size() - todo.size();

    std::vector<char> failed(unique.size(), 0);
    std::mutex log_mutex;
    parallel_for(todo.size(), threads, [&](std::size_t t) {
        const auto u = todo[t];
        try {
            values[u] = workload::evaluate_objectives(workload, *unique[u], split, top_k);
        } catch (const std::exception& e) {
            values[u] = {1.0, 1.0, 1.0};
            failed[u] = 1;
            std::lock_guard lock(log_mutex);
            std::cerr << "nemo: evaluation failed (" << e.what() << "); assigning worst-case fitness\n";
        }
    });
    for (auto u : todo) {
        if (stats) {
            ++stats->workload_evaluations;
            if (failed[u]) ++stats->failures;
        }
        if (cache && !failed[u]) cache->insert(*unique[u], values[u]);
    }
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = values[slot[i]];
    return out;
}

QuantizationEvaluator::QuantizationEvaluator(std::shared_ptr<const workload::Workload> workload,
                                             workload::Dataset split, std::size_t top_k,
                                             std::size_t threads)
    : workload_(std::move(workload)), split_(std::move(split)), top_k_(top_k), threads_(threads) {
    require(workload_ != nullptr, "evaluator needs a workload");
    require(workload_->calibrated(), "evaluator needs a calibrated workload");
}

std::vector<std::optional<ObjectiveVector>> QuantizationEvaluator::evaluate(
    std::span<const engine::EvaluationRequest> batch) {
    std::vector<BitConfig> configs;
    configs.reserve(batch.size());
    for (const auto& r : batch) configs.push_back(*r.bits);
    auto values = parallel_evaluate(configs, *workload_, split_, top_k_, threads_, &cache_, &stats_);
    std::vector<std::optional<ObjectiveVector>> out;
    out.reserve(values.size());
    for (auto& v : values) out.emplace_back(std::move(v));
    return out;
}

// ---------------------------------------------------------------------------

SearchSpaceTooLarge::SearchSpaceTooLarge(double size)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "search space has " << size << " configurations; exhaustive enumeration is limited to "
              << kOracleLimit;
          return msg.str();
      }()),
      size_(size) {}

double search_space_size(std::size_t bit_choices, std::size_t quantizers) {
    return std::pow(static_cast<double>(bit_choices), static_cast<double>(quantizers));
}

std::vector<BitConfig> enumerate_space(const std::vector<int>& bit_set, std::size_t quantizers) {
    const double size = search_space_size(bit_set.size(), quantizers);
    if (size > kOracleLimit) throw SearchSpaceTooLarge(size);
    std::vector<BitConfig> out;
    out.reserve(static_cast<std::size_t>(size));
    std::vector<std::size_t> digit(quantizers, 0);
    while (true) {
        BitConfig c;
        for (auto d : digit) c.bits.push_back(bit_set[d]);
        out.push_back(std::move(c));
        std::size_t pos = quantizers;
        while (pos > 0) {
            --pos;
            if (++digit[pos] < bit_set.size()) break;
            digit[pos] = 0;
            if (pos == 0) return out;
        }
        if (quantizers == 0) return out;
    }
}

ParetoReport exhaustive_oracle(const workload::Workload& workload, const std::vector<int>& bit_set,
                               const workload::Dataset& split, std::size_t top_k, std::size_t threads,
                               std::uint64_t* evaluations) {
    const auto space = enumerate_space(bit_set, workload.quantizer_count());
    std::vector<workload::Metrics> metrics(space.size());
    parallel_for(space.size(), threads,
                 [&](std::size_t i) { metrics[i] = workload::evaluate_metrics(workload, space[i], split, top_k); });
    if (evaluations) *evaluations = space.size();

    std::vector<ObjectiveVector> points;
    points.reserve(space.size());
    for (const auto& m : metrics) points.push_back({1.0 - m.topk, m.model_ratio, m.bitops_ratio});
    ParetoReport report;
    report.quantizers = workload.quantizer_count();
    for (auto i : mo::pareto_indices(points)) {
        report.rows.push_back({i, "oracle", -1, metrics[i], space[i]});
    }
    return report;
}

// ---------------------------------------------------------------------------

std::size_t benchmark_objectives(const std::string& name) {
    if (name == "sphere-2d") return 2;
    if (name == "dtlz2-3d") return 3;
    throw ConfigError("unknown benchmark problem '" + name + "' (expected sphere-2d or dtlz2-3d)");
}

ObjectiveVector benchmark_evaluate(const std::string& name, std::span<const double> decision, double lo,
                                   double hi) {
    const auto m = benchmark_objectives(name);
    require(hi > lo, "benchmark: empty decision range");
    std::vector<double> x(decision.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp((decision[i] - lo) / (hi - lo), 0.0, 1.0);

    if (name == "sphere-2d") {
        require(!x.empty(), "sphere-2d needs at least one decision variable");
        double f1 = 0.0, f2 = 0.0;
        for (double v : x) {
            f1 += v * v;
            f2 += (v - 1.0) * (v - 1.0);
        }
        const auto n = static_cast<double>(x.size());
        return {f1 / n, f2 / n};
    }
    require(x.size() >= m, "dtlz2-3d needs at least three decision variables");
    double g = 0.0;
    for (std::size_t i = m - 1; i < x.size(); ++i) g += (x[i] - 0.5) * (x[i] - 0.5);
    const double half_pi = 0.5 * std::numbers::pi;
    const double r = 1.0 + g;
    return {r * std::cos(x[0] * half_pi) * std::cos(x[1] * half_pi),
            r * std::cos(x[0] * half_pi) * std::sin(x[1] * half_pi), r * std::sin(x[0] * half_pi)};
}

BenchmarkEvaluator::BenchmarkEvaluator(std::string name, double lo, double hi)
    : name_(std::move(name)), lo_(lo), hi_(hi), objectives_(benchmark_objectives(name_)) {}

std::vector<std::optional<ObjectiveVector>> BenchmarkEvaluator::evaluate(
    std::span<const engine::EvaluationRequest> batch) {
    std::vector<std::optional<ObjectiveVector>> out;
    out.reserve(batch.size());
    for (const auto& req : batch) {
        try {
            if (req.genome) {
                if (const auto* d = std::get_if<direct::DirectGenome>(req.genome)) {
                    out.emplace_back(benchmark_evaluate(name_, d->values, lo_, hi_));
                    continue;
                }
            }
            std::vector<double> v(req.bits->bits.begin(), req.bits->bits.end());
            out.emplace_back(benchmark_evaluate(name_, v, lo_, hi_));
        } catch (const std::exception&) {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

}  // namespace nemo::harness
