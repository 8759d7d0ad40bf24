#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nemo/harness.hpp"

namespace fs = std::filesystem;
using namespace nemo;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

std::vector<int> parse_bits(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--bits: '" + item + "' is not an integer");
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int cmd_train_ref(const std::string& arch, std::uint64_t seed, const fs::path& out) {
    auto w = workload::bundled_workload(arch, seed);
    workload::save_workload(w, out);
    std::cout << "wrote " << out.string() << " (" << w.quantizer_count() << " quantizers, validation accuracy "
              << fmt(w.metadata().value("validation_accuracy", 0.0)) << ")\n";
    return 0;
}

int cmd_search(const fs::path& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
               std::optional<std::size_t> threads) {
    auto config = harness::load_run_config(config_path);
    if (seed) config.engine.seed = *seed;
    if (threads) config.threads = *threads;
    config.validate();
    const auto out = harness::run_search(config, out_dir);
    std::cout << "archive " << out.report.rows.size() << " points, " << out.result.evaluations
              << " evaluations, output in " << out_dir.string() << "\n";
    return 0;
}

int cmd_oracle(const fs::path& workload_path, const std::string& bits, const fs::path& out, std::size_t top_k,
               std::size_t threads) {
    auto w = workload::load_workload(workload_path);
    const auto data = workload::dataset_for(w);
    if (!w.calibrated()) w.set_ranges(workload::calibrate(w, data.calibration));
    std::uint64_t evaluations = 0;
    const auto report = harness::exhaustive_oracle(w, parse_bits(bits), data.evaluation, top_k, threads, &evaluations);
    harness::write_text(out, harness::to_csv(report));
    std::cout << "evaluated " << evaluations << " configurations, " << report.rows.size()
              << " Pareto-optimal, wrote " << out.string() << "\n";
    return 0;
}

int cmd_eval(const fs::path& workload_path, const fs::path& bits_path, std::size_t top_k) {
    auto w = workload::load_workload(workload_path);
    const auto data = workload::dataset_for(w);
    if (!w.calibrated()) w.set_ranges(workload::calibrate(w, data.calibration));
    const auto bits = workload::load_bit_config(bits_path);
    if (bits.size() != w.quantizer_count()) {
        throw ConfigError(bits_path.string() + ": expected " + std::to_string(w.quantizer_count()) +
                          " bit widths, got " + std::to_string(bits.size()));
    }
    const auto m = workload::evaluate_metrics(w, bits, data.evaluation, top_k);
    std::cout << "topk_error " << fmt(1.0 - m.topk) << "\n"
              << "model_ratio " << fmt(m.model_ratio) << "\n"
              << "bitops_ratio " << fmt(m.bitops_ratio) << "\n";
    return 0;
}

int cmd_bench(const std::string& problem, std::size_t generations, std::uint64_t seed, std::size_t dims,
              const std::string& roster, const fs::path& out) {
    engine::EngineConfig cfg;
    cfg.objectives = harness::benchmark_objectives(problem);
    cfg.max_generations = generations;
    cfg.seed = seed;
    const std::vector<int> bit_set{2, 3, 4, 5, 6, 7, 8};
    std::vector<species::SpeciesPtr> species;
    std::stringstream ss(roster);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name != "continuous" && name != "floor") {
            throw ConfigError("--species: bench supports only continuous and floor, got '" + name + "'");
        }
        species.push_back(species::make_species(name, dims, bit_set, nullptr));
    }
    harness::BenchmarkEvaluator evaluator(problem);
    const auto result = engine::run_search(cfg, std::move(species), evaluator);

    std::string csv = "f1";
    for (std::size_t i = 1; i < cfg.objectives; ++i) csv += ",f" + std::to_string(i + 1);
    csv += "\n";
    double sphere_gap = 0.0;
    for (const auto& e : result.archive.entries()) {
        double sq = 0.0;
        for (std::size_t i = 0; i < e.objectives.size(); ++i) {
            csv += (i ? "," : "") + fmt(e.objectives[i]);
            sq += e.objectives[i] * e.objectives[i];
        }
        csv += "\n";
        sphere_gap += std::abs(sq - 1.0);
    }
    if (!out.empty()) harness::write_text(out, csv);
    std::cout << "problem " << problem << "\n"
              << "generations " << generations << "\n"
              << "evaluations " << result.evaluations << "\n"
              << "archive_size " << result.archive.size() << "\n"
              << "archive_r2 " << fmt(result.history.empty() ? 0.0 : result.history.back().archive_r2) << "\n";
    if (problem == "dtlz2-3d" && result.archive.size() > 0) {
        std::cout << "mean_front_gap " << fmt(sphere_gap / static_cast<double>(result.archive.size())) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective mixed-precision quantization search"};
    app.require_subcommand(1);

    std::string arch = "tiny";
    std::uint64_t seed = 0;
    std::string out;
    auto* train = app.add_subcommand("train-ref", "Train and calibrate a bundled reference workload");
    train->add_option("--arch", arch, "tiny or small")->check(CLI::IsMember({"tiny", "small"}));
    train->add_option("--seed", seed, "Data and training seed");
    train->add_option("--out", out, "Workload file")->required();

    std::string config_path, out_dir;
    std::optional<std::uint64_t> search_seed;
    std::optional<std::size_t> search_threads;
    auto* search = app.add_subcommand("search", "Run the species search");
    search->add_option("--config", config_path, "run.json")->required()->check(CLI::ExistingFile);
    search->add_option("--out-dir", out_dir, "Output directory")->required();
    search->add_option("--seed", search_seed, "Override the config seed");
    search->add_option("--threads", search_threads, "Override the evaluation thread count");

    std::string workload_path, bits = "2,4,8";
    std::size_t top_k = 1, threads = 1;
    auto* oracle = app.add_subcommand("oracle", "Enumerate the whole space and export the exact front");
    oracle->add_option("--workload", workload_path, "Workload file")->required()->check(CLI::ExistingFile);
    oracle->add_option("--bits", bits, "Comma separated bit set");
    oracle->add_option("--out", out, "CSV file")->required();
    oracle->add_option("--top-k", top_k, "k of the accuracy objective");
    oracle->add_option("--threads", threads, "Worker threads");

    std::string bit_config;
    auto* eval = app.add_subcommand("eval", "Print the objectives of one bit configuration");
    eval->add_option("--workload", workload_path, "Workload file")->required()->check(CLI::ExistingFile);
    eval->add_option("--bit-config", bit_config, "bits.json")->required()->check(CLI::ExistingFile);
    eval->add_option("--top-k", top_k, "k of the accuracy objective");

    std::string problem = "dtlz2-3d", roster = "continuous,floor";
    std::size_t generations = 200, dims = 12;
    auto* bench = app.add_subcommand("bench", "Engine-only run on an analytic problem");
    bench->add_option("--problem", problem, "sphere-2d or dtlz2-3d");
    bench->add_option("--generations", generations, "Generations");
    bench->add_option("--seed", seed, "Seed");
    bench->add_option("--dims", dims, "Decision variables");
    bench->add_option("--species", roster, "Comma separated direct species");
    bench->add_option("--out", out, "Optional CSV of the final archive objectives");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (*train) return cmd_train_ref(arch, seed, out);
        if (*search) return cmd_search(config_path, out_dir, search_seed, search_threads);
        if (*oracle) return cmd_oracle(workload_path, bits, out, top_k, threads);
        if (*eval) return cmd_eval(workload_path, bit_config, top_k);
        if (*bench) return cmd_bench(problem, generations, seed, dims, roster, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const ContractError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeExit;
    }
    return kRuntimeExit;
}
