#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nemo/harness.hpp"

namespace nemo::harness {

using nlohmann::json;

namespace {

template <class T>
T read_key(const json& j, const char* key, const char* expected) {
    const auto& v = j.at(key);
    const bool ok = [&] {
        if constexpr (std::is_same_v<T, double>) return v.is_number();
        else if constexpr (std::is_same_v<T, std::string>) return v.is_string();
        else return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    }();
    if (!ok) {
        throw ConfigError(std::string("key '") + key + "': expected " + expected + ", got " + v.dump());
    }
    return v.get<T>();
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

const std::set<std::string> kRunKeys{"seed",          "generations",      "population_size",
                                     "initial_species_size", "min_species_size", "reference_points",
                                     "ucb_coefficient", "archive_capacity", "species",
                                     "workload",      "bit_set",          "top_k",
                                     "threads"};

}  // namespace

void RunConfig::validate() const {
    if (species.empty()) throw ConfigError("key 'species': roster must not be empty");
    std::set<std::string> seen;
    for (const auto& s : species) {
        const auto& names = species::roster_names();
        if (std::find(names.begin(), names.end(), s) == names.end()) {
            throw ConfigError("key 'species': unknown species '" + s + "'");
        }
        if (!seen.insert(s).second) throw ConfigError("key 'species': duplicate species '" + s + "'");
    }
    if (bit_set.size() < 2) throw ConfigError("key 'bit_set': needs at least two widths");
    for (std::size_t i = 0; i < bit_set.size(); ++i) {
        if (bit_set[i] < 2 || bit_set[i] > 32) throw ConfigError("key 'bit_set': widths must be in [2, 32]");
        if (i > 0 && bit_set[i] <= bit_set[i - 1]) {
            throw ConfigError("key 'bit_set': widths must be strictly ascending");
        }
    }
    if (top_k < 1) throw ConfigError("key 'top_k': must be >= 1");
    if (threads < 1) throw ConfigError("key 'threads': must be >= 1");
    try {
        engine.validate(species.size());
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kRunKeys.contains(key)) throw ConfigError("unknown key '" + key + "'");
    }
    RunConfig c;
    auto& e = c.engine;
    if (j.contains("seed")) e.seed = read_key<std::uint64_t>(j, "seed", "unsigned integer");
    if (j.contains("generations")) e.max_generations = read_key<std::size_t>(j, "generations", "unsigned integer");
    if (j.contains("population_size")) e.population_size = read_key<std::size_t>(j, "population_size", "unsigned integer");
    if (j.contains("initial_species_size")) {
        e.initial_species_size = read_key<std::size_t>(j, "initial_species_size", "unsigned integer");
    }
    if (j.contains("min_species_size")) e.min_species_size = read_key<std::size_t>(j, "min_species_size", "unsigned integer");
    if (j.contains("reference_points")) {
        e.reference_point_target = read_key<std::size_t>(j, "reference_points", "unsigned integer");
    }
    if (j.contains("ucb_coefficient")) e.ucb_coefficient = read_key<double>(j, "ucb_coefficient", "number");
    if (j.contains("archive_capacity")) e.archive_capacity = read_key<std::size_t>(j, "archive_capacity", "unsigned integer");
    if (j.contains("top_k")) c.top_k = read_key<std::size_t>(j, "top_k", "unsigned integer");
    if (j.contains("threads")) c.threads = read_key<std::size_t>(j, "threads", "unsigned integer");
    if (j.contains("species")) {
        const auto& s = j.at("species");
        if (!s.is_array()) throw ConfigError("key 'species': expected array of names, got " + s.dump());
        c.species.clear();
        for (const auto& v : s) {
            if (!v.is_string()) throw ConfigError("key 'species': entries must be strings, got " + v.dump());
            c.species.push_back(v.get<std::string>());
        }
    }
    if (j.contains("bit_set")) {
        const auto& b = j.at("bit_set");
        if (!b.is_array()) throw ConfigError("key 'bit_set': expected array of integers, got " + b.dump());
        c.bit_set.clear();
        for (const auto& v : b) {
            if (!v.is_number_integer()) throw ConfigError("key 'bit_set': entries must be integers, got " + v.dump());
            c.bit_set.push_back(v.get<int>());
        }
    }
    if (j.contains("workload")) {
        const auto& w = j.at("workload");
        if (w.is_string()) {
            c.workload.path = base_dir / w.get<std::string>();
        } else if (w.is_object()) {
            for (const auto& [key, _] : w.items()) {
                if (key != "path" && key != "arch" && key != "seed") {
                    throw ConfigError("key 'workload': unknown field '" + key + "'");
                }
            }
            if (w.contains("path")) c.workload.path = base_dir / read_key<std::string>(w, "path", "string");
            if (w.contains("arch")) c.workload.arch = read_key<std::string>(w, "arch", "string");
            if (w.contains("seed")) c.workload.seed = read_key<std::uint64_t>(w, "seed", "unsigned integer");
            if (c.workload.arch != "tiny" && c.workload.arch != "small") {
                throw ConfigError("key 'workload.arch': expected tiny or small, got '" + c.workload.arch + "'");
            }
        } else {
            throw ConfigError("key 'workload': expected a path string or an object, got " + w.dump());
        }
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return run_config_from_json(j, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json to_json(const RunConfig& c) {
    json workload;
    if (c.workload.path) workload["path"] = c.workload.path->string();
    else workload = {{"arch", c.workload.arch}, {"seed", c.workload.seed}};
    return {{"seed", c.engine.seed},
            {"generations", c.engine.max_generations},
            {"population_size", c.engine.population_size},
            {"initial_species_size", c.engine.initial_species_size},
            {"min_species_size", c.engine.min_species_size},
            {"reference_points", c.engine.reference_point_target},
            {"ucb_coefficient", c.engine.ucb_coefficient},
            {"archive_capacity", c.engine.archive_capacity},
            {"species", c.species},
            {"workload", workload},
            {"bit_set", c.bit_set},
            {"top_k", c.top_k},
            {"threads", c.threads}};
}

workload::Workload resolve_workload(const RunConfig& config) {
    workload::Workload w = config.workload.path ? workload::load_workload(*config.workload.path)
                                                : workload::bundled_workload(config.workload.arch, config.workload.seed);
    if (!w.calibrated()) {
        const auto data = workload::dataset_for(w);
        w.set_ranges(workload::calibrate(w, data.calibration));
    }
    return w;
}

ParetoReport report_from_archive(const engine::ParetoArchive& archive,
                                 const std::vector<std::string>& species_names,
                                 const workload::Workload& workload, const workload::Dataset& split,
                                 std::size_t top_k) {
    ParetoReport report;
    report.quantizers = workload.quantizer_count();
    for (const auto& e : archive.entries()) {
        ReportRow row;
        row.id = e.id;
        row.species = species_names.at(e.species);
        row.generation = static_cast<std::int64_t>(e.generation);
        row.metrics = workload::evaluate_metrics(workload, e.bits, split, top_k);
        row.bits = e.bits;
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        const auto oa = a.objectives();
        const auto ob = b.objectives();
        if (oa != ob) return oa < ob;
        if (a.bits != b.bits) return a.bits < b.bits;
        return a.id < b.id;
    });
    return report;
}

std::string to_csv(const ParetoReport& report) {
    std::ostringstream out;
    out << "id,species,generation,top1,topk,model_ratio,bitops_ratio";
    for (std::size_t i = 0; i < report.quantizers; ++i) out << ",b" << i;
    out << '\n';
    for (const auto& r : report.rows) {
        out << r.id << ',' << r.species << ',' << r.generation << ',' << fmt_double(r.metrics.top1) << ','
            << fmt_double(r.metrics.topk) << ',' << fmt_double(r.metrics.model_ratio) << ','
            << fmt_double(r.metrics.bitops_ratio);
        for (int b : r.bits.bits) out << ',' << b;
        out << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

SearchOutputs run_search(const RunConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    auto workload = std::make_shared<const workload::Workload>(resolve_workload(config));
    const auto data = workload::dataset_for(*workload);
    if (config.top_k > workload->output_dim()) {
        throw ConfigError("key 'top_k': exceeds the workload's " + std::to_string(workload->output_dim()) +
                          " classes");
    }
    auto graph = std::make_shared<const WorkloadGraph>(workload::build_graph(*workload));

    std::vector<species::SpeciesPtr> roster;
    for (const auto& name : config.species) {
        roster.push_back(species::make_species(name, workload->quantizer_count(), config.bit_set, graph));
    }
    QuantizationEvaluator evaluator(workload, data.evaluation, config.top_k, config.threads);

    std::string telemetry;
    SearchOutputs out;
    out.result = engine::run_search(config.engine, std::move(roster), evaluator,
                                    [&](const engine::GenerationRecord& r) { telemetry += engine::to_json(r).dump() + "\n"; });
    out.report = report_from_archive(out.result.archive, out.result.species_names, *workload, data.evaluation,
                                     config.top_k);

    const auto quantizers = workload->quantizer_count();
    out.metadata = {
        {"format", "nemo-run-metadata"},
        {"version", 1},
        {"config", to_json(config)},
        {"seed", config.engine.seed},
        {"workload",
         {{"name", workload->name()}, {"quantizers", quantizers}, {"metadata", workload->metadata()}}},
        {"search_space",
         {{"choices", config.bit_set.size()},
          {"quantizers", quantizers},
          {"size_formula", "choices^quantizers (weights and activations counted separately)"},
          {"log10_size", static_cast<double>(quantizers) * std::log10(static_cast<double>(config.bit_set.size()))}}},
        {"reference_points",
         {{"target", config.engine.reference_point_target},
          {"actual", out.result.reference_points},
          {"divisions", out.result.reference_divisions}}},
        {"objectives", {"1 - topk_accuracy", "model_ratio", "bitops_ratio"}},
        {"model_ratio_convention", "sum_l params_l * b_w_l / (32 * sum_l params_l)"},
        {"bitops_convention", "sum_l macs_l * b_w_l * b_a_l / (sum_l macs_l * 32 * 32)"},
        {"evaluations",
         {{"engine_requests", out.result.evaluations},
          {"includes_initial_population", true},
          {"workload_evaluations", evaluator.stats().workload_evaluations.load()},
          {"cache_hits", evaluator.stats().cache_hits.load()},
          {"failures", evaluator.stats().failures.load()}}},
        {"generations", config.engine.max_generations},
        {"archive_size", out.result.archive.size()}};

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "pareto.csv", to_csv(out.report));
        write_text(out_dir / "telemetry.jsonl", telemetry);
        write_text(out_dir / "run-metadata.json", out.metadata.dump(2) + "\n");
    }
    return out;
}

}  // namespace nemo::harness
