#include <fstream>

#include "nemo/workload.hpp"

namespace nemo::workload {

using nlohmann::json;

namespace {

constexpr int kWorkloadVersion = 1;

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace

json to_json(const Workload& workload) {
    json layers = json::array();
    for (const auto& l : workload.layers()) {
        layers.push_back({{"op_type", l.op_type},
                          {"shape", {l.out_dim, l.in_dim}},
                          {"weights", l.weights},
                          {"bias", l.bias},
                          {"params", l.params()},
                          {"macs", l.macs()},
                          {"group_id", l.group_id}});
    }
    json j = {{"format", "nemo-workload"},
              {"version", kWorkloadVersion},
              {"name", workload.name()},
              {"layers", std::move(layers)},
              {"metadata", workload.metadata()}};
    if (workload.calibrated()) {
        json ranges = json::array();
        for (const auto& r : workload.ranges()) ranges.push_back({r.lo, r.hi});
        j["calibration"] = std::move(ranges);
    }
    return j;
}

Workload workload_from_json(const json& j) {
    try {
        if (j.value("format", "") != "nemo-workload") throw ConfigError("workload: missing format tag");
        const int version = j.at("version").get<int>();
        if (version != kWorkloadVersion) {
            throw ConfigError("workload: unsupported version " + std::to_string(version));
        }
        std::vector<Layer> layers;
        for (const auto& jl : j.at("layers")) {
            Layer l;
            l.op_type = jl.at("op_type").get<std::string>();
            const auto shape = jl.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2) throw ConfigError("workload: dense layer shape must be [out, in]");
            l.out_dim = shape[0];
            l.in_dim = shape[1];
            l.weights = jl.at("weights").get<std::vector<double>>();
            l.bias = jl.at("bias").get<std::vector<double>>();
            l.group_id = jl.value("group_id", 0);
            if (jl.contains("macs") && jl.at("macs").get<std::size_t>() != l.in_dim * l.out_dim) {
                throw ConfigError("workload: macs disagree with layer shape");
            }
            if (jl.contains("params") &&
                jl.at("params").get<std::size_t>() != l.weights.size() + l.bias.size()) {
                throw ConfigError("workload: params disagree with tensor sizes");
            }
            layers.push_back(std::move(l));
        }
        Workload w(std::move(layers), j.value("name", "custom"));
        if (j.contains("metadata")) w.metadata() = j.at("metadata");
        if (j.contains("calibration")) {
            std::vector<Range> ranges;
            for (const auto& r : j.at("calibration")) ranges.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
            w.set_ranges(std::move(ranges));
        }
        return w;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("workload: ") + e.what());
    } catch (const ContractError& e) {
        throw ConfigError(std::string("workload: ") + e.what());
    }
}

void save_workload(const Workload& workload, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(workload).dump() << '\n';
}

Workload load_workload(const std::filesystem::path& path) {
    return workload_from_json(read_json_file(path));
}

BitConfig bit_config_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("bit config must be a JSON array of integers");
    BitConfig c;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ConfigError("bit config entries must be integers");
        c.bits.push_back(v.get<int>());
    }
    return c;
}

json to_json(const BitConfig& config) { return json(config.bits); }

BitConfig load_bit_config(const std::filesystem::path& path) {
    return bit_config_from_json(read_json_file(path));
}

}  // namespace nemo::workload
