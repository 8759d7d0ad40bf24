#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nemo/engine.hpp"
#include "nemo/harness.hpp"
#include "nemo/mo.hpp"
#include "nemo/workload.hpp"

namespace py = pybind11;
using namespace nemo;

namespace {

// dicts cross the boundary as JSON text; the python package does the decoding
nlohmann::json parse(const std::string& text) { return nlohmann::json::parse(text); }

nlohmann::json report_json(const harness::ParetoReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"id", r.id},
                        {"species", r.species},
                        {"generation", r.generation},
                        {"top1", r.metrics.top1},
                        {"topk", r.metrics.topk},
                        {"model_ratio", r.metrics.model_ratio},
                        {"bitops_ratio", r.metrics.bitops_ratio},
                        {"bits", r.bits.bits}});
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_nemo, m) {
    m.doc() = "Multi-objective mixed-precision quantization search";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

    m.def("dominates", [](const ObjectiveVector& a, const ObjectiveVector& b) { return mo::dominates(a, b); });
    m.def("non_dominated_sort",
          [](const std::vector<ObjectiveVector>& pts) { return mo::non_dominated_sort(pts).fronts; });
    m.def("uniform_weight_vectors",
          [](std::size_t k, std::size_t target) { return mo::uniform_weight_vectors(k, target).vectors; });
    m.def(
        "r2_indicator",
        [](const std::vector<ObjectiveVector>& front, const std::vector<ObjectiveVector>& weights,
           std::optional<std::vector<double>> utopia) {
            const mo::WeightVectorSet w{weights, 0};
            const auto z = utopia.value_or(std::vector<double>(front.empty() ? 0 : front[0].size(), 0.0));
            return mo::r2_indicator(front, w, z);
        },
        py::arg("front"), py::arg("weights"), py::arg("utopia") = py::none());

    m.def("ucb_scores", [](const std::vector<double>& u, const std::vector<std::uint64_t>& y, double c) {
        return engine::ucb_scores(u, y, c);
    });
    m.def("allocate_sizes", [](const std::vector<double>& scores, std::size_t population, std::size_t min_size) {
        return engine::allocate_sizes(scores, population, min_size);
    });

    m.def("quantize", [](int bits, double lo, double hi, double x) {
        const auto r = workload::quantize_dequantize(workload::make_quantizer(bits, lo, hi), x);
        return py::make_tuple(r.level, r.value);
    });

    py::class_<workload::Workload>(m, "Workload")
        .def_property_readonly("name", &workload::Workload::name)
        .def_property_readonly("quantizers", &workload::Workload::quantizer_count)
        .def_property_readonly("metadata", [](const workload::Workload& w) { return w.metadata().dump(); })
        .def("model_ratio",
             [](const workload::Workload& w, std::vector<int> bits) { return workload::model_ratio(w, BitConfig{bits}); })
        .def("bitops_ratio",
             [](const workload::Workload& w, std::vector<int> bits) { return workload::bitops_ratio(w, BitConfig{bits}); })
        .def(
            "evaluate",
            [](const workload::Workload& w, std::vector<int> bits, std::size_t top_k) {
                const auto split = workload::dataset_for(w).evaluation;
                py::gil_scoped_release release;
                return workload::evaluate_objectives(w, BitConfig{bits}, split, top_k);
            },
            py::arg("bits"), py::arg("top_k") = 1)
        .def("save", [](const workload::Workload& w, const std::filesystem::path& p) { workload::save_workload(w, p); });

    m.def(
        "train_reference",
        [](const std::string& arch, std::uint64_t seed) {
            py::gil_scoped_release release;
            return workload::bundled_workload(arch, seed);
        },
        py::arg("arch") = "tiny", py::arg("seed") = 0);
    m.def("load_workload", [](const std::filesystem::path& p) { return workload::load_workload(p); });

    m.def(
        "oracle",
        [](const workload::Workload& w, const std::vector<int>& bits, std::size_t top_k, std::size_t threads) {
            const auto split = workload::dataset_for(w).evaluation;
            harness::ParetoReport report;
            {
                py::gil_scoped_release release;
                report = harness::exhaustive_oracle(w, bits, split, top_k, threads);
            }
            return report_json(report).dump();
        },
        py::arg("workload"), py::arg("bits"), py::arg("top_k") = 1, py::arg("threads") = 1);

    m.def(
        "run_search",
        [](const std::string& config_json, const std::filesystem::path& out_dir) {
            const auto cfg = harness::run_config_from_json(parse(config_json));
            harness::SearchOutputs out;
            {
                py::gil_scoped_release release;
                out = harness::run_search(cfg, out_dir);
            }
            nlohmann::json history = nlohmann::json::array();
            for (const auto& rec : out.result.history) history.push_back(engine::to_json(rec));
            return nlohmann::json{{"rows", report_json(out.report)},
                                  {"metadata", out.metadata},
                                  {"history", history},
                                  {"csv", harness::to_csv(out.report)}}
                .dump();
        },
        py::arg("config_json"), py::arg("out_dir") = std::filesystem::path{});

    m.def("benchmark_evaluate", [](const std::string& name, const std::vector<double>& x) {
        return harness::benchmark_evaluate(name, x);
    });
}
