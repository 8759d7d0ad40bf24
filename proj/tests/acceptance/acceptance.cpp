// One PASS/FAIL line per acceptance criterion. Exit status is non-zero only
// with --strict (any FAIL) or when a check itself throws.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nemo/engine.hpp"
#include "nemo/harness.hpp"
#include "nemo/mo.hpp"
#include "nemo/neuro.hpp"
#include "nemo/workload.hpp"

using namespace nemo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& xs, const std::string& sep = ",") {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? sep : "") << xs[i];
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// straight from the definition: mean over weights of min over points of max_i w_i |f_i - z_i|
double hand_r2(const std::vector<ObjectiveVector>& front, const std::vector<std::vector<double>>& weights) {
    double total = 0.0;
    for (const auto& w : weights) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : front) {
            double worst = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, w[i] * std::abs(f[i]));
            best = std::min(best, worst);
        }
        total += best;
    }
    return total / static_cast<double>(weights.size());
}

std::vector<species::SpeciesPtr> full_roster(std::size_t quantizers, const std::vector<int>& bits,
                                             std::shared_ptr<const WorkloadGraph> graph,
                                             const std::vector<std::string>& names) {
    std::vector<species::SpeciesPtr> r;
    for (const auto& n : names) r.push_back(species::make_species(n, quantizers, bits, graph));
    return r;
}

Outcome oracle_equivalence() {
    auto w = std::make_shared<const workload::Workload>(workload::bundled_workload("tiny", 0));
    const auto split = workload::dataset_for(*w).evaluation;
    const std::vector<int> bits{2, 4, 8};
    const auto graph = std::make_shared<const WorkloadGraph>(workload::build_graph(*w));
    std::uint64_t oracle_evals = 0;
    const auto oracle = harness::exhaustive_oracle(*w, bits, split, 1, 1, &oracle_evals);
    std::set<BitConfig> want;
    for (const auto& r : oracle.rows) want.insert(r.bits);

    std::vector<double> recovered;
    double slowest = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto t0 = Clock::now();
        engine::EngineConfig cfg;
        cfg.population_size = 24;
        cfg.initial_species_size = 6;
        cfg.min_species_size = 3;
        cfg.max_generations = 60;
        cfg.seed = seed;
        harness::QuantizationEvaluator ev(w, split, 1, 1);
        const auto result = engine::run_search(cfg, full_roster(4, bits, graph, species::roster_names()), ev);
        std::size_t hit = 0;
        for (const auto& e : result.archive.entries()) hit += want.count(e.bits);
        recovered.push_back(static_cast<double>(hit) / static_cast<double>(want.size()));
        slowest = std::max(slowest, seconds_since(t0));
    }
    const auto full = std::count(recovered.begin(), recovered.end(), 1.0);
    const bool all90 = std::all_of(recovered.begin(), recovered.end(), [](double r) { return r >= 0.9; });
    std::vector<std::string> pct;
    for (double r : recovered) pct.push_back(num(100.0 * r, 3) + "%");
    Outcome o;
    o.pass = full >= 4 && all90 && slowest < 120.0 && oracle_evals == 81;
    o.detail = "oracle front " + std::to_string(want.size()) + " of " + std::to_string(oracle_evals) +
               " configs; recovery per seed " + join(pct) + "; full in " + std::to_string(full) +
               "/5; slowest seed " + num(slowest, 3) + " s";
    return o;
}

Outcome r2_correctness() {
    mo::WeightVectorSet w{{{1, 0}, {0, 1}, {0.5, 0.5}}, 0};
    const std::vector<double> z{0, 0};
    const std::vector<ObjectiveVector> front{{0.2, 0.8}, {0.6, 0.3}};
    const double r2 = mo::r2_indicator(front, w, z);
    const bool example = std::abs(r2 - 0.2667) <= 1e-4 && std::abs(r2 - hand_r2(front, w.vectors)) < 1e-12;

    Rng rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto weights = mo::uniform_weight_vectors(3, 25);
    const std::vector<double> z3{0, 0, 0};
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<ObjectiveVector> small(1 + rng() % 8), extra(1 + rng() % 8);
        for (auto& p : small) p = {u(rng), u(rng), u(rng)};
        for (auto& p : extra) p = {u(rng), u(rng), u(rng)};
        auto large = small;
        large.insert(large.end(), extra.begin(), extra.end());
        if (mo::r2_indicator(large, weights, z3) > mo::r2_indicator(small, weights, z3)) ++violations;
    }
    return {example && violations == 0,
            "example " + num(r2, 6) + " (target 0.2667); superset violations " + std::to_string(violations) +
                "/1000"};
}

Outcome ucb_allocation() {
    const std::vector<double> util{0.5, 0.5, 0.5, 0.5};
    const std::vector<std::uint64_t> y{4, 4, 4, 4};
    const double ucb = engine::ucb_scores(util, y, 0.9)[0];
    const double expected = 0.5 + 0.9 * std::sqrt(std::log(16.0) / 4.0);

    Rng rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng() % 6;
        const std::size_t min_size = 1 + rng() % 5;
        const std::size_t pop = k * min_size + rng() % 80;
        std::vector<double> s(k);
        for (auto& v : s) v = u(rng);
        const auto a = engine::allocate_sizes(s, pop, min_size);
        std::size_t sum = 0;
        bool floor_ok = true;
        for (auto n : a) {
            sum += n;
            floor_ok = floor_ok && n >= min_size;
        }
        if (sum != pop || !floor_ok || a.size() != k) ++bad;
    }
    const bool ok = std::abs(ucb - 1.2493) <= 1e-4 && std::abs(ucb - expected) < 1e-12 && bad == 0;
    return {ok, "ucb " + num(ucb, 6) + " (target 1.2493); allocation violations " + std::to_string(bad) + "/1000"};
}

ObjectiveVector toy_objectives(const BitConfig& b) {
    double mean = 0;
    for (int x : b.bits) mean += x;
    mean /= static_cast<double>(b.size());
    return {1.0 / mean, mean / 8.0, (b.bits.front() * b.bits.back()) / 64.0};
}

Outcome species_dynamics() {
    const std::vector<int> bits{2, 3, 4, 5, 6, 7, 8};
    std::vector<std::string> reached_at;
    bool rigged_ok = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        engine::FunctionEvaluator ev(3, [](const engine::EvaluationRequest& r) -> ObjectiveVector {
            if (r.species == 3) return {10, 10, 10};
            return toy_objectives(*r.bits);
        });
        engine::EngineConfig cfg;
        cfg.seed = seed;
        cfg.max_generations = 10;
        const auto result = engine::run_search(
            cfg, full_roster(6, bits, nullptr, {"continuous", "floor", "continuous", "floor"}), ev);
        std::size_t first = 0;
        for (const auto& rec : result.history) {
            if (rec.generation >= 1 && rec.species[3].allocation == cfg.min_species_size) {
                first = rec.generation;
                break;
            }
        }
        rigged_ok = rigged_ok && first != 0;
        reached_at.push_back(first ? std::to_string(first) : "never");
    }

    // four identical species on the same problem
    double worst_mean_dev = 0.0;
    double worst_single_dev = 0.0;
    std::vector<double> pooled(4, 0.0);
    double uniform = 0.0;
    std::size_t samples = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        engine::FunctionEvaluator ev(3, [](const engine::EvaluationRequest& r) { return toy_objectives(*r.bits); });
        engine::EngineConfig cfg;
        cfg.seed = seed;
        cfg.max_generations = 50;
        const auto result = engine::run_search(
            cfg, full_roster(6, bits, nullptr, {"continuous", "continuous", "continuous", "continuous"}), ev);
        uniform = static_cast<double>(cfg.population_size) / 4.0;
        std::vector<double> mean(4, 0.0);
        std::size_t gens = 0;
        for (const auto& rec : result.history) {
            if (rec.generation == 0) continue;
            ++gens;
            for (std::size_t s = 0; s < 4; ++s) {
                const auto a = static_cast<double>(rec.species[s].allocation);
                mean[s] += a;
                pooled[s] += a;
                worst_single_dev = std::max(worst_single_dev, std::abs(a - uniform) / uniform);
            }
        }
        samples += gens;
        for (auto m : mean) worst_mean_dev = std::max(worst_mean_dev, std::abs(m / gens - uniform) / uniform);
    }
    double pooled_dev = 0.0;
    for (auto m : pooled) pooled_dev = std::max(pooled_dev, std::abs(m / samples - uniform) / uniform);
    Outcome o;
    o.pass = rigged_ok && worst_single_dev <= 0.30;
    o.detail = "rigged species at min size by generation " + join(reached_at) +
               "; symmetric species: worst per-generation deviation " + num(100 * worst_single_dev, 3) +
               "% (per-run time average " + num(100 * worst_mean_dev, 3) + "%, pooled over seeds " +
               num(100 * pooled_dev, 3) + "%)";
    return o;
}

Outcome quantizer_properties() {
    const auto q = workload::make_quantizer(2, -1.0, 1.0);
    const auto r = workload::quantize_dequantize(q, 0.5);
    const bool example = r.level == 2 && std::abs(r.value - 1.0 / 3.0) <= 1e-6;

    Rng rng(5);
    std::uniform_int_distribution<int> bits(2, 8);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_real_distribution<double> width(1e-3, 20.0);
    std::size_t bound = 0, mono = 0, idem = 0;
    for (int t = 0; t < 100000; ++t) {
        const double lo = u(rng);
        const auto qq = workload::make_quantizer(bits(rng), lo, lo + width(rng));
        const double x = 1.5 * u(rng);
        const double y = 1.5 * u(rng);
        const auto rx = workload::quantize_dequantize(qq, x);
        const auto ry = workload::quantize_dequantize(qq, y);
        if (std::abs(rx.value - std::clamp(x, qq.x_min, qq.x_max)) > qq.scale() / 2 * (1 + 1e-9)) ++bound;
        if ((x <= y) != (rx.level <= ry.level) && x <= y) ++mono;
        const auto again = workload::quantize_dequantize(qq, rx.value);
        if (again.level != rx.level || again.value != rx.value) ++idem;
    }
    std::size_t card = 0;
    for (int b = 2; b <= 8; ++b) {
        const auto qq = workload::make_quantizer(b, -2.5, 3.5);
        std::set<double> seen;
        for (int t = 0; t < 20000; ++t) seen.insert(workload::quantize_dequantize(qq, u(rng)).value);
        if (seen.size() > (std::size_t{1} << b)) ++card;
    }
    return {example && bound + mono + idem + card == 0,
            "example level " + std::to_string(r.level) + " value " + num(r.value, 7) + "; violations bound " +
                std::to_string(bound) + ", monotone " + std::to_string(mono) + ", idempotent " +
                std::to_string(idem) + ", cardinality " + std::to_string(card)};
}

workload::Layer dense(std::size_t in, std::size_t out, int group) {
    workload::Layer l;
    l.in_dim = in;
    l.out_dim = out;
    l.weights.assign(in * out, 0.0);
    l.bias.assign(out, 0.0);
    l.group_id = group;
    return l;
}

Outcome objective_closed_forms() {
    const workload::Workload tiny({dense(8, 16, 0), dense(16, 4, 2)});
    const BitConfig all8{{8, 8, 8, 8}};
    const double m8 = workload::model_ratio(tiny, all8);
    const double b8 = workload::bitops_ratio(tiny, all8);
    const workload::Workload p({dense(19, 5, 0), dense(5, 50, 2)});
    const double m = workload::model_ratio(p, BitConfig{{8, 8, 4, 4}});
    const workload::Workload mac({dense(50, 20, 0), dense(20, 100, 2)});
    const double b = workload::bitops_ratio(mac, BitConfig{{4, 8, 2, 4}});
    const bool ok = m8 == 0.25 && b8 == 0.0625 && m == 0.15625 && b == 0.015625;
    return {ok, "all-8 model " + num(m8, 17) + " bitops " + num(b8, 17) + "; derived " + num(m, 17) + ", " +
                    num(b, 17)};
}

Outcome dtlz2_convergence() {
    std::vector<std::string> gaps;
    bool ok = true;
    double slowest = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto t0 = Clock::now();
        engine::EngineConfig cfg;
        cfg.objectives = 3;
        cfg.max_generations = 200;
        cfg.seed = seed;
        harness::BenchmarkEvaluator ev("dtlz2-3d");
        const auto result =
            engine::run_search(cfg, full_roster(12, {2, 3, 4, 5, 6, 7, 8}, nullptr, {"continuous", "floor"}), ev);
        double gap = 0.0;
        for (const auto& e : result.archive.entries()) {
            double sq = 0.0;
            for (double f : e.objectives) sq += f * f;
            gap += std::abs(sq - 1.0);
        }
        gap /= static_cast<double>(std::max<std::size_t>(1, result.archive.size()));
        const double dt = seconds_since(t0);
        slowest = std::max(slowest, dt);
        ok = ok && gap <= 0.05 && dt < 60.0;
        gaps.push_back(num(gap, 3));
    }
    return {ok, "mean |sum f^2 - 1| per seed " + join(gaps) + "; slowest seed " + num(slowest, 3) + " s"};
}

Outcome gnn_viability() {
    auto w = std::make_shared<const workload::Workload>(workload::bundled_workload("small", 0));
    const auto split = workload::dataset_for(*w).evaluation;
    const std::vector<int> bits{2, 3, 4, 5, 6, 7, 8};
    const auto graph = std::make_shared<const WorkloadGraph>(workload::build_graph(*w));
    // no archive can beat the ideal point (zero error, all-minimum widths)
    const BitConfig cheapest{std::vector<int>(w->quantizer_count(), bits.front())};
    const std::vector<ObjectiveVector> ideal{
        {0.0, workload::model_ratio(*w, cheapest), workload::bitops_ratio(*w, cheapest)}};
    const double floor_r2 = mo::r2_indicator(ideal, mo::uniform_weight_vectors(3, 25), std::vector<double>(3, 0.0));
    std::vector<std::string> ratios;
    double best_possible = 0.0;
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        engine::EngineConfig cfg;
        cfg.seed = seed;
        cfg.max_generations = 100;
        harness::QuantizationEvaluator ev(w, split, 1, 1);
        const auto result =
            engine::run_search(cfg, full_roster(w->quantizer_count(), bits, graph, {"gcn", "graph_unet"}), ev);
        double first = 0.0;
        for (const auto& rec : result.history) {
            if (rec.generation == 1) first = rec.archive_r2;
        }
        const double last = result.history.back().archive_r2;
        const double ratio = last / first;
        best_possible = std::max(best_possible, floor_r2 / first);
        if (ratio <= 0.8) ++improved;
        ratios.push_back(num(ratio, 3));
    }
    return {improved >= 4, "final/generation-1 archive R2 per seed " + join(ratios) + "; " +
                               std::to_string(improved) + "/5 at or below 0.8; ideal-point bound allows at best " +
                               num(best_possible, 3)};
}

Outcome determinism() {
    const auto base = fs::temp_directory_path() / "nemo_acceptance_determinism";
    fs::remove_all(base);
    harness::RunConfig cfg;
    cfg.engine.seed = 17;
    cfg.threads = 1;
    (void)harness::run_search(cfg, base / "t1");
    cfg.threads = 8;
    (void)harness::run_search(cfg, base / "t8");
    const auto a = slurp(base / "t1" / "pareto.csv");
    const auto b = slurp(base / "t8" / "pareto.csv");
    fs::remove_all(base);
    const auto rows = std::count(a.begin(), a.end(), '\n');
    return {!a.empty() && a == b, std::string(a == b ? "identical" : "different") + " pareto.csv (" +
                                      std::to_string(a.size()) + " bytes, " + std::to_string(rows - 1) +
                                      " rows) for threads 1 and 8"};
}

Outcome ssne_structure() {
    gnn::Architecture arch;
    arch.in_features = 3;
    arch.graph_hidden = 3;
    arch.attention_hidden = 3;
    arch.heads = 1;
    arch.outputs = 3;
    Rng rng(3);
    const auto p1 = gnn::GnnGenome::random(arch, rng);
    const auto p2 = gnn::GnnGenome::random(arch, rng);
    const neuro::SsneConfig cfg;
    std::set<std::vector<bool>> masks;
    std::size_t broken = 0;
    for (int t = 0; t < 50000 && masks.size() < 512; ++t) {
        auto [c1, c2] = neuro::ssne_crossover(p1, p2, cfg, rng);
        for (std::size_t k = 0; k < p1.params().size(); ++k) {
            const auto& x = p1.params()[k].data;
            const auto& y = p2.params()[k].data;
            const auto& u = c1.params()[k].data;
            const auto& v = c2.params()[k].data;
            for (std::size_t e = 0; e < x.size(); ++e) {
                std::multiset<double> before{x[e], y[e]}, after{u[e], v[e]};
                if (before != after) ++broken;
            }
        }
        std::vector<bool> mask(9);
        for (int e = 0; e < 9; ++e) mask[e] = c1.params()[0].data[e] != p1.params()[0].data[e];
        masks.insert(mask);
    }

    gnn::Architecture big;
    big.kind = gnn::GraphLayer::graph_unet;
    big.in_features = 8;
    big.outputs = 7;
    const auto g = gnn::GnnGenome::random(big, rng);
    std::size_t wrong = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto m = neuro::ssne_mutate(g, cfg, rng);
        for (std::size_t k = 0; k < g.params().size(); ++k) {
            std::size_t diff = 0;
            for (std::size_t e = 0; e < g.params()[k].data.size(); ++e) {
                diff += g.params()[k].data[e] != m.params()[k].data[e];
            }
            const auto n = g.params()[k].numel();
            const auto want = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
            if (diff != want) ++wrong;
        }
    }
    return {masks.size() == 512 && broken == 0 && wrong == 0,
            "3x3 swap masks seen " + std::to_string(masks.size()) + "/512, conservation violations " +
                std::to_string(broken) + "; mutation count mismatches " + std::to_string(wrong) + " over 1000 x " +
                std::to_string(g.params().size()) + " tensors"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    bool strict = false;
    std::vector<int> only;
    app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
    app.add_option("--only", only, "Criterion numbers to run")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"oracle equivalence", oracle_equivalence},
        {"R2 correctness", r2_correctness},
        {"UCB and allocation arithmetic", ucb_allocation},
        {"species dynamics", species_dynamics},
        {"quantizer properties", quantizer_properties},
        {"objective closed forms", objective_closed_forms},
        {"dtlz2-3d convergence", dtlz2_convergence},
        {"GNN species viability", gnn_viability},
        {"determinism", determinism},
        {"SSNE structure", ssne_structure},
    };
    int failures = 0;
    int errors = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = checks[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
            ++errors;
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << checks[i].first
                  << "): " << o.detail << " [" << num(seconds_since(t0), 3) << " s]" << std::endl;
    }
    std::cout << (failures ? std::to_string(failures) + " criterion failing" : "all criteria pass") << std::endl;
    if (errors) return 2;
    return strict && failures ? 1 : 0;
}
