#include "nemo/engine.hpp"

#include <algorithm>
#include <unordered_set>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace nemo::engine {

namespace {

constexpr double kUtilityEpsilon = 1e-12;

bool finite_vector(const ObjectiveVector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void EngineConfig::validate(std::size_t species_count) const {
    require(species_count >= 1, "engine: at least one species is required");
    require(min_species_size >= 1, "engine: min_species_size must be >= 1");
    require(initial_species_size >= 1, "engine: initial_species_size must be >= 1");
    require(population_size >= species_count * min_species_size,
            "engine: population_size " + std::to_string(population_size) + " is below " +
                std::to_string(species_count) + " species x min size " + std::to_string(min_species_size));
    require(objectives >= 2, "engine: at least two objectives are required");
    require(reference_point_target >= objectives, "engine: reference point target must be >= objectives");
    require(ucb_coefficient >= 0.0 && std::isfinite(ucb_coefficient), "engine: bad UCB coefficient");
}

std::vector<std::optional<ObjectiveVector>> FunctionEvaluator::evaluate(
    std::span<const EvaluationRequest> batch) {
    std::vector<std::optional<ObjectiveVector>> out;
    out.reserve(batch.size());
    for (const auto& req : batch) {
        try {
            out.emplace_back(fn_(req));
        } catch (const std::exception&) {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

bool ParetoArchive::insert(ArchiveEntry entry) {
    for (const auto& e : entries_) {
        if (mo::dominates(e.objectives, entry.objectives)) return false;
        if (e.objectives == entry.objectives && e.bits == entry.bits) return false;
    }
    std::erase_if(entries_, [&](const ArchiveEntry& e) { return mo::dominates(entry.objectives, e.objectives); });
    entries_.push_back(std::move(entry));
    if (capacity_ > 0 && entries_.size() > capacity_) prune();
    return true;
}

void ParetoArchive::prune() {
    // drop members of the most crowded pairs until back under capacity
    while (entries_.size() > capacity_) {
        std::size_t victim = 0;
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < entries_.size(); ++j) {
                if (i == j) continue;
                double d = 0.0;
                for (std::size_t k = 0; k < entries_[i].objectives.size(); ++k) {
                    const double diff = entries_[i].objectives[k] - entries_[j].objectives[k];
                    d += diff * diff;
                }
                nearest = std::min(nearest, d);
            }
            if (nearest < closest) {
                closest = nearest;
                victim = i;
            }
        }
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
}

std::vector<ObjectiveVector> ParetoArchive::objectives() const {
    std::vector<ObjectiveVector> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.objectives);
    return out;
}

bool ParetoArchive::consistent() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        for (std::size_t j = 0; j < entries_.size(); ++j) {
            if (i != j && mo::dominates(entries_[i].objectives, entries_[j].objectives)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

std::vector<Utility> species_utility(std::span<const std::vector<ObjectiveVector>> sets,
                                     const mo::WeightVectorSet& weights, std::span<const double> utopia) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Utility> out(sets.size(), Utility{inf, 0.0});
    double lo = inf;
    double hi = -inf;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].empty()) continue;
        out[s].raw_r2 = mo::r2_indicator(sets[s], weights, utopia);
        lo = std::min(lo, out[s].raw_r2);
        hi = std::max(hi, out[s].raw_r2);
    }
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].empty()) continue;
        out[s].utility = (hi == lo) ? 0.5 : (hi - out[s].raw_r2) / (hi - lo + kUtilityEpsilon);
    }
    return out;
}

std::vector<double> ucb_scores(std::span<const double> utilities,
                               std::span<const std::uint64_t> evaluations, double c) {
    require(utilities.size() == evaluations.size(), "ucb_scores: size mismatch");
    double total = 0.0;
    for (auto y : evaluations) total += static_cast<double>(std::max<std::uint64_t>(y, 1));
    std::vector<double> out(utilities.size());
    for (std::size_t s = 0; s < utilities.size(); ++s) {
        const double y = static_cast<double>(std::max<std::uint64_t>(evaluations[s], 1));
        out[s] = utilities[s] + c * std::sqrt(std::log(total) / y);
    }
    return out;
}

std::vector<std::size_t> allocate_sizes(std::span<const double> scores, std::size_t population,
                                        std::size_t min_size) {
    const std::size_t n = scores.size();
    require(n >= 1, "allocate_sizes: no species");
    require(population >= n * min_size, "allocate_sizes: population below species x min size");
    for (double s : scores) require(std::isfinite(s), "allocate_sizes: non-finite score");

    const double lowest = *std::min_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double s : scores) total += s - lowest;

    std::vector<std::size_t> alloc(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double share = total > 0.0 ? (scores[s] - lowest) / total : 1.0 / static_cast<double>(n);
        const auto rounded = static_cast<std::size_t>(std::llround(static_cast<double>(population) * share));
        alloc[s] = std::max(min_size, rounded);
    }
    std::size_t sum = std::accumulate(alloc.begin(), alloc.end(), std::size_t{0});
    while (sum > population) {
        // largest allocation above the floor; ties shrink the later species
        std::size_t pick = n;
        for (std::size_t s = 0; s < n; ++s) {
            if (alloc[s] > min_size && (pick == n || alloc[s] >= alloc[pick])) pick = s;
        }
        --alloc[pick];
        --sum;
    }
    while (sum < population) {
        std::size_t pick = 0;
        for (std::size_t s = 1; s < n; ++s) {
            if (alloc[s] < alloc[pick]) pick = s;
        }
        ++alloc[pick];
        ++sum;
    }
    return alloc;
}

nlohmann::json to_json(const GenerationRecord& record) {
    nlohmann::json species = nlohmann::json::array();
    for (const auto& s : record.species) {
        species.push_back({{"name", s.name},
                           {"raw_r2", std::isfinite(s.raw_r2) ? nlohmann::json(s.raw_r2) : nlohmann::json()},
                           {"utility", s.utility},
                           {"ucb", s.ucb},
                           {"allocation", s.allocation},
                           {"archive_share", s.archive_share},
                           {"evaluations", s.evaluations}});
    }
    return {{"generation", record.generation},
            {"evaluations", record.evaluations},
            {"archive_size", record.archive_size},
            {"archive_r2", record.archive_r2},
            {"species", std::move(species)}};
}

std::vector<species::Genome> produce_offspring(const species::Species& sp,
                                               std::span<const Individual> members, Rng& rng) {
    require(!members.empty(), "produce_offspring: species has no members");
    std::vector<species::Genome> out;
    out.reserve(members.size());
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += 2) {
        const auto& a = *members[order[i]].genome;
        if (i + 1 < order.size()) {
            auto [c1, c2] = sp.crossover(a, *members[order[i + 1]].genome, rng);
            out.push_back(sp.mutate(c1, rng));
            out.push_back(sp.mutate(c2, rng));
        } else {
            out.push_back(sp.mutate(a, rng));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig config, std::vector<species::SpeciesPtr> roster, Evaluator& evaluator)
    : config_(config), roster_(std::move(roster)), evaluator_(evaluator), rng_(config.seed),
      archive_(config.archive_capacity) {
    config_.validate(roster_.size());
    for (const auto& sp : roster_) require(sp != nullptr, "engine: null species");
    require(evaluator_.objectives() == config_.objectives, "engine: evaluator objective count mismatch");
    weights_ = mo::uniform_weight_vectors(config_.objectives, config_.reference_point_target);
    utopia_.assign(config_.objectives, 0.0);
    logger_ = [](const std::string& msg) { std::cerr << "nemo: " << msg << '\n'; };
}

std::size_t Engine::population() const {
    std::size_t n = 0;
    for (const auto& m : members_) n += m.size();
    return n;
}

Individual Engine::spawn(std::size_t s, species::Genome genome) {
    Individual ind;
    ind.id = next_id_++;
    ind.species = s;
    ind.bits = roster_[s]->decode(genome);
    ind.genome = std::make_shared<const species::Genome>(std::move(genome));
    ind.birth_generation = generation_;
    return ind;
}

void Engine::evaluate(std::vector<Individual>& batch) {
    if (batch.empty()) return;
    std::vector<EvaluationRequest> requests;
    requests.reserve(batch.size());
    for (const auto& ind : batch) requests.push_back({&ind.bits, ind.genome.get(), ind.species});
    auto results = evaluator_.evaluate(requests);
    require(results.size() == batch.size(), "evaluator returned a misaligned batch");
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto& r = results[i];
        if (!r || r->size() != config_.objectives || !finite_vector(*r)) {
            logger_("evaluation of individual " + std::to_string(batch[i].id) + " (species " +
                    roster_[batch[i].species]->name() + ") failed; assigning worst-case fitness");
            batch[i].fitness.assign(config_.objectives, 1.0);
        } else {
            batch[i].fitness = std::move(*r);
        }
        ++species_evaluations_[batch[i].species];
    }
    total_evaluations_ += batch.size();
}

void Engine::initialize() {
    if (initialized_) return;
    const auto n = roster_.size();
    members_.assign(n, {});
    species_evaluations_.assign(n, 0);
    std::vector<Individual> fresh;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < config_.initial_species_size; ++i) {
            fresh.push_back(spawn(s, roster_[s]->create(rng_)));
        }
    }
    evaluate(fresh);
    std::vector<std::vector<Individual>> pools(n);
    for (const auto& ind : fresh) pools[ind.species].push_back(ind);
    initialized_ = true;
    select_round(std::move(pools), std::move(fresh));
}

const GenerationRecord& Engine::step() {
    if (!initialized_) initialize();
    ++generation_;
    const auto n = roster_.size();
    std::unordered_set<BitConfig, BitConfigHash> present;
    for (const auto& sp : members_) {
        for (const auto& ind : sp) present.insert(ind.bits);
    }
    std::vector<Individual> offspring;
    for (std::size_t s = 0; s < n; ++s) {
        for (auto& g : produce_offspring(*roster_[s], members_[s], rng_)) {
            auto bits = roster_[s]->decode(g);
            for (std::size_t k = 0; k < config_.duplicate_retries && present.contains(bits); ++k) {
                g = roster_[s]->mutate(g, rng_);
                bits = roster_[s]->decode(g);
            }
            present.insert(bits);
            offspring.push_back(spawn(s, std::move(g)));
        }
    }
    evaluate(offspring);
    std::vector<std::vector<Individual>> pools = members_;
    for (const auto& ind : offspring) pools[ind.species].push_back(ind);
    select_round(std::move(pools), std::move(offspring));
    return history_.back();
}

void Engine::select_round(std::vector<std::vector<Individual>> pools, std::vector<Individual> fresh) {
    const auto n = roster_.size();

    std::vector<std::vector<ObjectiveVector>> sets(n);
    for (std::size_t s = 0; s < n; ++s) {
        for (const auto& ind : pools[s]) sets[s].push_back(ind.fitness);
    }
    const auto util = species_utility(sets, weights_, utopia_);
    std::vector<double> u(n);
    for (std::size_t s = 0; s < n; ++s) u[s] = util[s].utility;
    const auto scores = ucb_scores(u, species_evaluations_, config_.ucb_coefficient);
    const auto alloc = allocate_sizes(scores, config_.population_size, config_.min_species_size);

    // global ranking over the combined pool
    std::vector<ObjectiveVector> combined;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < pools[s].size(); ++i) {
            combined.push_back(pools[s][i].fitness);
            where.emplace_back(s, i);
        }
    }
    const auto order = mo::nsga3_order(combined, weights_, rng_);
    // repeated bit configurations queue behind every distinct one
    std::vector<std::size_t> distinct, repeats;
    std::unordered_set<BitConfig, BitConfigHash> seen;
    for (auto idx : order.order) {
        const auto& bits = pools[where[idx].first][where[idx].second].bits;
        (seen.insert(bits).second ? distinct : repeats).push_back(idx);
    }
    distinct.insert(distinct.end(), repeats.begin(), repeats.end());
    std::vector<std::vector<std::size_t>> ranked(n);
    for (auto idx : distinct) ranked[where[idx].first].push_back(where[idx].second);

    std::vector<std::vector<Individual>> survivors(n);
    std::vector<Individual> topups;
    for (std::size_t s = 0; s < n; ++s) {
        const auto keep = std::min(alloc[s], ranked[s].size());
        for (std::size_t r = 0; r < keep; ++r) survivors[s].push_back(pools[s][ranked[s][r]]);
        if (survivors[s].size() < alloc[s]) {
            std::uniform_int_distribution<std::size_t> pick(0, survivors[s].size() - 1);
            for (std::size_t k = survivors[s].size(); k < alloc[s]; ++k) {
                const auto& parent = survivors[s][pick(rng_)];
                topups.push_back(spawn(s, roster_[s]->mutate(*parent.genome, rng_)));
            }
        }
    }
    evaluate(topups);
    for (auto& ind : topups) {
        survivors[ind.species].push_back(ind);
        fresh.push_back(std::move(ind));
    }

    for (const auto& ind : fresh) {
        archive_.insert({ind.id, ind.bits, ind.fitness, ind.species, ind.birth_generation});
    }
    members_ = std::move(survivors);

    std::vector<std::size_t> archive_count(n, 0);
    for (const auto& e : archive_.entries()) ++archive_count[e.species];

    GenerationRecord record;
    record.generation = generation_;
    record.evaluations = total_evaluations_;
    record.archive_size = archive_.size();
    record.archive_r2 = archive_.size() > 0 ? mo::r2_indicator(archive_.objectives(), weights_, utopia_) : 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        SpeciesStats st;
        st.name = roster_[s]->name();
        st.raw_r2 = util[s].raw_r2;
        st.utility = util[s].utility;
        st.ucb = scores[s];
        st.evaluations = species_evaluations_[s];
        st.allocation = alloc[s];
        st.archive_share = archive_.size() > 0
                               ? static_cast<double>(archive_count[s]) / static_cast<double>(archive_.size())
                               : 0.0;
        record.species.push_back(std::move(st));
    }
    history_.push_back(std::move(record));
    if (check_invariants_) verify();
    if (telemetry_) telemetry_(history_.back());
}

void Engine::verify() const {
    const auto& rec = history_.back();
    std::size_t total = 0;
    std::uint64_t evals = 0;
    for (std::size_t s = 0; s < members_.size(); ++s) {
        if (members_[s].size() != rec.species[s].allocation) {
            throw std::logic_error("invariant: species size differs from its allocation");
        }
        if (members_[s].size() < config_.min_species_size) {
            throw std::logic_error("invariant: species below minimum size");
        }
        for (const auto& ind : members_[s]) {
            if (ind.species != s || !ind.evaluated()) throw std::logic_error("invariant: bad member");
        }
        total += members_[s].size();
        evals += species_evaluations_[s];
    }
    if (total != config_.population_size) throw std::logic_error("invariant: population size drifted");
    if (evals != total_evaluations_) throw std::logic_error("invariant: evaluation counts disagree");
    if (!archive_.consistent()) throw std::logic_error("invariant: archive holds dominated points");
}

SearchResult Engine::run() {
    initialize();
    while (generation_ < config_.max_generations) step();
    SearchResult result;
    result.archive = archive_;
    result.history = history_;
    result.evaluations = total_evaluations_;
    result.reference_points = weights_.size();
    result.reference_divisions = weights_.divisions;
    for (const auto& sp : roster_) result.species_names.push_back(sp->name());
    return result;
}

SearchResult run_search(const EngineConfig& config, std::vector<species::SpeciesPtr> roster,
                        Evaluator& evaluator, Engine::Telemetry telemetry) {
    Engine engine(config, std::move(roster), evaluator);
    engine.set_telemetry(std::move(telemetry));
    return engine.run();
}

}  // namespace nemo::engine
