#pragma once

// The species-managing evolutionary loop: every generation each species
// doubles itself with its own operators, species are scored by the R2
// indicator of their members, population share is allocated with a UCB rule,
// and each species keeps its best members by global reference-point ranking.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nemo/common.hpp"
#include "nemo/mo.hpp"
#include "nemo/species.hpp"

namespace nemo::engine {

struct EngineConfig {
    std::size_t population_size = 50;
    std::size_t initial_species_size = 10;
    std::size_t min_species_size = 5;
    std::size_t reference_point_target = 25;
    double ucb_coefficient = 0.9;
    std::size_t max_generations = 100;
    std::uint64_t seed = 0;
    std::size_t objectives = 3;
    /// 0 keeps every non-dominated point.
    std::size_t archive_capacity = 0;
    /// Extra mutations tried on a child whose bit configuration is already
    /// present in the population or among earlier children.
    std::size_t duplicate_retries = 10;

    void validate(std::size_t species_count) const;
};

struct Individual {
    std::uint64_t id = 0;
    std::shared_ptr<const species::Genome> genome;
    std::size_t species = 0;
    BitConfig bits;
    ObjectiveVector fitness;  // empty until evaluated
    std::size_t birth_generation = 0;

    [[nodiscard]] bool evaluated() const noexcept { return !fitness.empty(); }
};

struct SpeciesStats {
    std::string name;
    double raw_r2 = 0.0;
    double utility = 0.0;
    double ucb = 0.0;
    std::uint64_t evaluations = 0;
    std::size_t allocation = 0;
    double archive_share = 0.0;
};

// ---------------------------------------------------------------------------
// Evaluation contract

struct EvaluationRequest {
    const BitConfig* bits = nullptr;
    const species::Genome* genome = nullptr;
    std::size_t species = 0;
};

/// Scores a batch of candidates. Results are positionally aligned with the
/// requests; an empty optional marks a failed evaluation. Implementations
/// may evaluate concurrently but must be pure functions of each request.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    [[nodiscard]] virtual std::size_t objectives() const = 0;
    virtual std::vector<std::optional<ObjectiveVector>> evaluate(
        std::span<const EvaluationRequest> batch) = 0;
};

/// Sequential adapter around a per-candidate function; exceptions become
/// failed evaluations.
class FunctionEvaluator final : public Evaluator {
public:
    using Fn = std::function<ObjectiveVector(const EvaluationRequest&)>;
    FunctionEvaluator(std::size_t objectives, Fn fn) : objectives_(objectives), fn_(std::move(fn)) {}

    [[nodiscard]] std::size_t objectives() const override { return objectives_; }
    std::vector<std::optional<ObjectiveVector>> evaluate(std::span<const EvaluationRequest> batch) override;

private:
    std::size_t objectives_;
    Fn fn_;
};

// ---------------------------------------------------------------------------
// Archive

struct ArchiveEntry {
    std::uint64_t id = 0;
    BitConfig bits;
    ObjectiveVector objectives;
    std::size_t species = 0;
    std::size_t generation = 0;
};

/// Mutually non-dominated set of everything evaluated so far.
class ParetoArchive {
public:
    explicit ParetoArchive(std::size_t capacity = 0) : capacity_(capacity) {}

    /// False when the point is dominated or already present.
    bool insert(ArchiveEntry entry);

    [[nodiscard]] const std::vector<ArchiveEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] std::vector<ObjectiveVector> objectives() const;
    /// Brute-force mutual non-dominance check.
    [[nodiscard]] bool consistent() const;

private:
    void prune();

    std::size_t capacity_;
    std::vector<ArchiveEntry> entries_;
};

// ---------------------------------------------------------------------------
// Pure pieces of a generation

struct Utility {
    double raw_r2;
    double utility;
};

/// R2 of each species' fitness set, min-max normalized so 1 is best. Empty
/// sets get the worst utility (raw R2 reported as +inf).
std::vector<Utility> species_utility(std::span<const std::vector<ObjectiveVector>> sets,
                                     const mo::WeightVectorSet& weights,
                                     std::span<const double> utopia);

/// u_s + c * sqrt(ln(sum y) / y_s); a zero count is treated as one.
std::vector<double> ucb_scores(std::span<const double> utilities,
                               std::span<const std::uint64_t> evaluations, double c);

/// Proportional split of `population` after shifting scores by their minimum,
/// floored at `min_size`, then repaired to the exact total.
std::vector<std::size_t> allocate_sizes(std::span<const double> scores, std::size_t population,
                                        std::size_t min_size);

struct GenerationRecord {
    std::size_t generation = 0;
    std::uint64_t evaluations = 0;
    std::size_t archive_size = 0;
    double archive_r2 = 0.0;
    std::vector<SpeciesStats> species;
};

nlohmann::json to_json(const GenerationRecord& record);

struct SearchResult {
    ParetoArchive archive;
    std::vector<GenerationRecord> history;
    std::uint64_t evaluations = 0;
    std::size_t reference_points = 0;
    int reference_divisions = 0;
    std::vector<std::string> species_names;
};

class Engine {
public:
    using Telemetry = std::function<void(const GenerationRecord&)>;
    using Logger = std::function<void(const std::string&)>;

    Engine(EngineConfig config, std::vector<species::SpeciesPtr> roster, Evaluator& evaluator);

    /// Creates, evaluates and allocates the initial population (generation 0).
    void initialize();
    /// One generation; initializes first if needed.
    const GenerationRecord& step();
    /// initialize() plus max_generations steps.
    SearchResult run();

    void set_telemetry(Telemetry t) { telemetry_ = std::move(t); }
    void set_logger(Logger l) { logger_ = std::move(l); }
    /// Re-verifies the population and archive invariants after every round.
    void set_check_invariants(bool on) { check_invariants_ = on; }

    [[nodiscard]] const EngineConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<std::vector<Individual>>& members() const noexcept { return members_; }
    [[nodiscard]] const ParetoArchive& archive() const noexcept { return archive_; }
    [[nodiscard]] const std::vector<GenerationRecord>& history() const noexcept { return history_; }
    [[nodiscard]] const mo::WeightVectorSet& weights() const noexcept { return weights_; }
    [[nodiscard]] std::uint64_t evaluations() const noexcept { return total_evaluations_; }
    [[nodiscard]] std::size_t generation() const noexcept { return generation_; }
    [[nodiscard]] std::size_t population() const;

private:
    Individual spawn(std::size_t s, species::Genome genome);
    void evaluate(std::vector<Individual>& batch);
    void select_round(std::vector<std::vector<Individual>> pools, std::vector<Individual> fresh);
    void verify() const;

    EngineConfig config_;
    std::vector<species::SpeciesPtr> roster_;
    Evaluator& evaluator_;
    Rng rng_;
    mo::WeightVectorSet weights_;
    ObjectiveVector utopia_;

    std::vector<std::vector<Individual>> members_;
    std::vector<std::uint64_t> species_evaluations_;
    std::vector<SpeciesStats> stats_;
    ParetoArchive archive_;
    std::vector<GenerationRecord> history_;
    std::uint64_t total_evaluations_ = 0;
    std::uint64_t next_id_ = 0;
    std::size_t generation_ = 0;
    bool initialized_ = false;
    bool check_invariants_ = false;
    Telemetry telemetry_;
    Logger logger_;
};

/// Doubles a species: pairs of shuffled members go through crossover, every
/// child through mutation; an odd member out (or a lone member) is mutated.
/// Returns exactly members.size() genomes.
std::vector<species::Genome> produce_offspring(const species::Species& sp,
                                               std::span<const Individual> members, Rng& rng);

SearchResult run_search(const EngineConfig& config, std::vector<species::SpeciesPtr> roster,
                        Evaluator& evaluator, Engine::Telemetry telemetry = {});

}  // namespace nemo::engine
