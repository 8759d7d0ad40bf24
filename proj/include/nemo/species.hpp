#pragma once

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nemo/direct.hpp"
#include "nemo/gnn.hpp"
#include "nemo/graph.hpp"
#include "nemo/neuro.hpp"

namespace nemo::species {

using Genome = std::variant<direct::DirectGenome, gnn::GnnGenome>;

/// A structurally distinct sub-population: owns its genome encoding, its
/// variation operators and its decoder to bit widths. Implementations are
/// stateless; all randomness comes in through `rng`.
class Species {
public:
    virtual ~Species() = default;

    [[nodiscard]] virtual const std::string& name() const = 0;
    virtual Genome create(Rng& rng) const = 0;
    virtual std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) const = 0;
    virtual Genome mutate(const Genome& g, Rng& rng) const = 0;
    [[nodiscard]] virtual BitConfig decode(const Genome& g) const = 0;
};

using SpeciesPtr = std::shared_ptr<const Species>;

struct DirectOptions {
    double eta_c = 20.0;
    double eta_m = 20.0;
    /// Per-gene mutation rate; a value <= 0 selects 1/genome_length.
    double per_gene_prob = 0.0;
    double crossover_prob = 1.0;
    double mutation_prob = 1.0;
};

class DirectSpecies final : public Species {
public:
    DirectSpecies(std::string name, direct::Rounding rounding, std::size_t length,
                  std::vector<int> bit_set, DirectOptions options = {});

    [[nodiscard]] const std::string& name() const override { return name_; }
    Genome create(Rng& rng) const override;
    std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) const override;
    Genome mutate(const Genome& g, Rng& rng) const override;
    [[nodiscard]] BitConfig decode(const Genome& g) const override;

    [[nodiscard]] direct::Bounds bounds() const noexcept { return bounds_; }
    [[nodiscard]] double per_gene_prob() const noexcept { return options_.per_gene_prob; }

private:
    std::string name_;
    direct::Rounding rounding_;
    std::size_t length_;
    std::vector<int> bit_set_;
    direct::Bounds bounds_;
    DirectOptions options_;
};

class NeuroSpecies final : public Species {
public:
    NeuroSpecies(std::string name, gnn::Architecture arch, std::shared_ptr<const WorkloadGraph> graph,
                 std::vector<int> bit_set, neuro::SsneConfig ssne = {});

    [[nodiscard]] const std::string& name() const override { return name_; }
    Genome create(Rng& rng) const override;
    std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) const override;
    Genome mutate(const Genome& g, Rng& rng) const override;
    [[nodiscard]] BitConfig decode(const Genome& g) const override;

    [[nodiscard]] const gnn::Architecture& arch() const noexcept { return arch_; }

private:
    std::string name_;
    gnn::Architecture arch_;
    std::shared_ptr<const WorkloadGraph> graph_;
    std::vector<int> bit_set_;
    neuro::SsneConfig ssne_;
};

/// The four roster names: continuous, floor, gcn, graph_unet.
inline const std::vector<std::string>& roster_names() {
    static const std::vector<std::string> names{"continuous", "floor", "gcn", "graph_unet"};
    return names;
}

/// Builds a roster species by name for a problem of `quantizers` genes.
/// The GNN species need `graph`; direct species ignore it.
SpeciesPtr make_species(const std::string& name, std::size_t quantizers, const std::vector<int>& bit_set,
                        std::shared_ptr<const WorkloadGraph> graph);

}  // namespace nemo::species
