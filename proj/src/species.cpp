#include "nemo/species.hpp"

#include <algorithm>

namespace nemo::species {

namespace {

void check_bit_set(const std::vector<int>& bits) {
    require(bits.size() >= 2, "bit set needs at least two widths");
    require(std::is_sorted(bits.begin(), bits.end()) &&
                std::adjacent_find(bits.begin(), bits.end()) == bits.end(),
            "bit set must be strictly ascending");
    require(bits.front() >= 2, "bit widths must be >= 2");
}

template <class T>
const T& as(const Genome& g, const std::string& species) {
    const T* p = std::get_if<T>(&g);
    require(p != nullptr, "species '" + species + "' received a foreign genome type");
    return *p;
}

}  // namespace

DirectSpecies::DirectSpecies(std::string name, direct::Rounding rounding, std::size_t length,
                             std::vector<int> bit_set, DirectOptions options)
    : name_(std::move(name)), rounding_(rounding), length_(length), bit_set_(std::move(bit_set)),
      options_(options) {
    check_bit_set(bit_set_);
    require(length_ >= 1, "direct species needs at least one gene");
    bounds_ = {static_cast<double>(bit_set_.front()), static_cast<double>(bit_set_.back())};
    if (options_.per_gene_prob <= 0.0) options_.per_gene_prob = 1.0 / static_cast<double>(length_);
}

Genome DirectSpecies::create(Rng& rng) const {
    return direct::random_genome(length_, rounding_, bounds_, rng);
}

std::pair<Genome, Genome> DirectSpecies::crossover(const Genome& a, const Genome& b, Rng& rng) const {
    const auto& ga = as<direct::DirectGenome>(a, name_);
    const auto& gb = as<direct::DirectGenome>(b, name_);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!(unit(rng) < options_.crossover_prob)) return {ga, gb};
    auto [c1, c2] = direct::sbx_crossover(ga, gb, options_.eta_c, bounds_, rng);
    return {std::move(c1), std::move(c2)};
}

Genome DirectSpecies::mutate(const Genome& g, Rng& rng) const {
    const auto& genome = as<direct::DirectGenome>(g, name_);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!(unit(rng) < options_.mutation_prob)) return genome;
    return direct::polynomial_mutation(genome, options_.eta_m, options_.per_gene_prob, bounds_, rng);
}

BitConfig DirectSpecies::decode(const Genome& g) const {
    return direct::decode_direct(as<direct::DirectGenome>(g, name_), bit_set_);
}

NeuroSpecies::NeuroSpecies(std::string name, gnn::Architecture arch,
                           std::shared_ptr<const WorkloadGraph> graph, std::vector<int> bit_set,
                           neuro::SsneConfig ssne)
    : name_(std::move(name)), arch_(arch), graph_(std::move(graph)), bit_set_(std::move(bit_set)),
      ssne_(ssne) {
    check_bit_set(bit_set_);
    require(graph_ != nullptr, "neuro species needs a workload graph");
    require(arch_.in_features == graph_->feature_width, "gnn input width must match graph features");
    require(arch_.outputs == bit_set_.size(), "gnn output width must equal the bit set size");
    ssne_.validate();
    (void)gnn::parameter_specs(arch_);
}

Genome NeuroSpecies::create(Rng& rng) const { return gnn::GnnGenome::random(arch_, rng); }

std::pair<Genome, Genome> NeuroSpecies::crossover(const Genome& a, const Genome& b, Rng& rng) const {
    auto [c1, c2] = neuro::ssne_crossover(as<gnn::GnnGenome>(a, name_), as<gnn::GnnGenome>(b, name_),
                                          ssne_, rng);
    return {std::move(c1), std::move(c2)};
}

Genome NeuroSpecies::mutate(const Genome& g, Rng& rng) const {
    return neuro::ssne_mutate(as<gnn::GnnGenome>(g, name_), ssne_, rng);
}

BitConfig NeuroSpecies::decode(const Genome& g) const {
    return neuro::decode_neuro(as<gnn::GnnGenome>(g, name_), *graph_, bit_set_);
}

SpeciesPtr make_species(const std::string& name, std::size_t quantizers, const std::vector<int>& bit_set,
                        std::shared_ptr<const WorkloadGraph> graph) {
    if (name == "continuous") {
        return std::make_shared<DirectSpecies>(name, direct::Rounding::nearest, quantizers, bit_set);
    }
    if (name == "floor") {
        return std::make_shared<DirectSpecies>(name, direct::Rounding::floor, quantizers, bit_set);
    }
    if (name == "gcn" || name == "graph_unet") {
        if (!graph) throw ConfigError("species '" + name + "' needs a workload graph");
        gnn::Architecture arch;
        arch.kind = gnn::graph_layer_from_string(name);
        arch.in_features = graph->feature_width;
        arch.outputs = bit_set.size();
        return std::make_shared<NeuroSpecies>(name, arch, std::move(graph), bit_set);
    }
    throw ConfigError("unknown species '" + name + "' (expected continuous, floor, gcn or graph_unet)");
}

}  // namespace nemo::species
