#pragma once

// Sub-structure neuroevolution over GNN genomes: tensor-wise uniform
// crossover, value-proportional Gaussian mutation, and logits-to-bits
// decoding.

#include <span>
#include <utility>

#include "nemo/common.hpp"
#include "nemo/gnn.hpp"

namespace nemo::neuro {

struct SsneConfig {
    double cr_dist = 1.0;
    double mut_dist = 1.0;
    double mut_fraction = 0.05;
    double mut_strength = 0.1;

    /// Added to |x| in the noise scale so zero weights still move.
    static constexpr double kNoiseFloor = 1e-3;

    void validate() const;
};

/// ceil(fraction * numel), at least one.
std::size_t mutation_count(std::size_t numel, double fraction);

std::pair<gnn::GnnGenome, gnn::GnnGenome> ssne_crossover(const gnn::GnnGenome& a,
                                                         const gnn::GnnGenome& b,
                                                         const SsneConfig& cfg, Rng& rng);

gnn::GnnGenome ssne_mutate(const gnn::GnnGenome& genome, const SsneConfig& cfg, Rng& rng);

enum class BitChoice { argmax, sample };

/// Softmax per row then argmax (ties to the lower width) or a draw from the
/// row distribution. `rng` is only used when sampling.
BitConfig decode_logits(const gnn::Tensor& logits, std::span<const int> bit_set,
                        BitChoice choice = BitChoice::argmax, Rng* rng = nullptr);

BitConfig decode_neuro(const gnn::GnnGenome& genome, const WorkloadGraph& graph,
                       std::span<const int> bit_set);

}  // namespace nemo::neuro
