#include "nemo/neuro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nemo::neuro {

void SsneConfig::validate() const {
    require(cr_dist >= 0.0 && cr_dist <= 1.0, "ssne: cr_dist must be in [0, 1]");
    require(mut_dist >= 0.0 && mut_dist <= 1.0, "ssne: mut_dist must be in [0, 1]");
    require(mut_fraction > 0.0 && mut_fraction <= 1.0, "ssne: mut_fraction must be in (0, 1]");
    require(mut_strength >= 0.0, "ssne: mut_strength must be non-negative");
}

std::size_t mutation_count(std::size_t numel, double fraction) {
    if (numel == 0) return 0;
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(numel) - 1e-9));
    return std::clamp<std::size_t>(n, 1, numel);
}

std::pair<gnn::GnnGenome, gnn::GnnGenome> ssne_crossover(const gnn::GnnGenome& a,
                                                         const gnn::GnnGenome& b,
                                                         const SsneConfig& cfg, Rng& rng) {
    cfg.validate();
    require(a.arch() == b.arch(), "ssne_crossover: architectures differ");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto pa = a.params();
    auto pb = b.params();
    for (std::size_t t = 0; t < pa.size(); ++t) {
        if (!(unit(rng) < cfg.cr_dist)) continue;
        for (std::size_t e = 0; e < pa[t].data.size(); ++e) {
            if (coin(rng)) std::swap(pa[t].data[e], pb[t].data[e]);
        }
    }
    return {gnn::GnnGenome(a.arch(), std::move(pa)), gnn::GnnGenome(b.arch(), std::move(pb))};
}

gnn::GnnGenome ssne_mutate(const gnn::GnnGenome& genome, const SsneConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!(unit(rng) < cfg.mut_dist)) return genome;

    auto params = genome.params();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::size_t> index;
    for (auto& t : params) {
        const auto n = t.data.size();
        const auto pick = mutation_count(n, cfg.mut_fraction);
        index.resize(n);
        std::iota(index.begin(), index.end(), 0);
        // partial Fisher-Yates: the first `pick` slots are a uniform sample
        for (std::size_t i = 0; i < pick; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, n - 1);
            std::swap(index[i], index[d(rng)]);
        }
        for (std::size_t i = 0; i < pick; ++i) {
            auto& x = t.data[index[i]];
            const double sigma = cfg.mut_strength * std::abs(x) + SsneConfig::kNoiseFloor;
            x += sigma * gauss(rng);
        }
    }
    return gnn::GnnGenome(genome.arch(), std::move(params));
}

BitConfig decode_logits(const gnn::Tensor& logits, std::span<const int> bit_set, BitChoice choice,
                        Rng* rng) {
    require(logits.shape.size() == 2 && logits.cols() == bit_set.size(),
            "decode: logit width does not match bit set");
    require(choice == BitChoice::argmax || rng != nullptr, "decode: sampling needs a generator");
    BitConfig config;
    config.bits.reserve(logits.rows());
    std::vector<double> prob(bit_set.size());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double top = logits.at(r, 0);
        for (std::size_t c = 1; c < prob.size(); ++c) top = std::max(top, logits.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < prob.size(); ++c) z += prob[c] = std::exp(logits.at(r, c) - top);
        for (auto& p : prob) p /= z;

        std::size_t pick = 0;
        if (choice == BitChoice::argmax) {
            for (std::size_t c = 1; c < prob.size(); ++c) {
                if (prob[c] > prob[pick]) pick = c;
            }
        } else {
            std::discrete_distribution<std::size_t> draw(prob.begin(), prob.end());
            pick = draw(*rng);
        }
        config.bits.push_back(bit_set[pick]);
    }
    return config;
}

BitConfig decode_neuro(const gnn::GnnGenome& genome, const WorkloadGraph& graph,
                       std::span<const int> bit_set) {
    return decode_logits(gnn::gnn_infer(genome, graph), bit_set);
}

}  // namespace nemo::neuro
