#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace nemo {

/// Node-feature graph handed to the GNN species. Features are row-major
/// (nodes x feature_width); edges are directed pairs, treated as undirected
/// by message passing.
struct WorkloadGraph {
    std::size_t nodes = 0;
    std::size_t feature_width = 0;
    std::vector<double> features;
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    [[nodiscard]] double feature(std::size_t node, std::size_t col) const {
        return features[node * feature_width + col];
    }
};

}  // namespace nemo
