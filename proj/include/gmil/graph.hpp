#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmil/clustering.hpp"
#include "gmil/matrix.hpp"
#include "gmil/slide.hpp"

namespace gmil {

// Graph view of one slide. Edges are undirected, stored once with i < j and
// without self-loops (self-loops enter at adjacency normalization).
// node_to_patches partitions the slide's patches.
struct WsiGraph {
    std::string slide_id;
    Matrix node_features;                                // N x d
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> edge_weights;                    // empty or per-edge
    std::vector<std::vector<std::size_t>> node_to_patches;

    std::size_t node_count() const { return node_features.rows(); }
    void validate() const;
};

// One node per patch; edge where grid Chebyshev distance == 1
// (8-connectivity; 4 restricts to axis neighbors).
WsiGraph build_patch_graph(const SlideRecord& slide, int connectivity = 8);

// Streams slides through mini-batch k-means, chunk slides per partial fit.
MiniBatchKMeans fit_global_clusters(const Manifest& manifest,
                                    const std::vector<std::size_t>& indices,
                                    std::size_t k_regions, std::size_t chunk,
                                    std::uint64_t seed);

// Shared region-graph assembly: connected components of equal-cluster
// patches (cc_connectivity, default 4), one node per region with the mean
// member feature, RAG edges where member patches are 8-adjacent.
WsiGraph build_region_graph(const SlideRecord& slide,
                            const std::vector<std::size_t>& patch_clusters,
                            int cc_connectivity = 4);

std::vector<WsiGraph> build_region_graph_global(const Manifest& manifest,
                                                std::size_t k_regions,
                                                std::size_t chunk,
                                                std::uint64_t seed);

WsiGraph build_region_graph_local(const SlideRecord& slide, std::size_t k_regions,
                                  std::uint64_t seed);

// k-means in feature space, fully connected over centroids, edge weight =
// cosine distance. Spatial information is deliberately discarded.
WsiGraph build_centroid_graph(const SlideRecord& slide, std::size_t k,
                              std::uint64_t seed);

enum class GraphKind { Patch, RegionGlobal, RegionLocal, Centroid };
GraphKind parse_graph_kind(const std::string& name);
std::string graph_kind_name(GraphKind kind);

// Edge-list dump ("# nodes N", then "i j [w]") plus a binary feature sidecar
// (u32 rows, u32 cols, f32 row-major, the slide-file matrix layout).
void dump_graph(const WsiGraph& graph, const std::string& edge_path,
                const std::string& feature_path);

}  // namespace gmil
