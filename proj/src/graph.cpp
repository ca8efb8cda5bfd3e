#include "gmil/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "gmil/errors.hpp"

namespace gmil {

void WsiGraph::validate() const {
    const std::size_t n = node_count();
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto [i, j] : edges) {
        if (i >= n || j >= n) throw InternalError("graph edge endpoint out of range");
        if (i == j) throw InternalError("graph stores a self-loop");
        auto key = std::minmax(i, j);
        if (!seen.insert({key.first, key.second}).second)
            throw InternalError("duplicate undirected edge");
    }
    if (!edge_weights.empty() && edge_weights.size() != edges.size())
        throw InternalError("edge weight count != edge count");
    std::vector<bool> covered;
    std::size_t total = 0;
    for (const auto& patches : node_to_patches) {
        for (std::size_t p : patches) {
            if (p >= covered.size()) covered.resize(p + 1, false);
            if (covered[p]) throw InternalError("patch mapped to two nodes");
            covered[p] = true;
            ++total;
        }
    }
    for (std::size_t p = 0; p < covered.size(); ++p)
        if (!covered[p]) throw InternalError("patch not mapped to any node");
    (void)total;
}

WsiGraph build_patch_graph(const SlideRecord& slide, int connectivity) {
    slide.validate();
    if (connectivity != 4 && connectivity != 8)
        throw DataError("patch graph connectivity must be 4 or 8");
    WsiGraph g;
    g.slide_id = slide.slide_id;
    g.node_features = slide.features;
    g.node_to_patches.resize(slide.n_patches());
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> by_coord;
    for (std::size_t i = 0; i < slide.n_patches(); ++i) {
        g.node_to_patches[i] = {i};
        by_coord[slide.coords[i]] = i;
    }
    for (std::size_t i = 0; i < slide.n_patches(); ++i) {
        auto [x, y] = slide.coords[i];
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                if (dx == 0 && dy == 0) continue;
                if (connectivity == 4 && dx != 0 && dy != 0) continue;
                auto it = by_coord.find({x + dx, y + dy});
                if (it == by_coord.end() || it->second <= i) continue;
                g.edges.emplace_back(i, it->second);
            }
        }
    }
    return g;
}

MiniBatchKMeans fit_global_clusters(const Manifest& manifest,
                                    const std::vector<std::size_t>& indices,
                                    std::size_t k_regions, std::size_t chunk,
                                    std::uint64_t seed) {
    if (indices.empty()) throw DataError("region graph: empty dataset");
    if (k_regions < 1) throw DataError("region graph: k_regions must be >= 1");
    MiniBatchKMeans mbk(k_regions, seed);
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        std::size_t end = std::min(start + chunk, indices.size());
        std::vector<SlideRecord> slides;
        std::size_t rows = 0, dim = 0;
        for (std::size_t i = start; i < end; ++i) {
            slides.push_back(load_manifest_slide(manifest.entries[indices[i]]));
            rows += slides.back().n_patches();
            dim = slides.back().feature_dim();
        }
        Matrix batch(rows, dim);
        std::size_t row = 0;
        for (const SlideRecord& s : slides)
            for (std::size_t p = 0; p < s.n_patches(); ++p, ++row)
                for (std::size_t j = 0; j < dim; ++j) batch(row, j) = s.features(p, j);
        mbk.partial_fit(batch);
    }
    return mbk;
}

WsiGraph build_region_graph(const SlideRecord& slide,
                            const std::vector<std::size_t>& patch_clusters,
                            int cc_connectivity) {
    slide.validate();
    if (patch_clusters.size() != slide.n_patches())
        throw DataError("region graph: cluster assignment count mismatch");

    // Grid over the coordinate bounding box; cells without a patch are
    // background for component labeling.
    std::int32_t min_x = std::numeric_limits<std::int32_t>::max(), min_y = min_x;
    std::int32_t max_x = std::numeric_limits<std::int32_t>::min(), max_y = max_x;
    for (auto [x, y] : slide.coords) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    const std::size_t w = static_cast<std::size_t>(max_x - min_x) + 1;
    const std::size_t h = static_cast<std::size_t>(max_y - min_y) + 1;
    const int background = -1;
    std::vector<int> grid(h * w, background);
    std::vector<std::size_t> cell_patch(h * w, SIZE_MAX);
    for (std::size_t p = 0; p < slide.n_patches(); ++p) {
        auto [x, y] = slide.coords[p];
        std::size_t idx = static_cast<std::size_t>(y - min_y) * w +
                          static_cast<std::size_t>(x - min_x);
        grid[idx] = static_cast<int>(patch_clusters[p]);
        cell_patch[idx] = p;
    }
    ComponentResult comp = connected_components(grid, h, w, background, cc_connectivity);

    WsiGraph g;
    g.slide_id = slide.slide_id;
    g.node_to_patches.resize(comp.count);
    std::vector<int> patch_region(slide.n_patches(), -1);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        if (cell_patch[idx] == SIZE_MAX) continue;
        int region = comp.region[idx];
        g.node_to_patches[static_cast<std::size_t>(region)].push_back(cell_patch[idx]);
        patch_region[cell_patch[idx]] = region;
    }
    for (auto& patches : g.node_to_patches) std::sort(patches.begin(), patches.end());

    const std::size_t dim = slide.feature_dim();
    g.node_features = Matrix(comp.count, dim);
    for (std::size_t n = 0; n < comp.count; ++n) {
        for (std::size_t p : g.node_to_patches[n])
            for (std::size_t j = 0; j < dim; ++j)
                g.node_features(n, j) += slide.features(p, j);
        double inv = 1.0 / static_cast<double>(g.node_to_patches[n].size());
        for (std::size_t j = 0; j < dim; ++j) g.node_features(n, j) *= inv;
    }

    // RAG edges: regions whose patches touch under 8-connectivity.
    std::set<std::pair<std::size_t, std::size_t>> rag;
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        if (cell_patch[idx] == SIZE_MAX) continue;
        std::size_t r = idx / w, c = idx % w;
        int reg = comp.region[idx];
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                std::size_t nr = r + static_cast<std::size_t>(dy);
                std::size_t nc = c + static_cast<std::size_t>(dx);
                if (nr >= h || nc >= w) continue;
                std::size_t nidx = nr * w + nc;
                if (cell_patch[nidx] == SIZE_MAX) continue;
                int nreg = comp.region[nidx];
                if (nreg == reg) continue;
                std::pair<std::size_t, std::size_t> key{
                    static_cast<std::size_t>(std::min(reg, nreg)),
                    static_cast<std::size_t>(std::max(reg, nreg))};
                rag.insert(key);
            }
        }
    }
    g.edges.assign(rag.begin(), rag.end());
    return g;
}

std::vector<WsiGraph> build_region_graph_global(const Manifest& manifest,
                                                std::size_t k_regions,
                                                std::size_t chunk,
                                                std::uint64_t seed) {
    std::vector<std::size_t> all(manifest.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    MiniBatchKMeans mbk = fit_global_clusters(manifest, all, k_regions, chunk, seed);
    std::vector<WsiGraph> graphs;
    graphs.reserve(all.size());
    for (const auto& entry : manifest.entries) {
        SlideRecord slide = load_manifest_slide(entry);
        graphs.push_back(build_region_graph(slide, mbk.assign(slide.features)));
    }
    return graphs;
}

WsiGraph build_region_graph_local(const SlideRecord& slide, std::size_t k_regions,
                                  std::uint64_t seed) {
    if (slide.n_patches() < k_regions)
        throw DataError("local region graph: fewer patches than k_regions");
    KMeansResult km = kmeans(slide.features, k_regions, seed);
    return build_region_graph(slide, km.assignments);
}

WsiGraph build_centroid_graph(const SlideRecord& slide, std::size_t k,
                              std::uint64_t seed) {
    if (slide.n_patches() < k)
        throw DataError("centroid graph: fewer patches than k");
    KMeansResult km = kmeans(slide.features, k, seed);
    WsiGraph g;
    g.slide_id = slide.slide_id;
    g.node_to_patches.resize(k);
    for (std::size_t p = 0; p < km.assignments.size(); ++p)
        g.node_to_patches[km.assignments[p]].push_back(p);

    const std::size_t dim = slide.feature_dim();
    g.node_features = Matrix(k, dim);
    for (std::size_t n = 0; n < k; ++n) {
        if (g.node_to_patches[n].empty())
            throw DataError(
                "centroid graph: empty cluster, fewer distinct patch features than k");
        for (std::size_t p : g.node_to_patches[n])
            for (std::size_t j = 0; j < dim; ++j)
                g.node_features(n, j) += slide.features(p, j);
        double inv = 1.0 / static_cast<double>(g.node_to_patches[n].size());
        for (std::size_t j = 0; j < dim; ++j) g.node_features(n, j) *= inv;
    }

    std::vector<double> norms(k);
    for (std::size_t n = 0; n < k; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += g.node_features(n, j) * g.node_features(n, j);
        norms[n] = std::sqrt(s);
        if (norms[n] == 0.0)
            throw DataError("centroid graph: zero-norm node feature, cosine undefined");
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d)
                dot += g.node_features(i, d) * g.node_features(j, d);
            g.edges.emplace_back(i, j);
            g.edge_weights.push_back(1.0 - dot / (norms[i] * norms[j]));
        }
    }
    return g;
}

GraphKind parse_graph_kind(const std::string& name) {
    if (name == "patch") return GraphKind::Patch;
    if (name == "region-global") return GraphKind::RegionGlobal;
    if (name == "region-local") return GraphKind::RegionLocal;
    if (name == "centroid") return GraphKind::Centroid;
    throw UsageError("unknown graph kind: " + name);
}

std::string graph_kind_name(GraphKind kind) {
    switch (kind) {
        case GraphKind::Patch: return "patch";
        case GraphKind::RegionGlobal: return "region-global";
        case GraphKind::RegionLocal: return "region-local";
        case GraphKind::Centroid: return "centroid";
    }
    throw InternalError("unknown graph kind");
}

void dump_graph(const WsiGraph& graph, const std::string& edge_path,
                const std::string& feature_path) {
    std::ofstream out(edge_path);
    if (!out) throw DataError("cannot open for write: " + edge_path);
    out << "# nodes " << graph.node_count() << "\n";
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        out << graph.edges[e].first << ' ' << graph.edges[e].second;
        if (!graph.edge_weights.empty()) out << ' ' << graph.edge_weights[e];
        out << '\n';
    }
    std::ofstream fout(feature_path, std::ios::binary);
    if (!fout) throw DataError("cannot open for write: " + feature_path);
    auto write_u32 = [&](std::uint32_t v) {
        unsigned char buf[4];
        for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        fout.write(reinterpret_cast<const char*>(buf), 4);
    };
    write_u32(static_cast<std::uint32_t>(graph.node_features.rows()));
    write_u32(static_cast<std::uint32_t>(graph.node_features.cols()));
    for (double v : graph.node_features.vec()) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(bits);
    }
}

}  // namespace gmil
