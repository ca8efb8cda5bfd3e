#pragma once

#include <cstdint>
#include <vector>

#include "gmil/matrix.hpp"
#include "gmil/rng.hpp"

namespace gmil {

struct KMeansResult {
    Matrix centroids;                   // k x d
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// inertia. Empty clusters are repaired by reassigning the point farthest
// from its current centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300, double tol = 1e-6,
                    std::size_t restarts = 10);

// Streaming k-means per Sculley: c <- c + (1/n_c)(x - c) with per-centroid
// running counts. The first batch seeds centroids via k-means++.
class MiniBatchKMeans {
public:
    MiniBatchKMeans(std::size_t k, std::uint64_t seed) : k_(k), seed_(seed) {}

    void partial_fit(const Matrix& batch);
    bool initialized() const { return !counts_.empty(); }
    const Matrix& centroids() const { return centroids_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::size_t k() const { return k_; }

    std::size_t nearest(const double* point, std::size_t d) const;
    std::vector<std::size_t> assign(const Matrix& points) const;

private:
    std::size_t k_;
    std::uint64_t seed_;
    Matrix centroids_;
    std::vector<std::uint64_t> counts_;
};

struct PcaBasis {
    std::vector<double> mean;            // d
    Matrix components;                   // d x d' (columns are components)
    std::vector<double> explained_ratio; // d', descending
};

struct PcaResult {
    PcaBasis basis;
    Matrix projected;  // n x d'
};

PcaResult pca_fit_transform(const Matrix& x, std::size_t out_dim);
Matrix pca_transform(const PcaBasis& basis, const Matrix& x);

// Symmetric eigendecomposition (cyclic Jacobi). Returns eigenvalues
// descending and eigenvectors as matching columns.
void symmetric_eigen(const Matrix& sym, std::vector<double>& values, Matrix& vectors);

// Same-label connected-component labeling on a grid. background cells
// (label == background) get region -1; region ids dense from 0.
struct ComponentResult {
    std::vector<int> region;  // H*W, row-major
    std::size_t count = 0;
};
ComponentResult connected_components(const std::vector<int>& grid_labels,
                                     std::size_t height, std::size_t width,
                                     int background, int connectivity = 4);

double cluster_purity(const std::vector<std::size_t>& assignments,
                      const std::vector<int>& class_labels);

}  // namespace gmil
