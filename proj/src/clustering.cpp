#include "gmil/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "gmil/errors.hpp"

namespace gmil {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

// k-means++ seeding over the given points.
Matrix kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows(), d = points.cols();
    Matrix centroids(k, d);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.uniform_index(n);
    for (std::size_t j = 0; j < d; ++j) centroids(0, j) = points(first, j);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dd = sq_dist(points.data() + i * d, centroids.data() + (c - 1) * d, d);
            if (dd < dist[i]) dist[i] = dd;
            total += dist[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (acc >= r) { chosen = i; break; }
            }
        } else {
            chosen = rng.uniform_index(n);
        }
        for (std::size_t j = 0; j < d; ++j) centroids(c, j) = points(chosen, j);
    }
    return centroids;
}

std::size_t nearest_centroid(const Matrix& centroids, const double* p, std::size_t d) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        double dd = sq_dist(p, centroids.data() + c * d, d);
        if (dd < best_d) { best_d = dd; best = c; }
    }
    return best;
}

}  // namespace

namespace {

KMeansResult kmeans_once(const Matrix& points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter, double tol) {
    const std::size_t n = points.rows(), d = points.cols();
    if (n == 0) throw DataError("kmeans: empty input");
    if (k == 0 || n < k)
        throw DataError("kmeans: need n >= k >= 1, got n=" + std::to_string(n) +
                        " k=" + std::to_string(k));
    Rng rng(seed);
    Matrix centroids = kmeanspp_seed(points, k, rng);
    std::vector<std::size_t> assign(n, 0);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i)
            assign[i] = nearest_centroid(centroids, points.data() + i * d, d);

        Matrix sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t j = 0; j < d; ++j) sums(assign[i], j) += points(i, j);
        }
        // Empty-cluster repair: give it the point farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] <= 1) continue;
                double dd = sq_dist(points.data() + i * d,
                                    centroids.data() + assign[i] * d, d);
                if (dd > far_d) { far_d = dd; far = i; }
            }
            std::size_t old = assign[far];
            --counts[old];
            for (std::size_t j = 0; j < d; ++j) sums(old, j) -= points(far, j);
            assign[far] = c;
            counts[c] = 1;
            for (std::size_t j = 0; j < d; ++j) sums(c, j) = points(far, j);
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < d; ++j) {
                double nc = sums(c, j) / static_cast<double>(counts[c]);
                double diff = nc - centroids(c, j);
                shift += diff * diff;
                centroids(c, j) = nc;
            }
        }
        if (std::sqrt(shift) < tol) break;
    }

    KMeansResult res;
    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        assign[i] = nearest_centroid(centroids, points.data() + i * d, d);
        res.inertia += sq_dist(points.data() + i * d, centroids.data() + assign[i] * d, d);
    }
    res.centroids = std::move(centroids);
    res.assignments = std::move(assign);
    return res;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter, double tol, std::size_t restarts) {
    if (restarts == 0) restarts = 1;
    KMeansResult best;
    for (std::size_t r = 0; r < restarts; ++r) {
        KMeansResult run =
            kmeans_once(points, k, seed + 0x9e3779b97f4a7c15ULL * r, max_iter, tol);
        if (r == 0 || run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

void MiniBatchKMeans::partial_fit(const Matrix& batch) {
    if (batch.rows() == 0) return;
    if (!initialized()) {
        if (batch.rows() < k_)
            throw DataError("minibatch kmeans: first batch smaller than k");
        Rng rng(seed_);
        centroids_ = kmeanspp_seed(batch, k_, rng);
        counts_.assign(k_, 0);
    }
    const std::size_t d = centroids_.cols();
    if (batch.cols() != d) throw DataError("minibatch kmeans: dimension mismatch");
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        const double* x = batch.data() + i * d;
        std::size_t c = nearest_centroid(centroids_, x, d);
        ++counts_[c];
        double eta = 1.0 / static_cast<double>(counts_[c]);
        double* cc = centroids_.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) cc[j] += eta * (x[j] - cc[j]);
    }
}

std::size_t MiniBatchKMeans::nearest(const double* point, std::size_t d) const {
    if (!initialized()) throw InternalError("minibatch kmeans not fitted");
    if (d != centroids_.cols()) throw DataError("minibatch kmeans: dimension mismatch");
    return nearest_centroid(centroids_, point, d);
}

std::vector<std::size_t> MiniBatchKMeans::assign(const Matrix& points) const {
    std::vector<std::size_t> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i)
        out[i] = nearest(points.data() + i * points.cols(), points.cols());
    return out;
}

void symmetric_eigen(const Matrix& sym, std::vector<double>& values, Matrix& vectors) {
    const std::size_t n = sym.rows();
    if (sym.cols() != n) throw InternalError("symmetric_eigen: not square");
    Matrix a = sym;
    Matrix v = Matrix::identity(n);
    const std::size_t max_sweeps = 100;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    values.resize(n);
    vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) vectors(i, j) = v(i, order[j]);
    }
}

PcaResult pca_fit_transform(const Matrix& x, std::size_t out_dim) {
    const std::size_t n = x.rows(), d = x.cols();
    if (out_dim < 1 || out_dim > std::min(n, d))
        throw DataError("pca: out_dim out of range");
    PcaResult res;
    res.basis.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) res.basis.mean[j] += x(i, j);
    for (double& m : res.basis.mean) m /= static_cast<double>(n);

    Matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = x(i, j) - res.basis.mean[j];

    Matrix cov = scale(1.0 / static_cast<double>(n), matmul(transpose(centered), centered));
    std::vector<double> values;
    Matrix vectors;
    symmetric_eigen(cov, values, vectors);

    double total_var = 0.0;
    for (double v : values) total_var += std::max(v, 0.0);

    res.basis.components = Matrix(d, out_dim);
    res.basis.explained_ratio.resize(out_dim);
    for (std::size_t j = 0; j < out_dim; ++j) {
        // Sign convention: largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::fabs(vectors(i, j)) > std::fabs(vectors(arg, j))) arg = i;
        double sgn = vectors(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i)
            res.basis.components(i, j) = sgn * vectors(i, j);
        res.basis.explained_ratio[j] =
            total_var > 0.0 ? std::max(values[j], 0.0) / total_var : 0.0;
    }
    res.projected = matmul(centered, res.basis.components);
    return res;
}

Matrix pca_transform(const PcaBasis& basis, const Matrix& x) {
    if (x.cols() != basis.mean.size()) throw DataError("pca_transform: dim mismatch");
    Matrix centered(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            centered(i, j) = x(i, j) - basis.mean[j];
    return matmul(centered, basis.components);
}

ComponentResult connected_components(const std::vector<int>& grid_labels,
                                     std::size_t height, std::size_t width,
                                     int background, int connectivity) {
    if (grid_labels.size() != height * width)
        throw DataError("connected_components: grid size mismatch");
    if (connectivity != 4 && connectivity != 8)
        throw DataError("connected_components: connectivity must be 4 or 8");
    ComponentResult res;
    res.region.assign(height * width, -1);
    std::vector<std::pair<int, int>> offsets = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    if (connectivity == 8) {
        offsets.push_back({-1, -1});
        offsets.push_back({-1, 1});
        offsets.push_back({1, -1});
        offsets.push_back({1, 1});
    }
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < grid_labels.size(); ++start) {
        if (grid_labels[start] == background || res.region[start] != -1) continue;
        int id = static_cast<int>(res.count++);
        res.region[start] = id;
        stack.assign(1, start);
        while (!stack.empty()) {
            std::size_t cur = stack.back();
            stack.pop_back();
            std::size_t r = cur / width, c = cur % width;
            for (auto [dr, dc] : offsets) {
                std::size_t nr = r + static_cast<std::size_t>(dr);
                std::size_t nc = c + static_cast<std::size_t>(dc);
                if (nr >= height || nc >= width) continue;  // unsigned wrap covers <0
                std::size_t idx = nr * width + nc;
                if (res.region[idx] != -1) continue;
                if (grid_labels[idx] != grid_labels[cur]) continue;
                res.region[idx] = id;
                stack.push_back(idx);
            }
        }
    }
    return res;
}

double cluster_purity(const std::vector<std::size_t>& assignments,
                      const std::vector<int>& class_labels) {
    if (assignments.empty() || assignments.size() != class_labels.size())
        throw DataError("cluster_purity: empty or mismatched inputs");
    std::map<std::size_t, std::map<int, std::size_t>> counts;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        ++counts[assignments[i]][class_labels[i]];
    std::size_t agree = 0;
    for (const auto& [cluster, by_class] : counts) {
        std::size_t best = 0;
        for (const auto& [cls, cnt] : by_class) best = std::max(best, cnt);
        agree += best;
    }
    return static_cast<double>(agree) / static_cast<double>(assignments.size());
}

}  // namespace gmil
