#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gmil/clustering.hpp"
#include "gmil/errors.hpp"
#include "test_util.hpp"

using namespace gmil;

TEST_CASE("kmeans separates two obvious pairs") {
    Matrix pts = Matrix::from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
    KMeansResult r = kmeans(pts, 2, 1);
    std::vector<std::vector<double>> got = {
        {r.centroids(0, 0), r.centroids(0, 1)}, {r.centroids(1, 0), r.centroids(1, 1)}};
    std::sort(got.begin(), got.end());
    CHECK(got[0][0] == doctest::Approx(0.0));
    CHECK(got[0][1] == doctest::Approx(0.5));
    CHECK(got[1][0] == doctest::Approx(10.0));
    CHECK(got[1][1] == doctest::Approx(10.5));
}

TEST_CASE("kmeans edge cases") {
    Matrix pts = Matrix::from_rows({{1, 2}, {3, 4}, {5, 0}});
    KMeansResult one = kmeans(pts, 1, 0);
    CHECK(one.centroids(0, 0) == doctest::Approx(3.0));
    CHECK(one.centroids(0, 1) == doctest::Approx(2.0));

    KMeansResult all = kmeans(pts, 3, 0);
    CHECK(all.inertia == doctest::Approx(0.0));
    CHECK_THROWS_AS(kmeans(pts, 4, 0), DataError);
}

TEST_CASE("kmeans final assignment is a Lloyd fixed point") {
    Rng rng(9);
    Matrix pts = testutil::random_matrix(20, 3, rng);
    KMeansResult r = kmeans(pts, 4, 2);
    // re-assign: no point prefers another centroid
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        double own = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
            double diff = pts(i, d) - r.centroids(r.assignments[i], d);
            own += diff * diff;
        }
        for (std::size_t c = 0; c < 4; ++c) {
            double alt = 0.0;
            for (std::size_t d = 0; d < 3; ++d) {
                double diff = pts(i, d) - r.centroids(c, d);
                alt += diff * diff;
            }
            CHECK(own <= alt + 1e-9);
        }
    }
    // re-average: centroids already are member means
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> mean(3, 0.0);
        std::size_t n = 0;
        for (std::size_t i = 0; i < pts.rows(); ++i)
            if (r.assignments[i] == c) {
                ++n;
                for (std::size_t d = 0; d < 3; ++d) mean[d] += pts(i, d);
            }
        REQUIRE(n > 0);
        for (std::size_t d = 0; d < 3; ++d)
            CHECK(r.centroids(c, d) == doctest::Approx(mean[d] / n).epsilon(1e-9));
    }
}

TEST_CASE("minibatch kmeans running mean") {
    MiniBatchKMeans mb(1, 0);
    Matrix b1 = Matrix::from_rows({{0.0}});
    mb.partial_fit(b1);
    CHECK(mb.centroids()(0, 0) == doctest::Approx(0.0));
    Matrix b2 = Matrix::from_rows({{2.0}});
    mb.partial_fit(b2);
    CHECK(mb.centroids()(0, 0) == doctest::Approx(1.0));

    Matrix empty(0, 1);
    mb.partial_fit(empty);
    CHECK(mb.centroids()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("minibatch kmeans deterministic") {
    Rng rng(4);
    Matrix batch = testutil::random_matrix(30, 4, rng);
    auto run = [&] {
        MiniBatchKMeans mb(3, 7);
        mb.partial_fit(batch);
        mb.partial_fit(batch);
        return mb.centroids();
    };
    CHECK(run() == run());
}

TEST_CASE("pca closed forms") {
    Matrix collinear = Matrix::from_rows({{1, 1}, {2, 2}, {3, 3}, {-1, -1}});
    PcaResult r = pca_fit_transform(collinear, 1);
    CHECK(r.basis.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));

    Matrix spread = Matrix::from_rows({{1, 0}, {-1, 0}, {0, 0.1}, {0, -0.1}});
    PcaResult r2 = pca_fit_transform(spread, 1);
    CHECK(std::fabs(r2.basis.components(0, 0)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r2.basis.components(0, 0) > 0.0);  // sign convention
    CHECK(std::fabs(r2.basis.components(1, 0)) <= 1e-9);
}

TEST_CASE("full-rank pca preserves pairwise distances") {
    Rng rng(12);
    Matrix x = testutil::random_matrix(10, 4, rng);
    PcaResult r = pca_fit_transform(x, 4);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = i + 1; j < x.rows(); ++j) {
            double orig = 0.0, proj = 0.0;
            for (std::size_t d = 0; d < 4; ++d) {
                double a = x(i, d) - x(j, d);
                double b = r.projected(i, d) - r.projected(j, d);
                orig += a * a;
                proj += b * b;
            }
            CHECK(std::fabs(std::sqrt(orig) - std::sqrt(proj)) <= 1e-8);
        }
    CHECK_THROWS_AS(pca_fit_transform(x, 5), DataError);
    CHECK_THROWS_AS(pca_fit_transform(x, 0), DataError);
}

TEST_CASE("pca_transform matches fit projection") {
    Rng rng(13);
    Matrix x = testutil::random_matrix(8, 3, rng);
    PcaResult r = pca_fit_transform(x, 2);
    Matrix again = pca_transform(r.basis, x);
    CHECK(max_abs_diff(again, r.projected) <= 1e-12);
}

TEST_CASE("symmetric eigen reconstructs A v = lambda v") {
    Rng rng(21);
    Matrix a = testutil::random_matrix(5, 5, rng);
    Matrix sym(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) sym(i, j) = 0.5 * (a(i, j) + a(j, i));
    std::vector<double> vals;
    Matrix vecs;
    symmetric_eigen(sym, vals, vecs);
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) CHECK(vals[k] >= vals[k + 1]);
    for (std::size_t k = 0; k < 5; ++k) {
        for (std::size_t i = 0; i < 5; ++i) {
            double av = 0.0;
            for (std::size_t j = 0; j < 5; ++j) av += sym(i, j) * vecs(j, k);
            CHECK(av == doctest::Approx(vals[k] * vecs(i, k)).epsilon(1e-8).scale(1.0));
        }
    }
}

namespace {

// independent recursive flood fill oracle
void flood(const std::vector<int>& g, std::vector<int>& out, std::size_t h,
           std::size_t w, std::size_t r, std::size_t c, int id, int conn) {
    out[r * w + c] = id;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (conn == 4 && dr != 0 && dc != 0) continue;
            long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
            if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w))
                continue;
            std::size_t idx = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
            if (out[idx] == -2 && g[idx] == g[r * w + c])
                flood(g, out, h, w, static_cast<std::size_t>(nr),
                      static_cast<std::size_t>(nc), id, conn);
        }
}

std::pair<std::vector<int>, int> flood_oracle(const std::vector<int>& g, std::size_t h,
                                              std::size_t w, int background, int conn) {
    std::vector<int> out(h * w, -2);
    int next = 0;
    for (std::size_t i = 0; i < h * w; ++i)
        if (g[i] == background) out[i] = -1;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            if (out[r * w + c] == -2) flood(g, out, h, w, r, c, next++, conn);
    return {out, next};
}

}  // namespace

TEST_CASE("connected components hand cases") {
    ComponentResult uniform = connected_components({5, 5, 5, 5}, 2, 2, -1, 4);
    CHECK(uniform.count == 1);

    ComponentResult four = connected_components({1, 2, 2, 1}, 2, 2, -1, 4);
    CHECK(four.count == 4);
    ComponentResult two = connected_components({1, 2, 2, 1}, 2, 2, -1, 8);
    CHECK(two.count == 2);
    CHECK(two.region[0] == two.region[3]);
    CHECK(two.region[1] == two.region[2]);

    ComponentResult bg = connected_components({-1, 3, 3, -1}, 2, 2, -1, 4);
    CHECK(bg.count == 2);
    CHECK(bg.region[0] == -1);
}

TEST_CASE("connected components agree with flood-fill oracle") {
    Rng rng(31);
    for (int t = 0; t < 40; ++t) {
        std::size_t h = 1 + rng.uniform_index(16), w = 1 + rng.uniform_index(16);
        std::vector<int> grid(h * w);
        for (int& v : grid) {
            v = static_cast<int>(rng.uniform_index(4)) - 1;  // -1 background possible
        }
        int conn = (t % 2 == 0) ? 4 : 8;
        ComponentResult got = connected_components(grid, h, w, -1, conn);
        auto [want, count] = flood_oracle(grid, h, w, -1, conn);
        CHECK(got.count == static_cast<std::size_t>(count));
        CHECK(got.region == want);
    }
}

TEST_CASE("cluster purity") {
    CHECK(cluster_purity({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(cluster_purity({0, 0, 0, 0}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    CHECK(cluster_purity({0, 1, 2, 3}, {0, 1, 0, 1}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cluster_purity({}, {}), DataError);
}
