#include <doctest.h>

#include "gmil/metrics.hpp"
#include "gmil/errors.hpp"
#include "gmil/rng.hpp"

using namespace gmil;

TEST_CASE("auc hand cases") {
    CHECK(pairwise_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
    CHECK(pairwise_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(pairwise_auc({0.5, 0.5}, {0, 1}) == doctest::Approx(0.5));  // tie half credit
    CHECK_THROWS_AS(pairwise_auc({0.1, 0.2}, {1, 1}), DataError);
}

TEST_CASE("metrics at a threshold") {
    Metrics m = evaluate_scores({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(m.auc.value() == doctest::Approx(1.0));
    CHECK(m.balanced_accuracy == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(1.0));
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(1.0));

    // constant predictor: one class fully right, the other fully wrong
    Metrics c = evaluate_scores({0.9, 0.9, 0.9, 0.9}, {1, 1, 0, 0});
    CHECK(c.balanced_accuracy == doctest::Approx(0.5));
    CHECK(c.recall == doctest::Approx(1.0));
    CHECK(c.precision == doctest::Approx(0.5));

    Metrics single = evaluate_scores({0.9, 0.2}, {1, 1});
    CHECK(!single.auc.has_value());
}

TEST_CASE("balanced accuracy invariant under class-preserving duplication") {
    std::vector<double> s = {0.9, 0.3, 0.6, 0.2};
    std::vector<int> y = {1, 0, 1, 0};
    Metrics base = evaluate_scores(s, y);
    std::vector<double> s2 = s;
    std::vector<int> y2 = y;
    for (std::size_t i = 0; i < 2; ++i) {  // duplicate the positives
        s2.push_back(s[i * 2]);
        y2.push_back(1);
    }
    Metrics dup = evaluate_scores(s2, y2);
    CHECK(dup.balanced_accuracy == doctest::Approx(base.balanced_accuracy));
}

TEST_CASE("mean and population std") {
    MeanStd ms = mean_std({1.0, 2.0, 3.0});
    CHECK(ms.mean == doctest::Approx(2.0));
    CHECK(ms.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(mean_std({}).mean == 0.0);
}
