#include <doctest.h>

#include <cmath>

#include "gmil/errors.hpp"
#include "gmil/mil.hpp"
#include "test_util.hpp"

using namespace gmil;
using autodiff::Tape;

TEST_CASE("abmil single instance passes through") {
    Rng rng(1);
    AbmilParams p = AbmilParams::create(3, 4, rng);
    Matrix h = Matrix::from_rows({{0.5, -1.0, 2.0}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    CHECK(tape.value(out.attention)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(tape.value(out.embedding)(0, j) == doctest::Approx(h(0, j)).epsilon(1e-12));
    double pred = tape.value(out.prediction)(0, 0);
    CHECK(pred > 0.0);
    CHECK(pred < 1.0);
}

TEST_CASE("abmil identical instances give B = h") {
    Rng rng(2);
    AbmilParams p = AbmilParams::create(3, 4, rng);
    Matrix h = Matrix::from_rows({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(tape.value(out.embedding)(0, j) == doctest::Approx(h(0, j)).epsilon(1e-12));
}

TEST_CASE("abmil matches hand-computed two-instance pooling") {
    Rng rng(3);
    AbmilParams p = AbmilParams::create(1, 1, rng);
    p.proj.value(0, 0) = 1.0;   // V
    p.attn.value(0, 0) = 2.0;   // w
    Matrix h = Matrix::from_rows({{0.5}, {-0.25}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    double e0 = 2.0 * std::tanh(0.5), e1 = 2.0 * std::tanh(-0.25);
    double a0 = std::exp(e0) / (std::exp(e0) + std::exp(e1));
    CHECK(tape.value(out.attention)(0, 0) == doctest::Approx(a0).epsilon(1e-9));
    CHECK(tape.value(out.embedding)(0, 0) ==
          doctest::Approx(a0 * 0.5 + (1 - a0) * -0.25).epsilon(1e-9));
}

TEST_CASE("abmil attention sums to one and B stays in the instance hull") {
    Rng rng(4);
    AbmilParams p = AbmilParams::create(2, 3, rng);
    for (int t = 0; t < 20; ++t) {
        Matrix h = testutil::random_matrix(1 + rng.uniform_index(6), 2, rng);
        Tape tape;
        BagOutput out = p.forward(tape, tape.constant(h));
        const Matrix& a = tape.value(out.attention);
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(0, k);
        CHECK(std::fabs(s - 1.0) <= 1e-9);
        for (std::size_t j = 0; j < 2; ++j) {
            double lo = h(0, j), hi = h(0, j);
            for (std::size_t k = 0; k < h.rows(); ++k) {
                lo = std::min(lo, h(k, j));
                hi = std::max(hi, h(k, j));
            }
            double b = tape.value(out.embedding)(0, j);
            CHECK(b >= lo - 1e-9);
            CHECK(b <= hi + 1e-9);
        }
    }
}

TEST_CASE("dsmil single instance") {
    Rng rng(5);
    DsmilParams p = DsmilParams::create(3, 2, 3, rng);
    Matrix h = Matrix::from_rows({{1.0, -0.5, 0.25}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    CHECK(out.critical_index == 0);
    CHECK(tape.value(out.attention)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    Matrix v = matmul(h, p.value.value);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(tape.value(out.embedding)(0, j) == doctest::Approx(v(0, j)).epsilon(1e-9));
}

TEST_CASE("dsmil critical index is the instance-score argmax, ties lowest") {
    Rng rng(6);
    DsmilParams p = DsmilParams::create(1, 1, 1, rng);
    p.inst_cls.value(0, 0) = 1.0;
    Matrix h = Matrix::from_rows({{0.2}, {0.9}, {0.9}, {-1.0}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    CHECK(out.critical_index == 1);
}

TEST_CASE("dsmil matches hand-computed two-instance arithmetic") {
    Rng rng(7);
    DsmilParams p = DsmilParams::create(1, 1, 1, rng);
    p.inst_cls.value(0, 0) = 1.0;
    p.query.value(0, 0) = 0.5;
    p.value.value(0, 0) = 2.0;
    p.head_w.value(0, 0) = 1.0;
    p.head_b.value(0, 0) = 0.0;
    Matrix h = Matrix::from_rows({{1.0}, {3.0}});
    Tape tape;
    BagOutput out = p.forward(tape, tape.constant(h));
    CHECK(out.critical_index == 1);
    double q0 = 0.5, q1 = 1.5;  // queries
    double u0 = std::exp(q0 * q1), u1 = std::exp(q1 * q1);
    double z = u0 + u1;
    double b = (u0 / z) * 2.0 + (u1 / z) * 6.0;  // values 2, 6
    CHECK(tape.value(out.embedding)(0, 0) == doctest::Approx(b).epsilon(1e-9));
    double logit = 0.5 * (3.0 + b);  // s_m = 3, bag logit = b
    CHECK(tape.value(out.prediction)(0, 0) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-9));
}

TEST_CASE("aggregators are permutation invariant") {
    Rng rng(8);
    AbmilParams ab = AbmilParams::create(3, 4, rng);
    DsmilParams ds = DsmilParams::create(3, 2, 3, rng);
    for (int t = 0; t < 20; ++t) {
        std::size_t n = 2 + rng.uniform_index(6);
        Matrix h = testutil::random_matrix(n, 3, rng);
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        Matrix hp(n, 3);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < 3; ++j) hp(perm[i], j) = h(i, j);

        Tape t1, t2;
        BagOutput a = ab.forward(t1, t1.constant(h));
        BagOutput b = ab.forward(t2, t2.constant(hp));
        CHECK(std::fabs(t1.value(a.prediction)(0, 0) - t2.value(b.prediction)(0, 0)) <=
              1e-9);

        Tape t3, t4;
        BagOutput da = ds.forward(t3, t3.constant(h));
        BagOutput db = ds.forward(t4, t4.constant(hp));
        CHECK(std::fabs(t3.value(da.prediction)(0, 0) -
                        t4.value(db.prediction)(0, 0)) <= 1e-9);
        CHECK(db.critical_index == perm[da.critical_index]);
    }
}

TEST_CASE("aggregator gradients match finite differences") {
    Rng rng(9);
    Matrix h = testutil::random_matrix(4, 3, rng);
    Matrix label(1, 1);
    label(0, 0) = 1.0;

    AbmilParams ab = AbmilParams::create(3, 2, rng);
    auto eval_ab = [&](bool backward) {
        Tape tape;
        BagOutput out = ab.forward(tape, tape.constant(h));
        Tape::Id loss = tape.bce_loss(out.prediction, label);
        if (backward) tape.backward(loss);
        return tape.value(loss)(0, 0);
    };
    CHECK(testutil::max_rel_grad_err(ab.params(), eval_ab) <= 1e-4);

    DsmilParams ds = DsmilParams::create(3, 2, 3, rng);
    auto eval_ds = [&](bool backward) {
        Tape tape;
        BagOutput out = ds.forward(tape, tape.constant(h));
        Tape::Id loss = tape.bce_loss(out.prediction, label);
        if (backward) tape.backward(loss);
        return tape.value(loss)(0, 0);
    };
    CHECK(testutil::max_rel_grad_err(ds.params(), eval_ds) <= 1e-4);

    PooledHeadParams ph = PooledHeadParams::create(3, rng);
    Matrix pooled = testutil::random_matrix(1, 3, rng);
    auto eval_ph = [&](bool backward) {
        Tape tape;
        BagOutput out = ph.forward(tape, tape.constant(pooled));
        Tape::Id loss = tape.bce_loss(out.prediction, label);
        if (backward) tape.backward(loss);
        return tape.value(loss)(0, 0);
    };
    CHECK(testutil::max_rel_grad_err(ph.params(), eval_ph) <= 1e-4);
}
