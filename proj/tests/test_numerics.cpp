#include <doctest.h>

#include <cmath>

#include "pime/autodiff.hpp"
#include "pime/numerics.hpp"
#include "pime/rng.hpp"
#include "pime/trainer.hpp"

using namespace pime;

TEST_CASE("tensor shape and finiteness") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);
    CHECK(t.all_finite());
    t[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(t.check_finite("test"), NumericalError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), std::invalid_argument);
}

TEST_CASE("reverse mode: square function") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor::scalar(3.0));
    ad::Var loss = ad::mul(x, x);
    CHECK(loss.value().item() == doctest::Approx(9.0));
    tape.backward(loss);
    CHECK(tape.grad(x.id)[0] == doctest::Approx(6.0));
}

TEST_CASE("reverse mode: constant has zero gradient") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor::scalar(3.0));
    ad::Var c = tape.leaf(Tensor::scalar(7.0));
    ad::Var loss = ad::mul(c, c);
    tape.backward(loss);
    CHECK(tape.grad(x.id)[0] == 0.0);
}

TEST_CASE("reverse mode: matmul and softmax agree with finite differences") {
    Rng rng(11);
    Tensor a({3, 4});
    Tensor b({4, 2});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
    auto value = [&](const Tensor& at, const Tensor& bt) {
        ad::Tape tape;
        ad::Var av = tape.leaf(at);
        ad::Var bv = tape.leaf(bt);
        ad::Var m = ad::matmul(av, bv);
        ad::Var s = ad::softmax_vec(ad::row(m, 1));
        return ad::sq_norm(ad::sub(s, ad::row(m, 0))).value().item();
    };
    ad::Tape tape;
    ad::Var av = tape.leaf(a);
    ad::Var bv = tape.leaf(b);
    ad::Var m = ad::matmul(av, bv);
    ad::Var s = ad::softmax_vec(ad::row(m, 1));
    ad::Var loss = ad::sq_norm(ad::sub(s, ad::row(m, 0)));
    tape.backward(loss);
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Tensor ap = a, am = a;
        ap[i] += h;
        am[i] -= h;
        double fd = (value(ap, b) - value(am, b)) / (2 * h);
        CHECK(tape.grad(av.id)[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        Tensor bp = b, bm = b;
        bp[i] += h;
        bm[i] -= h;
        double fd = (value(a, bp) - value(a, bm)) / (2 * h);
        CHECK(tape.grad(bv.id)[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("non-finite intermediate names the primitive") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor::scalar(1000.0));
    CHECK_THROWS_WITH_AS(ad::exp_op(x), doctest::Contains("exp"), NumericalError);
}

TEST_CASE("kl_diag_gaussian closed-form fixtures") {
    CHECK(kl_diag_gaussian(Tensor({1}, {0.0}), Tensor({1}, {0.0})) == 0.0);
    CHECK(kl_diag_gaussian(Tensor({1}, {1.0}), Tensor({1}, {0.0})) == doctest::Approx(0.5).epsilon(1e-14));
    // hand evaluation: 0.5*[(0.25+2-ln2-1) + (0.25+0.5+ln2-1)] = 0.5
    double v = kl_diag_gaussian(Tensor({2}, {0.5, -0.5}),
                                Tensor({2}, {std::log(2.0), std::log(0.5)}));
    CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kl_diag_gaussian nonnegative, zero only at the prior") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        Tensor mu({4}), lv({4});
        for (std::size_t j = 0; j < 4; ++j) {
            mu[j] = 2.0 * rng.normal();
            lv[j] = rng.normal();
        }
        CHECK(kl_diag_gaussian(mu, lv) >= 0.0);
    }
    CHECK(kl_diag_gaussian(Tensor({3}), Tensor({3})) == 0.0);
}

TEST_CASE("adam: zero gradient and zero decay is the identity") {
    ParamSet p;
    p.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
    ParamSet g = p.zeros_like();
    AdamState st = AdamState::init(p, 1e-3, 0.0);
    ParamSet before = p;
    adam_step(p, g, st);
    CHECK(p == before);
    CHECK(st.step == 1);
}

TEST_CASE("adam: first step moves a scalar by about lr") {
    ParamSet p;
    p.add("w", Tensor::scalar(1.0));
    ParamSet g;
    g.add("w", Tensor::scalar(1.0));
    AdamState st = AdamState::init(p, 1e-3, 0.0);
    adam_step(p, g, st);
    // mhat/sqrt(vhat) = 1 up to eps_adam
    CHECK(p[0].tensor.item() == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
}

TEST_CASE("adam: shape mismatch rejected") {
    ParamSet p;
    p.add("w", Tensor({2}));
    ParamSet g;
    g.add("w", Tensor({3}));
    AdamState st = AdamState::init(p, 1e-3, 0.0);
    CHECK_THROWS_AS(adam_step(p, g, st), std::invalid_argument);
}

TEST_CASE("lr schedule halves every 50 epochs") {
    TrainConfig cfg;
    CHECK(cfg.lr_at(0) == doctest::Approx(1e-3));
    CHECK(cfg.lr_at(49) == doctest::Approx(1e-3));
    CHECK(cfg.lr_at(50) == doctest::Approx(5e-4));
    CHECK(cfg.lr_at(100) == doctest::Approx(2.5e-4));
    CHECK(cfg.lr_at(150) == doctest::Approx(1.25e-4));
}
