#include <catch2/catch_amalgamated.hpp>

#include "gcamat/core/fd_check.hpp"
#include "gcamat/core/ops.hpp"
#include "oracles.hpp"

using namespace gcamat;

TEST_CASE("tensor shape and finiteness") {
    Tensor<float> t(2, 3, 4, 5);
    CHECK(t.size() == 2u * 3 * 4 * 5);
    CHECK(all_finite(t));
    t.at(1, 2, 3, 4) = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(all_finite(t));
    CHECK(first_nonfinite(t) == t.size() - 1);
    CHECK_THROWS_AS(Tensor<float>(Shape{-1, 1, 1, 1}), DimensionError);
}

TEST_CASE("matmul identity and hand-checked product") {
    Tensor<double> eye(1, 1, 3, 3);
    for (int i = 0; i < 3; ++i) eye.at(0, 0, i, i) = 1;
    Pcg32 rng(11);
    auto x = random_uniform<double>({1, 1, 3, 4}, rng);
    auto y = ag::matmul(ag::constant(eye), ag::constant(x));
    CHECK(max_abs_diff(y->value, x) == 0.0);

    Tensor<double> a(1, 1, 2, 2), b(1, 1, 2, 1);
    a.at(0, 0, 0, 0) = 1; a.at(0, 0, 0, 1) = 2;
    a.at(0, 0, 1, 0) = 3; a.at(0, 0, 1, 1) = 4;
    b.at(0, 0, 1, 0) = 1;
    auto p = ag::matmul(ag::constant(a), ag::constant(b));
    CHECK(p->value.at(0, 0, 0, 0) == 2.0);
    CHECK(p->value.at(0, 0, 1, 0) == 4.0);
}

TEST_CASE("matmul equals triple-loop oracle") {
    Pcg32 rng(42);
    auto a = random_uniform<double>({1, 1, 7, 5}, rng);
    auto b = random_uniform<double>({1, 1, 5, 3}, rng);
    auto got = ag::matmul(ag::constant(a), ag::constant(b))->value;
    auto want = oracle::matmul_ref(a, b);
    CHECK(max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("matmul rejects mismatched inner dims") {
    Tensor<double> a(1, 1, 2, 3), b(1, 1, 4, 2);
    CHECK_THROWS_AS(ag::matmul(ag::constant(a), ag::constant(b)), DimensionError);
}

TEST_CASE("im2col layouts") {
    // 3x3 input, 3x3 kernel, pad 1: 9 rows, center row is the flat input.
    Tensor<double> x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x[i] = i + 1;
    auto cols = im2col(x, PatchGeom{x.shape(), 3, 3, 1, 1, 1, 1});
    REQUIRE(cols.shape().h == 9);
    for (int k = 0; k < 9; ++k) CHECK(cols.at(0, 0, 4, k) == x[k]);

    // 2x2 input, 2x2 kernel, no padding: a single row holding all 4 values.
    Tensor<double> x2(1, 1, 2, 2);
    for (int i = 0; i < 4; ++i) x2[i] = i + 10;
    auto cols2 = im2col(x2, PatchGeom{x2.shape(), 2, 2, 1, 1, 0, 0});
    REQUIRE(cols2.shape().h == 1);
    REQUIRE(cols2.shape().w == 4);
    for (int k = 0; k < 4; ++k) CHECK(cols2.at(0, 0, 0, k) == x2[k]);
}

TEST_CASE("im2col/col2im roundtrip with overlap-count division") {
    Pcg32 rng(7);
    auto x = random_uniform<double>({2, 3, 8, 8}, rng);
    PatchGeom g{x.shape(), 3, 3, 2, 2, 1, 1};
    auto cols = ag::im2col_node(ag::constant(x), 3, 3, 2, 2, 1, 1);
    auto back = ag::col2im_mean_node(cols, g);
    CHECK(max_abs_diff(back->value, x) < 1e-12);
}

TEST_CASE("im2col rejects oversized kernels") {
    Tensor<double> x(1, 1, 3, 3);
    CHECK_THROWS_AS(im2col(x, PatchGeom{x.shape(), 7, 7, 1, 1, 1, 1}), DimensionError);
}

TEST_CASE("backward of sum is ones, of sum of squares is 2x") {
    Pcg32 rng(5);
    auto xt = random_uniform<double>({2, 3, 4, 5}, rng);
    auto x = ag::param(xt);
    ag::backward(ag::sum_all(x));
    for (std::size_t i = 0; i < xt.size(); ++i) CHECK(x->grad[i] == 1.0);

    auto y = ag::param(xt);
    ag::backward(ag::sum_all(ag::mul(y, y)));
    for (std::size_t i = 0; i < xt.size(); ++i) CHECK(y->grad[i] == Catch::Approx(2 * xt[i]));
}

TEST_CASE("diamond graph accumulates both path gradients") {
    Pcg32 rng(6);
    auto xt = random_uniform<double>({1, 1, 2, 2}, rng);
    auto x = ag::param(xt);
    auto p1 = ag::mul_scalar(x, 2.0);
    auto p2 = ag::mul(x, x);
    ag::backward(ag::sum_all(ag::add(p1, p2)));
    for (std::size_t i = 0; i < xt.size(); ++i)
        CHECK(x->grad[i] == Catch::Approx(2.0 + 2.0 * xt[i]));
}

TEST_CASE("backward requires a scalar root") {
    auto x = ag::param(Tensor<double>(1, 1, 2, 2, 1.0));
    auto y = ag::mul_scalar(x, 2.0);
    CHECK_THROWS_AS(ag::backward(y), ContractError);
}

TEST_CASE("softmax rows are normalized and shift invariant") {
    Pcg32 rng(9);
    auto x = random_uniform<double>({1, 1, 6, 10}, rng, -3.0, 3.0);
    auto s = ag::softmax(ag::constant(x), 3);
    for (int r = 0; r < 6; ++r) {
        double sum = 0;
        for (int k = 0; k < 10; ++k) sum += s->value.at(0, 0, r, k);
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    }
    auto shifted = ag::softmax(ag::add_scalar(ag::constant(x), 17.5), 3);
    CHECK(max_abs_diff(s->value, shifted->value) < 1e-6);

    // channel-axis softmax normalizes across C
    auto xc = random_uniform<double>({2, 5, 3, 3}, rng);
    auto sc = ag::softmax(ag::constant(xc), 1);
    for (int n = 0; n < 2; ++n)
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 3; ++w) {
                double sum = 0;
                for (int c = 0; c < 5; ++c) sum += sc->value.at(n, c, h, w);
                CHECK(sum == Catch::Approx(1.0).margin(1e-6));
            }
}

TEST_CASE("fd_check validates matmul and softmax, excludes relu kinks") {
    Pcg32 rng(123);
    auto a = random_uniform<double>({1, 1, 4, 4}, rng);
    auto b = random_uniform<double>({1, 1, 4, 4}, rng);
    auto proj = random_uniform<double>({1, 1, 4, 4}, rng);
    auto rep = fd_check<double>(
        [&](const std::vector<ag::Var<double>>& in) {
            return ag::sum_all(ag::mul(ag::matmul(in[0], in[1]), ag::constant(proj)));
        },
        {a, b}, 1e-4, 100, rng);
    CHECK(rep.pass(1e-4));
    CHECK(rep.probes_run == 100);

    auto v = random_uniform<double>({1, 1, 1, 10}, rng, -2.0, 2.0);
    auto projv = random_uniform<double>({1, 1, 1, 10}, rng);
    auto rep2 = fd_check<double>(
        [&](const std::vector<ag::Var<double>>& in) {
            return ag::sum_all(ag::mul(ag::softmax(in[0], 3), ag::constant(projv)));
        },
        {v}, 1e-4, 100, rng);
    CHECK(rep2.pass(1e-4));

    // relu probed exactly at its kink: excluded subgradient points, no failure
    Tensor<double> zeros(1, 1, 2, 2);
    auto projz = random_uniform<double>({1, 1, 2, 2}, rng, 0.5, 1.5);
    auto rep3 = fd_check<double>(
        [&](const std::vector<ag::Var<double>>& in) {
            return ag::sum_all(ag::mul(ag::relu(in[0]), ag::constant(projz)));
        },
        {zeros}, 1e-4, 20, rng);
    CHECK(rep3.pass(1e-4));
    CHECK(rep3.excluded == 20);
}

TEST_CASE("fd_check reports non-finite evaluations with the offending index") {
    Pcg32 rng(77);
    // The minus probe lands exactly on 0 and 0^-2 overflows to infinity.
    Tensor<double> x(1, 1, 1, 1, 1e-4);
    auto rep = fd_check<double>(
        [&](const std::vector<ag::Var<double>>& in) {
            return ag::sum_all(ag::pow_scalar(in[0], -2.0));
        },
        {x}, 1e-4, 5, rng);
    CHECK(rep.nonfinite);
    CHECK(rep.nonfinite_input == 0);
    CHECK(rep.nonfinite_elem == 0);
    CHECK_FALSE(rep.pass(1e-4));
}
