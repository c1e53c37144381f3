#include <catch2/catch_amalgamated.hpp>

#include "gcamat/nn/blocks.hpp"
#include "oracles.hpp"

using namespace gcamat;

namespace {
template <typename T>
double dot_all(const Tensor<T>& a, const Tensor<T>& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

template <typename T>
double frob(const Tensor<T>& a) {
    return std::sqrt(dot_all(a, a));
}
}  // namespace

TEST_CASE("conv2d: zero kernel, delta kernel, oracle match") {
    Pcg32 rng(1);
    auto x = random_uniform<double>({1, 1, 5, 5}, rng);

    auto zeroed = nn::conv2d_op(ag::constant(x), ag::constant(Tensor<double>(1, 1, 3, 3)),
                                ag::Var<double>{}, 1, 1);
    for (std::size_t i = 0; i < zeroed->value.size(); ++i) CHECK(zeroed->value[i] == 0.0);

    Tensor<double> delta(1, 1, 3, 3);
    delta.at(0, 0, 1, 1) = 1.0;
    auto ident = nn::conv2d_op(ag::constant(x), ag::constant(delta), ag::Var<double>{}, 1, 1);
    CHECK(max_abs_diff(ident->value, x) == 0.0);

    auto xr = random_uniform<double>({2, 3, 7, 9}, rng);
    auto w = random_uniform<double>({4, 3, 3, 3}, rng);
    auto b = random_uniform<double>({1, 4, 1, 1}, rng);
    for (int stride : {1, 2}) {
        auto got = nn::conv2d_op(ag::constant(xr), ag::constant(w), ag::constant(b), stride, 1);
        auto want = oracle::conv2d_ref(xr, w, &b, stride, 1);
        INFO("stride=" << stride);
        CHECK(max_abs_diff(got->value, want) < 1e-5);
    }
}

TEST_CASE("conv2d rejects channel mismatch") {
    Tensor<double> x(1, 2, 5, 5), w(1, 3, 3, 3);
    CHECK_THROWS_AS(nn::conv2d_op(ag::constant(x), ag::constant(w), ag::Var<double>{}, 1, 1),
                    DimensionError);
}

TEST_CASE("conv_transpose2d: broadcast kernel, identity, oracle match") {
    // A single input value v with a 3x3 kernel K produces v*K.
    Tensor<double> x(1, 1, 1, 1, 2.5);
    Pcg32 rng(2);
    auto k = random_uniform<double>({1, 1, 3, 3}, rng);
    auto y = nn::conv_transpose2d_op(ag::constant(x), ag::constant(k), ag::Var<double>{}, 1, 0);
    REQUIRE(y->value.shape() == Shape{1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) CHECK(y->value[i] == Catch::Approx(2.5 * k[i]));

    // conv then conv_transpose with the same delta kernel is an identity.
    Tensor<double> delta(1, 1, 3, 3);
    delta.at(0, 0, 1, 1) = 1.0;
    auto img = random_uniform<double>({1, 1, 6, 6}, rng);
    auto c = nn::conv2d_op(ag::constant(img), ag::constant(delta), ag::Var<double>{}, 1, 1);
    auto back = nn::conv_transpose2d_op(c, ag::constant(delta), ag::Var<double>{}, 1, 1);
    CHECK(max_abs_diff(back->value, img) == 0.0);

    auto xr = random_uniform<double>({2, 3, 4, 5}, rng);
    auto w = random_uniform<double>({3, 2, 3, 3}, rng);
    auto b = random_uniform<double>({1, 2, 1, 1}, rng);
    for (int stride : {1, 2}) {
        auto got =
            nn::conv_transpose2d_op(ag::constant(xr), ag::constant(w), ag::constant(b), stride, 1);
        auto want = oracle::conv_transpose2d_ref(xr, w, &b, stride, 1);
        INFO("stride=" << stride);
        CHECK(max_abs_diff(got->value, want) < 1e-5);
    }
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
    Pcg32 rng(3);
    auto w = random_uniform<double>({3, 2, 3, 3}, rng);  // conv layout (Cout,Cin,kh,kw)
    // The adjoint maps the conv output space back to its input space: same
    // buffer, axes relabeled to the transposed-conv layout (Cin_t=Cout,
    // Cout_t=Cin).
    Tensor<double> wt(3, 2, 3, 3);
    for (std::size_t i = 0; i < w.size(); ++i) wt[i] = w[i];

    for (int stride : {1, 2}) {
        // pick a size with zero stride remainder so the geometries invert
        int hw = stride == 1 ? 6 : 7;
        auto x = random_uniform<double>({1, 2, hw, hw}, rng);
        auto cx = nn::conv2d_op(ag::constant(x), ag::constant(w), ag::Var<double>{}, stride, 1);
        Pcg32 r2(4);
        auto y = random_uniform<double>(cx->value.shape(), r2);
        auto ty = nn::conv_transpose2d_op(ag::constant(y), ag::constant(wt), ag::Var<double>{},
                                          stride, 1);
        REQUIRE(ty->value.shape() == x.shape());
        INFO("stride=" << stride);
        CHECK(dot_all(cx->value, y) == Catch::Approx(dot_all(x, ty->value)).epsilon(1e-5));
    }
}

TEST_CASE("spectral normalization against analytic singular values") {
    // diag(3) as 1x1 convs: sigma = 3.
    Tensor<double> w(3, 3, 1, 1);
    for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 3.0;
    nn::SpectralNorm<double> sn;
    Pcg32 rng(5);
    sn.init(3, 3, rng);
    auto wv = ag::constant(w);
    ag::Var<double> out;
    for (int it = 0; it < 5; ++it) out = sn.apply(wv, nn::Mode::Train);
    nn::SpectralNorm<double> probe;
    probe.init(3, 3, rng);
    for (int it = 0; it < 20; ++it) probe.power_iterate(out->value);
    CHECK(probe.sigma_estimate(out->value) == Catch::Approx(1.0).margin(1e-3));

    // An already-normalized weight is a fixed point.
    auto w1 = out->value;
    nn::SpectralNorm<double> sn2;
    sn2.init(3, 3, rng);
    ag::Var<double> out2;
    for (int it = 0; it < 5; ++it) out2 = sn2.apply(ag::constant(w1), nn::Mode::Train);
    CHECK(max_abs_diff(out2->value, w1) < 1e-3);

    // Rank-1 weight u v^T with |u||v| = 7 is scaled by 1/7.
    Pcg32 r3(6);
    Tensor<double> u(1, 1, 1, 4), v(1, 1, 1, 6);
    double nu = 0, nv = 0;
    for (int i = 0; i < 4; ++i) { u[i] = r3.normal(); nu += u[i] * u[i]; }
    for (int i = 0; i < 6; ++i) { v[i] = r3.normal(); nv += v[i] * v[i]; }
    for (int i = 0; i < 4; ++i) u[i] *= std::sqrt(7.0) / std::sqrt(nu);
    for (int i = 0; i < 6; ++i) v[i] *= std::sqrt(7.0) / std::sqrt(nv);
    Tensor<double> r1(4, 6, 1, 1);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j) r1.at(i, j, 0, 0) = u[i] * v[j];
    nn::SpectralNorm<double> sn3;
    sn3.init(4, 6, r3);
    ag::Var<double> out3;
    for (int it = 0; it < 10; ++it) out3 = sn3.apply(ag::constant(r1), nn::Mode::Train);
    Tensor<double> want = r1;
    for (std::size_t i = 0; i < want.size(); ++i) want[i] /= 7.0;
    CHECK(max_abs_diff(out3->value, want) < 1e-6);
}

TEST_CASE("spectral normalization skips zero weights and never grows norms") {
    nn::SpectralNorm<double> sn;
    Pcg32 rng(7);
    sn.init(2, 8, rng);
    Tensor<double> zero(2, 2, 2, 2);
    auto out = sn.apply(ag::constant(zero), nn::Mode::Train);
    CHECK(max_abs_diff(out->value, zero) == 0.0);

    for (uint64_t seed = 0; seed < 10; ++seed) {
        Pcg32 r(100 + seed);
        auto w = random_uniform<double>({4, 2, 3, 3}, r, -2.0, 2.0);
        nn::SpectralNorm<double> s;
        s.init(4, 18, r);
        ag::Var<double> o;
        for (int it = 0; it < 8; ++it) o = s.apply(ag::constant(w), nn::Mode::Train);
        double sigma_before = s.sigma_estimate(w);
        if (sigma_before >= 1.0) CHECK(frob(o->value) <= frob(w) * (1 + 1e-12));
        // estimated top singular value of the normalized weight is ~1
        nn::SpectralNorm<double> probe;
        probe.init(4, 18, r);
        for (int it = 0; it < 30; ++it) probe.power_iterate(o->value);
        CHECK(probe.sigma_estimate(o->value) == Catch::Approx(1.0).margin(5e-2));
    }
}

TEST_CASE("batchnorm training statistics and eval path") {
    // Constant input: pre-affine output is zero (variance guarded by eps).
    nn::BatchNorm<double> bn(3);
    Tensor<double> cst(2, 3, 4, 4, 7.0);
    auto out = bn.forward(ag::constant(cst), nn::Mode::Train);
    CHECK(max_abs_diff(out->value, Tensor<double>(2, 3, 4, 4)) < 1e-12);

    // gamma=1, beta=5 shifts the normalized output mean to 5.
    nn::BatchNorm<double> bn2(2);
    bn2.beta()->value.fill(5.0);
    Pcg32 rng(8);
    auto x = random_uniform<double>({4, 2, 5, 5}, rng);
    auto out2 = bn2.forward(ag::constant(x), nn::Mode::Train);
    for (int c = 0; c < 2; ++c) {
        double mean = 0;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 5; ++h)
                for (int w = 0; w < 5; ++w) mean += out2->value.at(n, c, h, w);
        mean /= 4 * 5 * 5;
        CHECK(mean == Catch::Approx(5.0).margin(1e-6));
    }

    // Per-channel batch statistics match the two-pass oracle; the normalized
    // output has mean 0 +- 1e-4 and variance 1 +- 1e-3 pre-affine.
    nn::BatchNorm<double> bn3(3);
    auto xr = random_uniform<double>({3, 3, 6, 6}, rng, -2.0, 5.0);
    auto out3 = bn3.forward(ag::constant(xr), nn::Mode::Train);
    std::vector<double> mean, var;
    oracle::channel_stats_ref(xr, mean, var);
    for (int c = 0; c < 3; ++c) {
        CHECK(bn3.running_mean()[c] == Catch::Approx(0.1 * mean[c]).margin(1e-5));
        CHECK(bn3.running_var()[c] == Catch::Approx(0.9 + 0.1 * var[c]).margin(1e-5));
    }
    std::vector<double> omean, ovar;
    oracle::channel_stats_ref(out3->value, omean, ovar);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(omean[c]) < 1e-4);
        CHECK(std::abs(ovar[c] - 1.0) < 1e-3);
    }

    // Training mode demands more than one value per channel.
    nn::BatchNorm<double> bn4(2);
    Tensor<double> single(1, 2, 1, 1, 3.0);
    CHECK_THROWS_AS(bn4.forward(ag::constant(single), nn::Mode::Train), ContractError);

    // Eval path uses running statistics.
    auto ev = bn3.forward(ag::constant(xr), nn::Mode::Eval);
    Tensor<double> want(xr.shape());
    for (int n = 0; n < 3; ++n)
        for (int c = 0; c < 3; ++c)
            for (int h = 0; h < 6; ++h)
                for (int w = 0; w < 6; ++w)
                    want.at(n, c, h, w) = (xr.at(n, c, h, w) - bn3.running_mean()[c]) /
                                          std::sqrt(bn3.running_var()[c] + 1e-5);
    CHECK(max_abs_diff(ev->value, want) < 1e-10);
}

TEST_CASE("residual block with zero second conv is the (projected) input") {
    Pcg32 rng(9);
    nn::ResidualBlock<double> block(4, 4, 1, rng);
    block.conv2().weight()->value.fill(0.0);
    auto x = random_uniform<double>({2, 4, 6, 6}, rng);
    auto out = block.forward(ag::constant(x), nn::Mode::Train);
    CHECK(max_abs_diff(out->value, x) == 0.0);
}

TEST_CASE("shortcut block preserves spatial size") {
    Pcg32 rng(10);
    nn::ShortcutBlock<double> sc(6, 16, rng);
    auto x = random_uniform<double>({2, 6, 12, 20}, rng);
    auto out = sc.forward(ag::constant(x), nn::Mode::Train);
    CHECK(out->value.shape() == Shape{2, 16, 12, 20});
}
