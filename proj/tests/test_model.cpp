#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstring>
#include <unistd.h>

#include "gcamat/model/checkpoint.hpp"
#include "oracles.hpp"

using namespace gcamat;
using model::MattingNetwork;
using model::ModelConfig;

namespace {

ModelConfig tiny_cfg(bool use_gca) {
    ModelConfig cfg;
    cfg.base_channels = 4;
    cfg.use_gca = use_gca;
    return cfg;
}

// image in [0,1] plus a banded one-hot trimap
std::pair<Tensor<float>, Tensor<float>> fixture(int n, int h, int w, uint64_t seed) {
    Pcg32 rng(seed);
    auto img = random_uniform<float>({n, 3, h, w}, rng, 0.f, 1.f);
    Tensor<float> tri(n, 3, h, w);
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int c = x < w / 3 ? gca::kTrimapBg
                                  : (x < 2 * w / 3 ? gca::kTrimapUnknown : gca::kTrimapFg);
                tri.at(b, c, y, x) = 1.f;
            }
    return {img, tri};
}

std::string temp_path(const char* name) {
    return std::string("/tmp/gcamat_test_") + name + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("forward shape, range and contract errors") {
    MattingNetwork<float> net(tiny_cfg(true), 1);
    auto [img, tri] = fixture(2, 32, 32, 7);
    auto out = net.forward(img, tri, nn::Mode::Eval);
    CHECK(out->value.shape() == Shape{2, 1, 32, 32});
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t i = 0; i < out->value.size(); ++i) {
        lo = std::min(lo, out->value[i]);
        hi = std::max(hi, out->value[i]);
    }
    CHECK(lo >= 0.f);
    CHECK(hi <= 1.f);

    auto [img2, tri2] = fixture(1, 40, 40, 8);
    CHECK_THROWS_AS(net.forward(img2, tri2, nn::Mode::Eval), ContractError);

    auto [img3, tri3] = fixture(1, 32, 32, 9);
    Tensor<float> bad = tri3;
    bad.at(0, 0, 0, 0) = 0.25f;
    CHECK_THROWS_AS(net.forward(img3, bad, nn::Mode::Eval), ValidationError);

    Tensor<float> wrong(1, 3, 64, 64);
    CHECK_THROWS_AS(net.forward(img3, wrong, nn::Mode::Eval), ValidationError);
}

TEST_CASE("gca network at zero-initialized adaptation equals the baseline bitwise") {
    MattingNetwork<float> gca_net(tiny_cfg(true), 3);
    MattingNetwork<float> baseline(tiny_cfg(false), 999);  // different init on purpose
    model::restore(baseline, model::snapshot(gca_net));    // share the common weights

    auto [img, tri] = fixture(2, 32, 32, 10);
    auto a = gca_net.forward(img, tri, nn::Mode::Eval);
    auto b = baseline.forward(img, tri, nn::Mode::Eval);
    REQUIRE(a->value.size() == b->value.size());
    CHECK(std::memcmp(a->value.data(), b->value.data(), a->value.size() * sizeof(float)) == 0);
}

TEST_CASE("infer_full pads, crops and stays consistent") {
    MattingNetwork<float> net(tiny_cfg(true), 4);
    auto [img, tri] = fixture(1, 32, 32, 11);
    auto direct = net.forward(img, tri, nn::Mode::Eval);
    auto padded = net.infer_full(img, tri);
    CHECK(max_abs_diff(direct->value, padded) == 0.f);

    auto [img2, tri2] = fixture(1, 40, 56, 12);
    auto out = net.infer_full(img2, tri2);
    CHECK(out.shape() == Shape{1, 1, 40, 56});

    // pre-padded by the caller: agree on the valid region
    auto imgp = model::detail::pad_reflect_br(img2, 24, 8);
    auto trip = model::detail::pad_reflect_br(tri2, 24, 8);
    auto outp = net.infer_full(imgp, trip);
    double worst = 0;
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 56; ++x)
            worst = std::max(worst,
                             std::abs((double)out.at(0, 0, y, x) - outp.at(0, 0, y, x)));
    CHECK(worst < 1e-5);
}

TEST_CASE("predict_and_composite blends with the estimated alpha") {
    MattingNetwork<float> net(tiny_cfg(false), 5);
    auto [img, tri] = fixture(1, 32, 32, 13);
    Pcg32 rng(14);
    auto fg = random_uniform<float>({1, 3, 32, 32}, rng, 0.f, 1.f);
    auto bg = random_uniform<float>({1, 3, 32, 32}, rng, 0.f, 1.f);
    auto [alpha, comp] = net.predict_and_composite(img, tri, fg, bg);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 32 * 32; ++i) {
            float a = alpha[i];
            CHECK(comp[c * 32 * 32 + i] ==
                  fg[c * 32 * 32 + i] * a + (1.f - a) * bg[c * 32 * 32 + i]);
        }
    Tensor<float> small_fg(1, 3, 16, 16);
    CHECK_THROWS_AS(net.predict_and_composite(img, tri, small_fg, bg), ContractError);
}

TEST_CASE("checkpoint roundtrip restores the network bitwise") {
    MattingNetwork<float> net(tiny_cfg(true), 6);
    auto [img, tri] = fixture(1, 32, 32, 15);
    // make some state nontrivial before saving
    net.forward(img, tri, nn::Mode::Train);
    auto before = net.forward(img, tri, nn::Mode::Eval)->value;

    auto path = temp_path("ckpt");
    model::save_checkpoint(path, model::snapshot(net));
    MattingNetwork<float> other(tiny_cfg(true), 12345);
    model::restore(other, model::load_checkpoint(path));
    auto after = other.forward(img, tri, nn::Mode::Eval)->value;
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(float)) == 0);

    // deterministic bytes
    auto path2 = temp_path("ckpt2");
    model::save_checkpoint(path2, model::snapshot(net));
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // corruption is caught by the CRC
    b1[b1.size() / 2] = static_cast<char>(b1[b1.size() / 2] ^ 0x40);
    std::ofstream corrupted(path, std::ios::binary | std::ios::trunc);
    corrupted.write(b1.data(), static_cast<std::streamsize>(b1.size()));
    corrupted.close();
    CHECK_THROWS_AS(model::load_checkpoint(path), IoError);

    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("checkpoint rejects bad magic and missing tensors") {
    auto path = temp_path("badmagic");
    {
        std::ofstream f(path, std::ios::binary);
        const char junk[] = "NOPE____________________";
        f.write(junk, sizeof(junk));
    }
    CHECK_THROWS_AS(model::load_checkpoint(path), IoError);
    std::remove(path.c_str());

    // a baseline snapshot lacks the attention tensors a gca model needs
    MattingNetwork<float> baseline(tiny_cfg(false), 7);
    MattingNetwork<float> gca_net(tiny_cfg(true), 8);
    CHECK_THROWS_AS(model::restore(gca_net, model::snapshot(baseline)), IoError);
}
