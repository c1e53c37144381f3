#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "gcamat/data/augment.hpp"
#include "gcamat/data/dataset.hpp"
#include "gcamat/io/png.hpp"

using namespace gcamat;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("gcamat_data_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool bitwise_equal(const Tensor<float>& a, const Tensor<float>& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}
}  // namespace

TEST_CASE("composite endpoints and hand arithmetic") {
    Pcg32 rng(1);
    auto fg = random_uniform<float>({1, 3, 8, 8}, rng, 0.f, 1.f);
    auto bg = random_uniform<float>({1, 3, 8, 8}, rng, 0.f, 1.f);

    Tensor<float> ones(1, 1, 8, 8, 1.f), zeros(1, 1, 8, 8, 0.f);
    CHECK(bitwise_equal(data::composite(fg, bg, ones), fg));
    CHECK(bitwise_equal(data::composite(fg, bg, zeros), bg));

    Tensor<float> f(1, 3, 1, 1), b(1, 3, 1, 1), a(1, 1, 1, 1, 0.25f);
    f.at(0, 0, 0, 0) = 200.f / 255;
    b.at(0, 1, 0, 0) = 200.f / 255;
    auto img = data::composite(f, b, a);
    CHECK(img.at(0, 0, 0, 0) == Catch::Approx(50.0 / 255).margin(1e-6));
    CHECK(img.at(0, 1, 0, 0) == Catch::Approx(150.0 / 255).margin(1e-6));
    CHECK(img.at(0, 2, 0, 0) == 0.f);

    Tensor<float> small(1, 3, 4, 4);
    CHECK_THROWS_AS(data::composite(fg, small, ones), ValidationError);
}

TEST_CASE("synthetic foregrounds: deterministic, semitransparent, full-range") {
    auto [fg1, a1] = data::synthesize_foreground(42, 96);
    auto [fg2, a2] = data::synthesize_foreground(42, 96);
    CHECK(bitwise_equal(fg1, fg2));
    CHECK(bitwise_equal(a1, a2));

    double worst_fraction = 1.0;
    int missing_extremes = 0;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto [fg, alpha] = data::synthesize_foreground(seed, 64);
        int semi = 0;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            if (alpha[i] > 0.f && alpha[i] < 1.f) ++semi;
            has0 |= alpha[i] == 0.f;
            has1 |= alpha[i] == 1.f;
        }
        worst_fraction = std::min(worst_fraction, semi / double(alpha.size()));
        if (!has0 || !has1) ++missing_extremes;
    }
    // generator statistics measured once and frozen as a regression bound
    CHECK(worst_fraction >= 0.10);
    CHECK(missing_extremes == 0);
}

TEST_CASE("merge_foregrounds identities") {
    Pcg32 rng(2);
    auto fga = random_uniform<float>({1, 3, 16, 16}, rng, 0.f, 1.f);
    auto fgb = random_uniform<float>({1, 3, 16, 16}, rng, 0.f, 1.f);
    auto aa = random_uniform<float>({1, 1, 16, 16}, rng, 0.f, 1.f);

    // b fully transparent: a is returned unchanged
    Tensor<float> transparent(1, 1, 16, 16, 0.f);
    auto [mfg, malpha] = data::merge_foregrounds(fga, aa, fgb, transparent);
    CHECK(bitwise_equal(mfg, fga));
    CHECK(bitwise_equal(malpha, aa));

    // alpha_a = 1 everywhere: a is returned
    Tensor<float> opaque(1, 1, 16, 16, 1.f);
    auto ab = random_uniform<float>({1, 1, 16, 16}, rng, 0.f, 1.f);
    auto [mfg2, malpha2] = data::merge_foregrounds(fga, opaque, fgb, ab);
    CHECK(bitwise_equal(mfg2, fga));
    CHECK(bitwise_equal(malpha2, opaque));

    // uniform 0.5 over 0.5 composes to 0.75
    Tensor<float> half(1, 1, 16, 16, 0.5f);
    auto [mfg3, malpha3] = data::merge_foregrounds(fga, half, fgb, half);
    for (std::size_t i = 0; i < malpha3.size(); ++i) CHECK(malpha3[i] == 0.75f);
}

TEST_CASE("generate_trimap: band width on a straight edge, rejection, coverage") {
    // binary step edge at x = 48 on a 96x96 grid, radii 5/5
    Tensor<float> alpha(1, 1, 96, 96);
    for (int y = 0; y < 96; ++y)
        for (int x = 48; x < 96; ++x) alpha.at(0, 0, y, x) = 1.f;
    auto tri = data::generate_trimap(alpha, 5, 5);
    for (int y = 0; y < 96; ++y) {
        int width = 0;
        for (int x = 0; x < 96; ++x) width += tri.at(0, gca::kTrimapUnknown, y, x) == 1.f;
        CHECK(width == 10);  // erode 5 each side of the edge
    }

    Tensor<float> flat(1, 1, 64, 64, 1.f);
    CHECK_THROWS_AS(data::generate_trimap(flat, 5, 5), data::DegenerateTrimapError);
    CHECK_THROWS_AS(data::generate_trimap(alpha, 3, 5), ContractError);
    CHECK_THROWS_AS(data::generate_trimap(alpha, 5, 31), ContractError);

    // every semitransparent pixel lands in the unknown channel
    auto [fg, salpha] = data::synthesize_foreground(7, 96);
    auto stri = data::generate_trimap(salpha, 7, 9);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x)
            if (salpha.at(0, 0, y, x) > 0.f && salpha.at(0, 0, y, x) < 1.f)
                REQUIRE(stri.at(0, gca::kTrimapUnknown, y, x) == 1.f);
}

TEST_CASE("affine warps apply one geometric map and flips are involutions") {
    // encode the coordinate grid as two channels; warped values must follow
    // the matrix at interior points
    const int n = 33;
    Tensor<float> grid(1, 2, n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            grid.at(0, 0, y, x) = static_cast<float>(x);
            grid.at(0, 1, y, x) = static_cast<float>(y);
        }
    data::AffineParams p;
    p.rotation_deg = 17;
    p.scale = 1.1;
    p.shear_deg = 4;
    auto m = data::affine_about_center(p, n, n);
    auto inv = m.inverse();
    auto warped = data::warp_bilinear(grid, m);
    for (int y = 8; y < n - 8; ++y)
        for (int x = 8; x < n - 8; ++x) {
            double sx, sy;
            inv.apply(x, y, sx, sy);
            if (sx < 1 || sy < 1 || sx > n - 2 || sy > n - 2) continue;
            CHECK(warped.at(0, 0, y, x) == Catch::Approx(sx).margin(1e-4));
            CHECK(warped.at(0, 1, y, x) == Catch::Approx(sy).margin(1e-4));
        }

    Pcg32 rng(3);
    auto img = random_uniform<float>({1, 3, 24, 24}, rng, 0.f, 1.f);
    data::AffineParams flip;
    flip.hflip = true;
    auto mf = data::affine_about_center(flip, 24, 24);
    auto once = data::warp_bilinear(img, mf);
    auto twice = data::warp_bilinear(once, mf);
    CHECK(max_abs_diff(twice, img) == 0.f);
    bool moved = false;
    for (std::size_t i = 0; i < img.size() && !moved; ++i) moved = once[i] != img[i];
    CHECK(moved);
}

TEST_CASE("augment pipeline: determinism, one-hot trimaps, unknown-centered crops") {
    data::AugmentConfig cfg;
    cfg.crop = 64;
    cfg.resize_to = 96;

    auto s1 = data::make_sample(11, 5, 160, cfg);
    auto s2 = data::make_sample(11, 5, 160, cfg);
    REQUIRE(s1.has_value());
    REQUIRE(s2.has_value());
    CHECK(bitwise_equal(s1->image, s2->image));
    CHECK(bitwise_equal(s1->trimap, s2->trimap));
    CHECK(bitwise_equal(s1->alpha, s2->alpha));

    gca::validate_one_hot(s1->trimap);
    CHECK(bitwise_equal(s1->image, data::composite(s1->fg, s1->bg, s1->alpha)));
    CHECK(s1->image.shape() == Shape{1, 3, 64, 64});

    // the sample keeps at least one unknown pixel and all semitransparent
    // pixels sit inside the unknown channel
    int unknown = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            bool u = s1->trimap.at(0, gca::kTrimapUnknown, y, x) == 1.f;
            unknown += u;
            float a = s1->alpha.at(0, 0, y, x);
            if (a > 0.f && a < 1.f) REQUIRE(u);
        }
    CHECK(unknown > 0);

    // crop centers drawn over 1000 seeds are unknown pixels of the trimap
    auto [fg, alpha] = data::synthesize_foreground(3, 96);
    auto tri = data::generate_trimap(alpha, 6, 6);
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        Pcg32 rng(seed);
        auto [cy, cx] = data::sample_crop_center(tri, rng);
        REQUIRE(tri.at(0, gca::kTrimapUnknown, cy, cx) == 1.f);
    }
}

TEST_CASE("alpha recovery roundtrip through 8-bit storage") {
    data::AugmentConfig cfg;
    cfg.crop = 64;
    cfg.resize_to = 96;
    auto s = data::make_sample(19, 2, 160, cfg);
    REQUIRE(s.has_value());

    // store the layers at 8 bits, composite the stored layers, store that
    auto dir = temp_dir("roundtrip");
    io::write_png((dir / "fg.png").string(), s->fg);
    io::write_png((dir / "bg.png").string(), s->bg);
    auto fg = io::read_png((dir / "fg.png").string());
    auto bg = io::read_png((dir / "bg.png").string());
    io::write_png((dir / "image.png").string(), data::composite(fg, bg, s->alpha));
    auto img = io::read_png((dir / "image.png").string());

    // the stored image tracks the float composite within one 8-bit step
    auto float_composite = data::composite(fg, bg, s->alpha);
    CHECK(max_abs_diff(img, float_composite) <= 1.0f / 255 + 1e-6f);

    // alpha = (I-B)/(F-B) channelwise where well-conditioned, within 2/255
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            double best_den = 0, best = 0;
            for (int c = 0; c < 3; ++c) {
                double den = fg.at(0, c, y, x) - bg.at(0, c, y, x);
                if (std::abs(den) > std::abs(best_den)) {
                    best_den = den;
                    best = (img.at(0, c, y, x) - bg.at(0, c, y, x)) / den;
                }
            }
            if (std::abs(best_den) < 0.3) continue;
            REQUIRE(std::abs(best - s->alpha.at(0, 0, y, x)) < 2.0 / 255);
        }
    fs::remove_all(dir);
}

TEST_CASE("png 16-bit quantization and hsv roundtrip") {
    auto dir = temp_dir("png16");
    Tensor<float> t(1, 1, 2, 2);
    t[0] = 12345.f / 65535;
    t[1] = 0.f;
    t[2] = 1.f;
    t[3] = 0.5f;
    io::write_png((dir / "a.png").string(), t, 16);
    int bits = 0;
    auto back = io::read_png((dir / "a.png").string(), &bits);
    CHECK(bits == 16);
    CHECK(back[0] == Catch::Approx(t[0]).margin(0.5 / 65535));
    CHECK(back[1] == 0.f);
    CHECK(back[2] == 1.f);
    fs::remove_all(dir);

    Pcg32 rng(4);
    for (int i = 0; i < 200; ++i) {
        double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
        auto hsv = data::rgb_to_hsv(r, g, b);
        double r2, g2, b2;
        data::hsv_to_rgb(hsv, r2, g2, b2);
        CHECK(std::abs(r - r2) < 1e-9);
        CHECK(std::abs(g - g2) < 1e-9);
        CHECK(std::abs(b - b2) < 1e-9);
    }
}

TEST_CASE("dataset ingestion: pairs, missing alphas, 16-bit alpha scaling") {
    auto root = temp_dir("ingest");
    fs::create_directories(root / "fg");
    fs::create_directories(root / "alpha");
    Pcg32 rng(5);
    auto fg = random_uniform<float>({1, 3, 12, 12}, rng, 0.f, 1.f);
    Tensor<float> alpha(1, 1, 12, 12, 0.25f);
    io::write_png((root / "fg" / "a.png").string(), fg);
    io::write_png((root / "alpha" / "a.png").string(), alpha);
    io::write_png((root / "fg" / "b.png").string(), fg);
    io::write_png((root / "alpha" / "b.png").string(), alpha, 16);

    auto ds = data::IngestedDataset::open(root.string());
    CHECK(ds.size() == 2);
    auto [f0, a0] = ds.load(0);
    CHECK(f0.shape() == Shape{1, 3, 12, 12});
    auto [f1, a1] = ds.load(1);  // the 16-bit alpha
    CHECK(a1[0] == Catch::Approx(std::lround(0.25 * 65535) / 65535.0).margin(1e-7));

    fs::remove((root / "alpha" / "b.png"));
    try {
        data::IngestedDataset::open(root.string());
        FAIL("expected an ingestion error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("b.png") != std::string::npos);
    }

    fs::remove_all(root / "fg");
    CHECK_THROWS_AS(data::IngestedDataset::open(root.string()), IoError);
    fs::remove_all(root);
}
