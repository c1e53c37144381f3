#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gcamat/core/tensor.hpp"

namespace gcamat::io {

// Decoded PNG: 1 or 3 channels, 8- or 16-bit samples (16-bit values are kept
// at full resolution and normalized by 65535).
struct PngData {
    int w = 0, h = 0, channels = 0, bit_depth = 8;
    std::vector<uint16_t> samples;  // interleaved, row-major
};

namespace detail {
struct FileCloser {
    std::FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};
}  // namespace detail

inline PngData read_png_raw(const std::string& path) {
    detail::FileCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng info init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> buf;
    PngData out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // stored big-endian
    png_read_update_info(png, info);

    out.w = static_cast<int>(w);
    out.h = static_cast<int>(h);
    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": unsupported channel count " + std::to_string(out.channels));
    }

    std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * out.h);
    rows.resize(out.h);
    for (int y = 0; y < out.h; ++y) rows[y] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out.samples.resize(static_cast<std::size_t>(out.w) * out.h * out.channels);
    if (out.bit_depth == 16) {
        const uint16_t* src = reinterpret_cast<const uint16_t*>(buf.data());
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = src[i];
    } else {
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = buf[i];
    }
    return out;
}

// Read as a (1,C,H,W) float tensor in [0,1].
inline Tensor<float> read_png(const std::string& path, int* bit_depth = nullptr) {
    PngData p = read_png_raw(path);
    if (bit_depth) *bit_depth = p.bit_depth;
    const float scale = p.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    Tensor<float> t(1, p.channels, p.h, p.w);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x)
            for (int c = 0; c < p.channels; ++c)
                t.at(0, c, y, x) =
                    p.samples[(static_cast<std::size_t>(y) * p.w + x) * p.channels + c] * scale;
    return t;
}

// Write a (1,{1,3},H,W) tensor as an 8- or 16-bit PNG, clamping to [0,1].
inline void write_png(const std::string& path, const Tensor<float>& t, int bit_depth = 8) {
    const Shape s = t.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3))
        throw IoError("write_png expects a (1,{1,3},H,W) tensor, got " + s.str());
    if (bit_depth != 8 && bit_depth != 16) throw IoError("write_png: bit depth must be 8 or 16");

    detail::FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw IoError("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng info init failed");
    }
    std::vector<png_byte> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path);
    }
    png_init_io(png, file.fp);
    int color = s.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, s.w, s.h, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    auto quant = [&](float v, int maxv) {
        float c = std::min(std::max(v, 0.0f), 1.0f);
        return static_cast<unsigned>(std::lround(c * maxv));
    };
    const std::size_t bps = bit_depth / 8;
    buf.resize(static_cast<std::size_t>(s.w) * s.h * s.c * bps);
    rows.resize(s.h);
    for (int y = 0; y < s.h; ++y) {
        rows[y] = buf.data() + static_cast<std::size_t>(y) * s.w * s.c * bps;
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < s.c; ++c) {
                std::size_t o = (static_cast<std::size_t>(x) * s.c + c) * bps;
                if (bit_depth == 8) {
                    rows[y][o] = static_cast<png_byte>(quant(t.at(0, c, y, x), 255));
                } else {
                    uint16_t v = static_cast<uint16_t>(quant(t.at(0, c, y, x), 65535));
                    std::memcpy(rows[y] + o, &v, 2);
                }
            }
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace gcamat::io
