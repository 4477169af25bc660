// uv_codec.hpp — displacement map storage.
//
// Quantized form: 3-channel 16-bit PNG. Values are linearly renormalized from
// [-20, +20] to [0, 65535] (half-away-from-zero rounding); out-of-range
// values are clipped with a warning. One quantization step is 40/65535, so a
// decode(encode(x)) roundtrip is exact to half a step.
//
// Lossless form: raw "HCUV" file — magic, u32 width, u32 height, float32
// data row-major (3 per texel), then one u8 valid flag per texel.
#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "headcraft/log.hpp"
#include "headcraft/uv_map.hpp"

namespace headcraft {

constexpr double kUvRange = 20.0;  // displacement components live in [-20, 20]

inline std::uint16_t encode_u16_value(double x) {
    double clipped = std::clamp(x, -kUvRange, kUvRange);
    double scaled = (clipped + kUvRange) / (2.0 * kUvRange) * 65535.0;
    long code = std::lround(scaled);  // rounds half away from zero
    return static_cast<std::uint16_t>(std::clamp(code, 0L, 65535L));
}

inline double decode_u16_value(std::uint16_t code) {
    return static_cast<double>(code) / 65535.0 * (2.0 * kUvRange) - kUvRange;
}

// RGB-interleaved codes, row-major. Returns the number of clipped values.
inline std::size_t encode_u16(const UvMap& map, std::vector<std::uint16_t>& codes) {
    codes.resize(map.data.size() * 3);
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        const Vec3& v = map.data[i];
        double ch[3] = {v.x, v.y, v.z};
        for (int c = 0; c < 3; ++c) {
            if (ch[c] < -kUvRange || ch[c] > kUvRange) ++clipped;
            codes[3 * i + static_cast<std::size_t>(c)] = encode_u16_value(ch[c]);
        }
    }
    if (clipped > 0)
        log_warn("uv", std::to_string(clipped) + " values clipped to [-20,20] during encoding");
    return clipped;
}

inline void decode_u16(const std::vector<std::uint16_t>& codes, int width, int height,
                       UvMap& map) {
    if (codes.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::runtime_error("decode_u16: code count mismatch");
    map = UvMap(width, height);
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        map.data[i] = {decode_u16_value(codes[3 * i]), decode_u16_value(codes[3 * i + 1]),
                       decode_u16_value(codes[3 * i + 2])};
        map.valid[i] = 1;  // quantized files carry no validity channel
    }
}

// --- PNG ---

namespace detail {

struct PngCloser {
    std::FILE* fp = nullptr;
    ~PngCloser() {
        if (fp) std::fclose(fp);
    }
};

}  // namespace detail

// 16-bit RGB PNG from interleaved codes.
inline void write_png16(const std::string& path, const std::vector<std::uint16_t>& codes,
                        int width, int height) {
    if (codes.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::runtime_error("write_png16: code count mismatch");
    detail::PngCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw std::runtime_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error while writing " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // in-memory codes are little-endian
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(&codes[static_cast<std::size_t>(y) * width * 3]));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 8-bit grayscale PNG (masks).
inline void write_png8_gray(const std::string& path, const std::vector<std::uint8_t>& pixels,
                            int width, int height) {
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw std::runtime_error("write_png8_gray: pixel count mismatch");
    detail::PngCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw std::runtime_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error while writing " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(&pixels[static_cast<std::size_t>(y) * width]);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;                  // after expansion: 1 or 3
    std::vector<std::uint16_t> data;   // interleaved, 16-bit normalized
};

// Reads any PNG into 16-bit samples (8-bit inputs are scaled by 257);
// palettes expand, alpha is dropped.
inline PngImage read_png(const std::string& path) {
    detail::PngCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) throw std::runtime_error("cannot open " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, file.fp) != 8 || png_sig_cmp(header, 0, 8))
        throw std::runtime_error(path + ": not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng error while reading " + path);
    }
    png_init_io(png, file.fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth < 16)
        png_set_expand_16(png);  // scales 8-bit samples by 257
    png_set_swap(png);
    png_read_update_info(png, info);

    PngImage img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(
            &img.data[static_cast<std::size_t>(y) * img.width * img.channels]);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void save_uv_png(const std::string& path, const UvMap& map) {
    std::vector<std::uint16_t> codes;
    encode_u16(map, codes);
    write_png16(path, codes, map.width, map.height);
}

inline UvMap load_uv_png(const std::string& path) {
    PngImage img = read_png(path);
    if (img.channels != 3) throw std::runtime_error(path + ": expected a 3-channel PNG");
    UvMap map;
    decode_u16(img.data, img.width, img.height, map);
    return map;
}

// --- raw HCUV ---

inline void save_uv_raw(const std::string& path, const UvMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("HCUV", 4);
    std::uint32_t w = static_cast<std::uint32_t>(map.width);
    std::uint32_t h = static_cast<std::uint32_t>(map.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    for (const Vec3& v : map.data) {
        float xyz[3] = {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
        out.write(reinterpret_cast<const char*>(xyz), 12);
    }
    out.write(reinterpret_cast<const char*>(map.valid.data()),
              static_cast<std::streamsize>(map.valid.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline UvMap load_uv_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "HCUV")
        throw std::runtime_error(path + ": not a raw UV map");
    std::uint32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w < 2 || h < 2) throw std::runtime_error(path + ": bad raw UV header");
    UvMap map(static_cast<int>(w), static_cast<int>(h));
    for (Vec3& v : map.data) {
        float xyz[3];
        in.read(reinterpret_cast<char*>(xyz), 12);
        v = {xyz[0], xyz[1], xyz[2]};
    }
    in.read(reinterpret_cast<char*>(map.valid.data()),
            static_cast<std::streamsize>(map.valid.size()));
    if (!in) throw std::runtime_error(path + ": truncated raw UV map");
    return map;
}

// Dispatch on extension: .png or .hcuv.
inline void save_uv_map(const std::string& path, const UvMap& map) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".png")
        save_uv_png(path, map);
    else
        save_uv_raw(path, map);
}

inline UvMap load_uv_map(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".png") return load_uv_png(path);
    return load_uv_raw(path);
}

}  // namespace headcraft
