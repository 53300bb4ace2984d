// Copyright (C) 2026 The fpfixed Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

// Grayscale float images and 8-bit PGM / PNG I/O. PNG support needs libpng
// and FPFIXED_HAVE_PNG defined before inclusion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/errors.hpp"

#ifdef FPFIXED_HAVE_PNG
#include <png.h>
#endif

namespace fpfixed {

struct GrayImage {
    int h = 0;
    int w = 0;
    std::vector<float> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int height, int width, float fill = 0.0F)
        : h(height), w(width), pixels(static_cast<std::size_t>(height) * width, fill) {}

    float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * w + x]; }

    void validate() const {
        if (h < 2 || w < 2) {
            throw ValidationError("image must be at least 2x2");
        }
        if (pixels.size() != static_cast<std::size_t>(h) * w) {
            throw ValidationError("image pixel count does not match its dimensions");
        }
        for (float p : pixels) {
            if (!std::isfinite(p)) {
                throw ValidationError("image contains a non-finite pixel");
            }
        }
    }

    bool operator==(const GrayImage&) const = default;
};

inline std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0F, 1.0F) * 255.0F));
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    std::string header = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (float p : img.pixels) {
        out.push_back(to_byte(p));
    }
    return out;
}

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    // Header tokens separated by whitespace, '#' comments allowed.
    std::size_t pos = 0;
    auto next_token = [&]() {
        std::string tok;
        while (pos < bytes.size()) {
            char ch = static_cast<char>(bytes[pos]);
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos;
            } else {
                break;
            }
        }
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            tok.push_back(static_cast<char>(bytes[pos++]));
        }
        return tok;
    };
    std::string magic = next_token();
    if (magic != "P5" && magic != "P2") {
        throw FormatError("pgm: unsupported magic '" + magic + "'");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw FormatError("pgm: malformed header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
        throw FormatError("pgm: only 8-bit images with positive dimensions are supported");
    }
    GrayImage img(h, w);
    if (magic == "P5") {
        ++pos;  // single whitespace after maxval
        if (bytes.size() - std::min(pos, bytes.size()) < img.pixels.size()) {
            throw FormatError("pgm: truncated pixel data");
        }
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            img.pixels[i] = static_cast<float>(bytes[pos + i]) / static_cast<float>(maxval);
        }
    } else {
        for (auto& p : img.pixels) {
            std::string tok = next_token();
            if (tok.empty()) {
                throw FormatError("pgm: truncated pixel data");
            }
            p = static_cast<float>(std::stoi(tok)) / static_cast<float>(maxval);
        }
    }
    return img;
}

#ifdef FPFIXED_HAVE_PNG
inline GrayImage read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw FormatError("png: " + std::string(image.message));
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("png: " + msg);
    }
    GrayImage img(static_cast<int>(image.height), static_cast<int>(image.width));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<float>(buffer[i]) / 255.0F;
    }
    return img;
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.w);
    image.height = static_cast<png_uint_32>(img.h);
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> raw(img.pixels.size());
    std::transform(img.pixels.begin(), img.pixels.end(), raw.begin(), to_byte);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
        throw std::runtime_error("png: " + std::string(image.message));
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
        throw std::runtime_error("png: " + std::string(image.message));
    }
    out.resize(size);
    return out;
}
#endif

inline bool has_png_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext == ".png";
}

inline GrayImage read_image(const std::filesystem::path& path) {
    if (has_png_extension(path)) {
#ifdef FPFIXED_HAVE_PNG
        return read_png(path);
#else
        throw FormatError("png support not compiled in: " + path.string());
#endif
    }
    auto bytes = detail::read_file(path);
    return decode_pgm(bytes);
}

inline void write_image(const std::filesystem::path& path, const GrayImage& img) {
    if (has_png_extension(path)) {
#ifdef FPFIXED_HAVE_PNG
        detail::write_file_atomic(path, encode_png(img));
        return;
#else
        throw FormatError("png support not compiled in: " + path.string());
#endif
    }
    detail::write_file_atomic(path, encode_pgm(img));
}

}  // namespace fpfixed
