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

// Minutiae point sets and their dense c-channel heatmap encoding.
//
// A minutia (x, y, theta) contributes exp(-d^2 / (2 sigma_s^2)) spatially to
// every map cell, where d is measured in map cells from the minutia (scaled
// into map coordinates) to the cell center (j + 0.5, i + 0.5), times
// exp(-dphi / (2 sigma_o^2)) to channel k, dphi being the circular distance
// between theta and the channel angle 2 k pi / c. Contributions are summed.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/errors.hpp"

namespace fpfixed {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Reduces an angle into [0, 2 pi).
inline double wrap_angle(double theta) {
    if (!std::isfinite(theta)) {
        throw DomainError("angle is not finite");
    }
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    return r >= kTwoPi ? 0.0 : r;
}

// Minimal distance between two directions on the 2 pi circle, in [0, pi].
inline double orientation_diff(double theta1, double theta2) {
    if (!std::isfinite(theta1) || !std::isfinite(theta2)) {
        throw DomainError("orientation_diff: non-finite angle");
    }
    double d = std::abs(wrap_angle(theta1) - wrap_angle(theta2));
    return d <= std::numbers::pi ? d : kTwoPi - d;
}

struct Minutia {
    double x = 0.0;      // pixels, horizontal, origin top-left
    double y = 0.0;      // pixels, downward
    double theta = 0.0;  // radians in [0, 2 pi)

    static Minutia make(double x, double y, double theta) { return Minutia{x, y, wrap_angle(theta)}; }

    bool operator==(const Minutia&) const = default;
};

struct MinutiaeTemplate {
    std::vector<Minutia> minutiae;
    int w_img = 448;
    int h_img = 448;

    void validate() const {
        if (w_img < 1 || h_img < 1) {
            throw ValidationError("minutiae template: image dimensions must be positive");
        }
        for (std::size_t t = 0; t < minutiae.size(); ++t) {
            const auto& m = minutiae[t];
            if (!std::isfinite(m.x) || !std::isfinite(m.y) || !std::isfinite(m.theta)) {
                throw ValidationError("minutia " + std::to_string(t) + " is not finite");
            }
            if (m.x < 0.0 || m.x >= w_img || m.y < 0.0 || m.y >= h_img) {
                throw ValidationError("minutia " + std::to_string(t) + " lies outside the " +
                                      std::to_string(w_img) + "x" + std::to_string(h_img) + " image");
            }
            if (m.theta < 0.0 || m.theta >= kTwoPi) {
                throw ValidationError("minutia " + std::to_string(t) + " orientation not reduced to [0, 2pi)");
            }
        }
    }

    bool operator==(const MinutiaeTemplate&) const = default;
};

struct MapConfig {
    int h_map = 128;
    int w_map = 128;
    int c = 6;
    double sigma_s = 2.0;  // map cells
    double sigma_o = 2.0;  // radians
    // Multiples of sigma_s beyond which a minutia is skipped; <= 0 evaluates every cell.
    double truncation_radius = 6.0;

    void validate() const {
        if (h_map < 1 || w_map < 1 || c < 1) {
            throw ValidationError("map config: h_map, w_map and c must be >= 1");
        }
        if (!(sigma_s > 0.0) || !(sigma_o > 0.0) || !std::isfinite(sigma_s) || !std::isfinite(sigma_o)) {
            throw ValidationError("map config: sigma_s and sigma_o must be positive");
        }
        if (!std::isfinite(truncation_radius)) {
            throw ValidationError("map config: truncation radius must be finite");
        }
    }

    bool oracle_mode() const { return truncation_radius <= 0.0; }
};

// Channel-last, row-major h x w x c grid.
struct MinutiaeMap {
    std::vector<float> values;
    MapConfig config;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * config.w_map + j) * config.c + k;
    }
    float at(int i, int j, int k) const { return values[index(i, j, k)]; }
    std::size_t size() const { return values.size(); }
};

inline double spatial_contribution(double mx, double my, int i, int j, double sigma_s) {
    double dx = mx - (j + 0.5);
    double dy = my - (i + 0.5);
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s));
}

// The orientation difference enters unsquared.
inline double orientation_contribution(double theta, int k, int c, double sigma_o) {
    double dphi = orientation_diff(theta, kTwoPi * k / c);
    return std::exp(-dphi / (2.0 * sigma_o * sigma_o));
}

inline MinutiaeMap encode_map(const MinutiaeTemplate& tpl, const MapConfig& config = {}) {
    config.validate();
    tpl.validate();

    const int h = config.h_map, w = config.w_map, c = config.c;
    const double sx = static_cast<double>(w) / tpl.w_img;
    const double sy = static_cast<double>(h) / tpl.h_img;
    const double radius = config.truncation_radius * config.sigma_s;
    const double radius_sq = radius * radius;
    const double inv_two_sigma_sq = 1.0 / (2.0 * config.sigma_s * config.sigma_s);

    std::vector<double> acc(static_cast<std::size_t>(h) * w * c, 0.0);
    std::vector<double> co(c);

    for (const auto& m : tpl.minutiae) {
        const double mx = m.x * sx;
        const double my = m.y * sy;
        for (int k = 0; k < c; ++k) {
            co[k] = orientation_contribution(m.theta, k, c, config.sigma_o);
        }
        int i0 = 0, i1 = h - 1, j0 = 0, j1 = w - 1;
        if (!config.oracle_mode()) {
            i0 = std::max(0, static_cast<int>(std::floor(my - 0.5 - radius)));
            i1 = std::min(h - 1, static_cast<int>(std::ceil(my - 0.5 + radius)));
            j0 = std::max(0, static_cast<int>(std::floor(mx - 0.5 - radius)));
            j1 = std::min(w - 1, static_cast<int>(std::ceil(mx - 0.5 + radius)));
        }
        for (int i = i0; i <= i1; ++i) {
            const double dy = my - (i + 0.5);
            for (int j = j0; j <= j1; ++j) {
                const double dx = mx - (j + 0.5);
                const double d2 = dx * dx + dy * dy;
                if (!config.oracle_mode() && d2 > radius_sq) {
                    continue;
                }
                const double cs = std::exp(-d2 * inv_two_sigma_sq);
                double* cell = &acc[(static_cast<std::size_t>(i) * w + j) * c];
                for (int k = 0; k < c; ++k) {
                    cell[k] += cs * co[k];
                }
            }
        }
    }

    MinutiaeMap map;
    map.config = config;
    map.values.assign(acc.begin(), acc.end());
    return map;
}

// Local maxima over the 3x3 spatial window and the two cyclically adjacent
// channels. Plateaus report only their first cell in storage order.
inline MinutiaeTemplate peak_extract(const MinutiaeMap& map, double threshold, int w_img = 448, int h_img = 448) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ValidationError("peak_extract: threshold must lie in (0, 1]");
    }
    const auto& cfg = map.config;
    const int h = cfg.h_map, w = cfg.w_map, c = cfg.c;
    MinutiaeTemplate out;
    out.w_img = w_img;
    out.h_img = h_img;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int k = 0; k < c; ++k) {
                const std::size_t self = map.index(i, j, k);
                const float v = map.values[self];
                if (!(v >= threshold)) {
                    continue;
                }
                bool is_peak = true;
                for (int di = -1; di <= 1 && is_peak; ++di) {
                    for (int dj = -1; dj <= 1 && is_peak; ++dj) {
                        const int ni = i + di, nj = j + dj;
                        if (ni < 0 || ni >= h || nj < 0 || nj >= w) {
                            continue;
                        }
                        for (int dk = -1; dk <= 1; ++dk) {
                            const int nk = ((k + dk) % c + c) % c;
                            const std::size_t other = map.index(ni, nj, nk);
                            if (other == self) {
                                continue;
                            }
                            const float n = map.values[other];
                            if (n > v || (n == v && other < self)) {
                                is_peak = false;
                                break;
                            }
                        }
                    }
                }
                if (is_peak) {
                    out.minutiae.push_back(Minutia::make((j + 0.5) * w_img / w, (i + 0.5) * h_img / h, kTwoPi * k / c));
                }
            }
        }
    }
    return out;
}

namespace detail {

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

// `MNT <w_img> <h_img> <n>` followed by n lines of `x y theta`.
inline std::string format_mnt(const MinutiaeTemplate& tpl) {
    std::string s = "MNT " + std::to_string(tpl.w_img) + " " + std::to_string(tpl.h_img) + " " +
                    std::to_string(tpl.minutiae.size()) + "\n";
    for (const auto& m : tpl.minutiae) {
        s += detail::format_double(m.x) + " " + detail::format_double(m.y) + " " + detail::format_double(m.theta) + "\n";
    }
    return s;
}

inline MinutiaeTemplate parse_mnt(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    long long w = 0, h = 0, n = -1;
    if (!(in >> tag >> w >> h >> n) || tag != "MNT" || n < 0) {
        throw FormatError("mnt: expected header 'MNT <w> <h> <n>'");
    }
    if (w < 1 || h < 1 || w > (1 << 20) || h > (1 << 20)) {
        throw FormatError("mnt: bad image dimensions");
    }
    MinutiaeTemplate tpl;
    tpl.w_img = static_cast<int>(w);
    tpl.h_img = static_cast<int>(h);
    for (long long t = 0; t < n; ++t) {
        double x = 0, y = 0, theta = 0;
        if (!(in >> x >> y >> theta)) {
            throw FormatError("mnt: expected " + std::to_string(n) + " minutiae, got " + std::to_string(t));
        }
        if (!std::isfinite(theta)) {
            throw FormatError("mnt: non-finite orientation");
        }
        tpl.minutiae.push_back(Minutia::make(x, y, theta));
    }
    std::string trailing;
    if (in >> trailing) {
        throw FormatError("mnt: trailing content after " + std::to_string(n) + " minutiae");
    }
    try {
        tpl.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("mnt: ") + e.what());
    }
    return tpl;
}

inline MinutiaeTemplate read_mnt(const std::filesystem::path& path) {
    auto bytes = detail::read_file(path);
    return parse_mnt(std::string(bytes.begin(), bytes.end()));
}

inline void write_mnt(const std::filesystem::path& path, const MinutiaeTemplate& tpl) {
    detail::write_file_atomic(path, format_mnt(tpl));
}

// `MAP <h> <w> <c> <sigma_s> <sigma_o>\n` then little-endian float32 values.
inline std::vector<std::uint8_t> serialize_map(const MinutiaeMap& map) {
    const auto& c = map.config;
    std::string header = "MAP " + std::to_string(c.h_map) + " " + std::to_string(c.w_map) + " " + std::to_string(c.c) +
                         " " + detail::format_double(c.sigma_s) + " " + detail::format_double(c.sigma_o) + "\n";
    std::vector<std::uint8_t> out;
    out.reserve(header.size() + map.values.size() * 4);
    detail::put_bytes(out, header);
    for (float v : map.values) {
        detail::put_f32(out, v);
    }
    return out;
}

inline MinutiaeMap deserialize_map(std::span<const std::uint8_t> bytes) {
    std::size_t eol = 0;
    while (eol < bytes.size() && eol < 256 && bytes[eol] != '\n') {
        ++eol;
    }
    if (eol >= bytes.size() || bytes[eol] != '\n') {
        throw FormatError("map dump: missing header line");
    }
    std::istringstream in(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(eol)));
    std::string tag;
    MinutiaeMap map;
    auto& c = map.config;
    if (!(in >> tag >> c.h_map >> c.w_map >> c.c >> c.sigma_s >> c.sigma_o) || tag != "MAP") {
        throw FormatError("map dump: expected header 'MAP <h> <w> <c> <sigma_s> <sigma_o>'");
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("map dump: ") + e.what());
    }
    const std::size_t count = static_cast<std::size_t>(c.h_map) * c.w_map * c.c;
    detail::ByteReader reader(bytes.subspan(eol + 1), "map dump");
    if (reader.remaining() != count * 4) {
        throw FormatError("map dump: expected " + std::to_string(count * 4) + " payload bytes, found " +
                          std::to_string(reader.remaining()));
    }
    map.values.resize(count);
    for (auto& v : map.values) {
        v = reader.f32();
    }
    return map;
}

}  // namespace fpfixed
