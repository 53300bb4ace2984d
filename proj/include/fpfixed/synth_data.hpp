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

// Deterministic fingerprint-like data: identities carry a smooth orientation
// field, a ridge frequency and a master minutiae set; impressions render the
// ridge pattern under a rigid motion with noise and a brightness offset.
//
// Ridges are an oriented sinusoid whose phase also winds once around every
// master minutia (sign chosen per minutia), which places a ridge ending or
// bifurcation at each minutia location.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/errors.hpp"
#include "fpfixed/image.hpp"
#include "fpfixed/minutiae_map.hpp"
#include "fpfixed/rng.hpp"

namespace fpfixed {

struct SynthConfig {
    int width = 64;
    int height = 64;
    int min_minutiae = 15;
    int max_minutiae = 40;
    double min_frequency = 0.08;  // cycles per pixel
    double max_frequency = 0.12;
    double minutiae_margin = 4.0;  // pixels kept clear of the border when placing master minutiae
    double max_rotation_deg = 20.0;
    double max_translation = 10.0;  // pixels
    double max_noise_sigma = 0.05;
    double max_brightness = 0.1;
};

// Low-order harmonic mixture; the field is the unwrapped angle, the stored grid reduces it to [0, pi).
struct OrientationHarmonic {
    double amplitude = 0.0;
    double kx = 0.0;  // radians per pixel
    double ky = 0.0;
    double phase = 0.0;
};

struct SyntheticIdentity {
    std::string id;
    MinutiaeTemplate master_minutiae;
    std::vector<float> orientation_field;  // height x width, values in [0, pi)
    int field_h = 0;
    int field_w = 0;
    double ridge_frequency = 0.1;

    double base_orientation = 0.0;
    std::vector<OrientationHarmonic> harmonics;
    std::vector<int> polarity;  // +-1 winding per master minutia
    double ridge_phase = 0.0;

    double orientation_at(double x, double y) const {
        double phi = base_orientation;
        for (const auto& h : harmonics) {
            phi += h.amplitude * std::cos(h.kx * x + h.ky * y + h.phase);
        }
        return phi;
    }

    // Master rendering in [0, 1] at a continuous pixel position.
    double ridge_value(double x, double y) const {
        const double phi = orientation_at(x, y);
        double phase = kTwoPi * ridge_frequency * (x * std::cos(phi) + y * std::sin(phi)) + ridge_phase;
        for (std::size_t t = 0; t < master_minutiae.minutiae.size(); ++t) {
            const auto& m = master_minutiae.minutiae[t];
            phase += polarity[t] * std::atan2(y - m.y, x - m.x);
        }
        return 0.5 * (1.0 + std::cos(phase));
    }
};

struct PerturbParams {
    double rotation = 0.0;  // radians, about the image center
    double tx = 0.0;
    double ty = 0.0;
    std::uint64_t noise_seed = 0;
    double noise_sigma = 0.0;
    double brightness = 0.0;

    static PerturbParams none() { return {}; }
};

struct Impression {
    GrayImage image;
    MinutiaeTemplate minutiae;
    int label = 0;
    int impression_index = 0;
    PerturbParams params;
};

inline SyntheticIdentity gen_identity(std::uint64_t seed, const SynthConfig& cfg = {}) {
    Rng rng(seed);
    SyntheticIdentity id;
    id.id = "id_" + std::to_string(seed);
    id.field_w = cfg.width;
    id.field_h = cfg.height;
    id.ridge_frequency = rng.uniform(cfg.min_frequency, cfg.max_frequency);
    id.base_orientation = rng.uniform(0.0, std::numbers::pi);
    id.ridge_phase = rng.uniform(0.0, kTwoPi);
    const double scale = kTwoPi / std::max(cfg.width, cfg.height);
    for (int n = 0; n < 3; ++n) {
        OrientationHarmonic h;
        h.amplitude = rng.uniform(0.2, 0.6);
        h.kx = scale * rng.uniform(-1.0, 1.0);
        h.ky = scale * rng.uniform(-1.0, 1.0);
        h.phase = rng.uniform(0.0, kTwoPi);
        id.harmonics.push_back(h);
    }

    id.orientation_field.resize(static_cast<std::size_t>(cfg.width) * cfg.height);
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            double phi = std::fmod(id.orientation_at(x, y), std::numbers::pi);
            if (phi < 0.0) {
                phi += std::numbers::pi;
            }
            if (phi >= std::numbers::pi) {
                phi = 0.0;
            }
            float f = static_cast<float>(phi);
            if (static_cast<double>(f) >= std::numbers::pi) {
                f = std::nextafter(static_cast<float>(std::numbers::pi), 0.0F);  // rounding up to float pi
            }
            id.orientation_field[static_cast<std::size_t>(y) * cfg.width + x] = f;
        }
    }

    auto& master = id.master_minutiae;
    master.w_img = cfg.width;
    master.h_img = cfg.height;
    const auto n = rng.integer(cfg.min_minutiae, cfg.max_minutiae);
    const double m = std::min(cfg.minutiae_margin, 0.25 * std::min(cfg.width, cfg.height));
    for (std::int64_t t = 0; t < n; ++t) {
        const double x = rng.uniform(m, cfg.width - m);
        const double y = rng.uniform(m, cfg.height - m);
        const double flip = rng.coin() ? std::numbers::pi : 0.0;
        master.minutiae.push_back(Minutia::make(x, y, id.orientation_at(x, y) + flip));
        id.polarity.push_back(rng.coin() ? 1 : -1);
    }
    return id;
}

inline double image_center_x(const SynthConfig& cfg) { return 0.5 * cfg.width; }
inline double image_center_y(const SynthConfig& cfg) { return 0.5 * cfg.height; }

// Applies the rigid motion p' = c + R(rotation)(p - c) + t, written so that a
// zero rotation adds the translation exactly.
inline Minutia move_minutia(const Minutia& m, const PerturbParams& p, double cx, double cy) {
    const double c = std::cos(p.rotation), s = std::sin(p.rotation);
    const double dx = m.x - cx, dy = m.y - cy;
    const double x = m.x + p.tx + ((c - 1.0) * dx - s * dy);
    const double y = m.y + p.ty + (s * dx + (c - 1.0) * dy);
    return Minutia::make(x, y, m.theta + p.rotation);
}

inline Impression render_impression(const SyntheticIdentity& identity, const PerturbParams& params,
                                    const SynthConfig& cfg = {}) {
    const int w = cfg.width, h = cfg.height;
    const double cx = image_center_x(cfg), cy = image_center_y(cfg);
    const double c = std::cos(params.rotation), s = std::sin(params.rotation);
    Rng noise(params.noise_seed);

    Impression imp;
    imp.params = params;
    imp.image = GrayImage(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse motion back into master coordinates.
            const double ux = x - cx - params.tx, uy = y - cy - params.ty;
            const double mx = cx + c * ux + s * uy;
            const double my = cy - s * ux + c * uy;
            double v = identity.ridge_value(mx, my) + params.brightness;
            if (params.noise_sigma > 0.0) {
                v += noise.normal(0.0, params.noise_sigma);
            }
            imp.image.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    imp.minutiae.w_img = w;
    imp.minutiae.h_img = h;
    for (const auto& m : identity.master_minutiae.minutiae) {
        Minutia moved = move_minutia(m, params, cx, cy);
        if (moved.x >= 0.0 && moved.x < w && moved.y >= 0.0 && moved.y < h) {
            imp.minutiae.minutiae.push_back(moved);
        }
    }
    return imp;
}

inline PerturbParams draw_perturbation(std::uint64_t seed, const SynthConfig& cfg = {}) {
    Rng rng(seed);
    PerturbParams p;
    const double max_rot = cfg.max_rotation_deg * std::numbers::pi / 180.0;
    p.rotation = rng.uniform(-max_rot, max_rot);
    p.tx = rng.uniform(-cfg.max_translation, cfg.max_translation);
    p.ty = rng.uniform(-cfg.max_translation, cfg.max_translation);
    p.noise_sigma = rng.uniform(0.0, cfg.max_noise_sigma);
    p.brightness = rng.uniform(-cfg.max_brightness, cfg.max_brightness);
    p.noise_seed = rng.next();
    return p;
}

inline Impression render_impression(const SyntheticIdentity& identity, std::uint64_t seed, const SynthConfig& cfg = {}) {
    return render_impression(identity, draw_perturbation(seed, cfg), cfg);
}

struct Dataset {
    std::vector<Impression> train;
    std::vector<Impression> eval;
    int num_classes = 0;
    int impressions_per_class = 0;
    std::uint64_t seed = 0;
    SynthConfig config;
};

inline std::uint64_t identity_seed(std::uint64_t seed, int k) { return mix_seed(seed, static_cast<std::uint64_t>(k)); }

// The last impression of every class is held out for evaluation.
inline Dataset make_dataset(int num_classes, int impressions_per_class, std::uint64_t seed, const SynthConfig& cfg = {}) {
    if (num_classes < 2 || impressions_per_class < 2) {
        throw ValidationError("make_dataset: need >= 2 classes and >= 2 impressions per class");
    }
    Dataset ds;
    ds.num_classes = num_classes;
    ds.impressions_per_class = impressions_per_class;
    ds.seed = seed;
    ds.config = cfg;
    for (int k = 0; k < num_classes; ++k) {
        const auto id_seed = identity_seed(seed, k);
        const auto identity = gen_identity(id_seed, cfg);
        for (int j = 0; j < impressions_per_class; ++j) {
            Impression imp = render_impression(identity, mix_seed(id_seed, 1000 + static_cast<std::uint64_t>(j)), cfg);
            imp.label = k;
            imp.impression_index = j;
            (j == impressions_per_class - 1 ? ds.eval : ds.train).push_back(std::move(imp));
        }
    }
    return ds;
}

inline std::string class_dir_name(int k) { return "class_" + std::to_string(k); }
inline std::string impression_stem(int j) { return "imp_" + std::to_string(j); }

inline nlohmann::json to_json(const SynthConfig& c) {
    return {{"width", c.width},
            {"height", c.height},
            {"min_minutiae", c.min_minutiae},
            {"max_minutiae", c.max_minutiae},
            {"min_frequency", c.min_frequency},
            {"max_frequency", c.max_frequency},
            {"minutiae_margin", c.minutiae_margin},
            {"max_rotation_deg", c.max_rotation_deg},
            {"max_translation", c.max_translation},
            {"max_noise_sigma", c.max_noise_sigma},
            {"max_brightness", c.max_brightness}};
}

// Layout: class_<k>/imp_<j>.pgm with a sibling imp_<j>.mnt, plus manifest.json.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = ds.seed;
    manifest["num_classes"] = ds.num_classes;
    manifest["impressions_per_class"] = ds.impressions_per_class;
    manifest["config"] = to_json(ds.config);
    manifest["impressions"] = nlohmann::json::array();
    auto emit = [&](const Impression& imp, const char* split) {
        const auto cdir = dir / class_dir_name(imp.label);
        std::filesystem::create_directories(cdir);
        const auto stem = impression_stem(imp.impression_index);
        write_image(cdir / (stem + ".pgm"), imp.image);
        write_mnt(cdir / (stem + ".mnt"), imp.minutiae);
        manifest["impressions"].push_back({{"class", imp.label},
                                           {"impression", imp.impression_index},
                                           {"split", split},
                                           {"image", class_dir_name(imp.label) + "/" + stem + ".pgm"},
                                           {"minutiae", class_dir_name(imp.label) + "/" + stem + ".mnt"},
                                           {"rotation", imp.params.rotation},
                                           {"tx", imp.params.tx},
                                           {"ty", imp.params.ty},
                                           {"noise_seed", imp.params.noise_seed},
                                           {"noise_sigma", imp.params.noise_sigma},
                                           {"brightness", imp.params.brightness}});
    };
    for (const auto& imp : ds.train) emit(imp, "train");
    for (const auto& imp : ds.eval) emit(imp, "eval");
    detail::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    const auto bytes = detail::read_file(dir / "manifest.json");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
        Dataset ds;
        ds.seed = manifest.at("seed").get<std::uint64_t>();
        ds.num_classes = manifest.at("num_classes").get<int>();
        ds.impressions_per_class = manifest.at("impressions_per_class").get<int>();
        const auto& c = manifest.at("config");
        ds.config.width = c.at("width").get<int>();
        ds.config.height = c.at("height").get<int>();
        for (const auto& e : manifest.at("impressions")) {
            Impression imp;
            imp.label = e.at("class").get<int>();
            imp.impression_index = e.at("impression").get<int>();
            imp.image = read_image(dir / e.at("image").get<std::string>());
            imp.minutiae = read_mnt(dir / e.at("minutiae").get<std::string>());
            imp.params.rotation = e.at("rotation").get<double>();
            imp.params.tx = e.at("tx").get<double>();
            imp.params.ty = e.at("ty").get<double>();
            imp.params.noise_seed = e.at("noise_seed").get<std::uint64_t>();
            imp.params.noise_sigma = e.at("noise_sigma").get<double>();
            imp.params.brightness = e.at("brightness").get<double>();
            if (imp.label < 0 || imp.label >= ds.num_classes) {
                throw FormatError("manifest: class index out of range");
            }
            (e.at("split").get<std::string>() == "eval" ? ds.eval : ds.train).push_back(std::move(imp));
        }
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

}  // namespace fpfixed
