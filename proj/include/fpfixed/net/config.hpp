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

// Network and training configuration, plus the flat `key = value` text form.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fpfixed/errors.hpp"

namespace fpfixed::net {

struct NetConfig {
    int in_h = 64;
    int in_w = 64;
    std::vector<int> stem_channels = {8, 16};
    int branch_channels = 16;
    int embed_dim = 32;  // per branch
    int num_classes = 2;
    int map_h = 16;
    int map_w = 16;
    int map_c = 6;
    bool use_localizer = false;
    int loc_pool = 4;             // localizer reads the input average-pooled by this factor
    double dropout_keep = 0.8;
    double weight_decay = 4e-5;
    double loc_lr_scale = 0.035;
    double ce1_weight = 1.0;
    double ce2_weight = 1.0;
    double map_weight = 1.0;
    std::uint64_t seed = 1;

    int stem_out_h() const { return in_h >> stem_channels.size(); }
    int stem_out_w() const { return in_w >> stem_channels.size(); }
    int stem_out_c() const { return stem_channels.empty() ? 1 : stem_channels.back(); }
    // Minutiae-branch features after the 2x2 average pool.
    int pooled_features() const { return branch_channels * (stem_out_h() / 2) * (stem_out_w() / 2); }
    int map_size() const { return map_h * map_w * map_c; }
    int loc_features() const { return (in_h / loc_pool) * (in_w / loc_pool); }
    // Localizer bounds scaled from a 448 px input (224 px translation, 285 px window).
    double loc_max_translation() const { return 0.5 * in_w; }
    double loc_max_rotation() const { return std::numbers::pi / 3.0; }
    double loc_window() const { return in_w * 285.0 / 448.0; }

    void validate() const {
        if (in_h < 1 || in_w < 1 || branch_channels < 1 || embed_dim < 1 || num_classes < 1 || map_h < 1 ||
            map_w < 1 || map_c < 1) {
            throw ValidationError("net config: dimensions must be positive");
        }
        for (int c : stem_channels) {
            if (c < 1) {
                throw ValidationError("net config: stem channels must be positive");
            }
        }
        const int div = 1 << (stem_channels.size() + 1);
        if (in_h % div != 0 || in_w % div != 0) {
            throw ValidationError("net config: input size must be divisible by " + std::to_string(div));
        }
        if (use_localizer && (loc_pool < 1 || in_h % loc_pool != 0 || in_w % loc_pool != 0)) {
            throw ValidationError("net config: loc_pool must divide the input size");
        }
        if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
            throw ValidationError("net config: dropout_keep must lie in (0, 1]");
        }
        if (weight_decay < 0.0 || !(loc_lr_scale > 0.0)) {
            throw ValidationError("net config: weight_decay >= 0 and loc_lr_scale > 0 required");
        }
        if (ce1_weight < 0.0 || ce2_weight < 0.0 || map_weight < 0.0) {
            throw ValidationError("net config: loss weights must be non-negative");
        }
    }

    bool operator==(const NetConfig&) const = default;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 30;
    double learning_rate = 1e-3;
    double rms_decay = 0.9;
    double rms_epsilon = 1e-8;
    bool augment = true;
    double aug_rotation_deg = 15.0;
    double aug_translation = 4.0;  // pixels
    double aug_brightness = 0.1;
    double aug_min_crop = 0.9;  // crop side fraction before resizing back
    double map_sigma_s = 1.0;   // map cells
    double map_sigma_o = 1.0;
    int distill_copies = 4;  // augmented copies per image added to the distillation set
    std::uint64_t seed = 7;

    void validate() const {
        if (epochs < 0 || batch_size < 1) {
            throw ValidationError("train config: epochs >= 0 and batch_size >= 1 required");
        }
        if (!(learning_rate > 0.0) || !(rms_decay >= 0.0 && rms_decay < 1.0) || !(rms_epsilon > 0.0)) {
            throw ValidationError("train config: invalid optimizer settings");
        }
        if (!(aug_min_crop > 0.0 && aug_min_crop <= 1.0)) {
            throw ValidationError("train config: aug_min_crop must lie in (0, 1]");
        }
        if (distill_copies < 0) {
            throw ValidationError("train config: distill_copies must be >= 0");
        }
        if (!(map_sigma_s > 0.0) || !(map_sigma_o > 0.0)) {
            throw ValidationError("train config: map bandwidths must be positive");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(d)) {
        throw ValidationError("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return d;
}

inline int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) {
        throw ValidationError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ValidationError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(to_int(key, trim(item)));
    }
    return out;
}

inline std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

}  // namespace detail

// Parses `key = value` lines ('#' starts a comment). Returns the pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

// Applies one key to whichever config owns it. Returns false for unknown keys.
inline bool apply_key(NetConfig& n, const std::string& k, const std::string& v) {
    using namespace detail;
    if (k == "in_h") n.in_h = to_int(k, v);
    else if (k == "in_w") n.in_w = to_int(k, v);
    else if (k == "stem_channels") n.stem_channels = to_int_list(k, v);
    else if (k == "branch_channels") n.branch_channels = to_int(k, v);
    else if (k == "embed_dim") n.embed_dim = to_int(k, v);
    else if (k == "num_classes") n.num_classes = to_int(k, v);
    else if (k == "map_h") n.map_h = to_int(k, v);
    else if (k == "map_w") n.map_w = to_int(k, v);
    else if (k == "map_c") n.map_c = to_int(k, v);
    else if (k == "use_localizer") n.use_localizer = to_bool(k, v);
    else if (k == "loc_pool") n.loc_pool = to_int(k, v);
    else if (k == "dropout_keep") n.dropout_keep = to_double(k, v);
    else if (k == "weight_decay") n.weight_decay = to_double(k, v);
    else if (k == "loc_lr_scale") n.loc_lr_scale = to_double(k, v);
    else if (k == "ce1_weight") n.ce1_weight = to_double(k, v);
    else if (k == "ce2_weight") n.ce2_weight = to_double(k, v);
    else if (k == "map_weight") n.map_weight = to_double(k, v);
    else if (k == "net_seed") n.seed = static_cast<std::uint64_t>(to_int(k, v));
    else return false;
    return true;
}

inline bool apply_key(TrainConfig& t, const std::string& k, const std::string& v) {
    using namespace detail;
    if (k == "epochs") t.epochs = to_int(k, v);
    else if (k == "batch_size") t.batch_size = to_int(k, v);
    else if (k == "learning_rate") t.learning_rate = to_double(k, v);
    else if (k == "rms_decay") t.rms_decay = to_double(k, v);
    else if (k == "rms_epsilon") t.rms_epsilon = to_double(k, v);
    else if (k == "augment") t.augment = to_bool(k, v);
    else if (k == "aug_rotation_deg") t.aug_rotation_deg = to_double(k, v);
    else if (k == "aug_translation") t.aug_translation = to_double(k, v);
    else if (k == "aug_brightness") t.aug_brightness = to_double(k, v);
    else if (k == "aug_min_crop") t.aug_min_crop = to_double(k, v);
    else if (k == "map_sigma_s") t.map_sigma_s = to_double(k, v);
    else if (k == "map_sigma_o") t.map_sigma_o = to_double(k, v);
    else if (k == "distill_copies") t.distill_copies = to_int(k, v);
    else if (k == "train_seed") t.seed = static_cast<std::uint64_t>(to_int(k, v));
    else return false;
    return true;
}

inline void apply_key_values(const std::string& text, NetConfig& net, TrainConfig& train) {
    for (const auto& [k, v] : parse_key_values(text)) {
        if (!apply_key(net, k, v) && !apply_key(train, k, v)) {
            throw ValidationError("config: unknown key '" + k + "'");
        }
    }
}

inline std::string format_key_values(const NetConfig& n) {
    std::ostringstream os;
    os.precision(17);
    os << "in_h = " << n.in_h << "\n"
       << "in_w = " << n.in_w << "\n"
       << "stem_channels = " << detail::join(n.stem_channels) << "\n"
       << "branch_channels = " << n.branch_channels << "\n"
       << "embed_dim = " << n.embed_dim << "\n"
       << "num_classes = " << n.num_classes << "\n"
       << "map_h = " << n.map_h << "\n"
       << "map_w = " << n.map_w << "\n"
       << "map_c = " << n.map_c << "\n"
       << "use_localizer = " << (n.use_localizer ? "true" : "false") << "\n"
       << "loc_pool = " << n.loc_pool << "\n"
       << "dropout_keep = " << n.dropout_keep << "\n"
       << "weight_decay = " << n.weight_decay << "\n"
       << "loc_lr_scale = " << n.loc_lr_scale << "\n"
       << "ce1_weight = " << n.ce1_weight << "\n"
       << "ce2_weight = " << n.ce2_weight << "\n"
       << "map_weight = " << n.map_weight << "\n"
       << "net_seed = " << n.seed << "\n";
    return os.str();
}

}  // namespace fpfixed::net
