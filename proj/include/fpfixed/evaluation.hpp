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

// Verification (TAR @ FAR) and identification (CMC) metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpfixed/errors.hpp"
#include "fpfixed/fixed_template.hpp"
#include "fpfixed/gallery.hpp"

namespace fpfixed {

struct FarPoint {
    double far = 0.0;           // requested level
    double threshold = 0.0;     // accept when score >= threshold
    double tar = 0.0;
    double measured_far = 0.0;  // imposter fraction at the threshold, <= far
};

struct EvalReport {
    std::vector<FarPoint> tar_at_far;
    std::vector<double> cmc;  // cmc[r - 1] = fraction of probes with the true id within rank r
    std::size_t genuine_count = 0;
    std::size_t imposter_count = 0;
    std::size_t probe_count = 0;

    double rank(std::size_t r) const { return cmc.at(r - 1); }
};

inline std::vector<double> default_far_levels() { return {1e-3, 1e-2, 1e-1}; }

// For each level f the threshold is the smallest observed score t with
// #(imposter >= t) <= f |imposters|; if even the top imposter score admits too
// many, the threshold sits just above it.
inline EvalReport eval_verification(const std::vector<double>& genuine, const std::vector<double>& imposter,
                                    const std::vector<double>& far_levels = default_far_levels()) {
    if (genuine.empty() || imposter.empty()) {
        throw ValidationError("eval_verification: need at least one genuine and one imposter score");
    }
    const double n_imp = static_cast<double>(imposter.size());
    std::vector<double> imp = imposter;
    std::sort(imp.begin(), imp.end());
    std::vector<double> gen = genuine;
    std::sort(gen.begin(), gen.end());
    auto count_at_least = [](const std::vector<double>& sorted, double t) {
        return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    };

    std::vector<double> candidates = imp;
    candidates.insert(candidates.end(), gen.begin(), gen.end());
    candidates.push_back(std::nextafter(imp.back(), std::numeric_limits<double>::infinity()));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    EvalReport report;
    report.genuine_count = genuine.size();
    report.imposter_count = imposter.size();
    for (double f : far_levels) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw ValidationError("eval_verification: FAR level must lie in (0, 1]");
        }
        // Tolerance absorbs levels written as 1/n in floating point.
        const double allowed = std::floor(f * n_imp + 1e-9);
        if (allowed < 1.0) {
            throw UnsupportedFarLevelError("insufficient number of imposters for FAR = " + std::to_string(f) + " (" +
                                           std::to_string(imposter.size()) + " imposter scores)");
        }
        // #(imposter >= t) is non-increasing in t, so the first admissible candidate is the smallest.
        auto it = std::partition_point(candidates.begin(), candidates.end(), [&](double t) {
            return static_cast<double>(count_at_least(imp, t)) > allowed;
        });
        const double t = *it;
        FarPoint p;
        p.far = f;
        p.threshold = t;
        p.measured_far = static_cast<double>(count_at_least(imp, t)) / n_imp;
        p.tar = static_cast<double>(count_at_least(gen, t)) / static_cast<double>(gen.size());
        report.tar_at_far.push_back(p);
    }
    return report;
}

inline EvalReport eval_verification_pairs(const std::vector<std::pair<FixedTemplate, FixedTemplate>>& genuine_pairs,
                                          const std::vector<std::pair<FixedTemplate, FixedTemplate>>& imposter_pairs,
                                          const std::vector<double>& far_levels = default_far_levels()) {
    auto scores = [](const auto& pairs) {
        std::vector<double> s;
        s.reserve(pairs.size());
        for (const auto& [a, b] : pairs) {
            s.push_back(match_score(a, b));
        }
        return s;
    };
    return eval_verification(scores(genuine_pairs), scores(imposter_pairs), far_levels);
}

// Rank of the true identity = 1 + number of gallery rows ranked ahead of it
// (higher score, or equal score at a lower index).
inline EvalReport eval_search(const std::vector<std::pair<std::string, FixedTemplate>>& probes, const Gallery& gallery,
                              std::size_t max_rank = 0) {
    if (probes.empty()) {
        throw ValidationError("eval_search: no probes");
    }
    const std::size_t n = gallery.size();
    max_rank = max_rank == 0 ? n : std::min(max_rank, n);
    std::vector<std::size_t> rank_hist(n + 1, 0);
    for (const auto& [true_id, tpl] : probes) {
        auto idx = gallery.find(true_id);
        if (!idx) {
            throw ValidationError("eval_search: probe identity '" + true_id + "' is not enrolled");
        }
        if (tpl.dim() != gallery.dim()) {
            throw ValidationError("eval_search: probe dimension mismatch");
        }
        const float s_true = static_cast<float>(detail::dot_f64(gallery.row(*idx).data(), tpl.data(), tpl.dim()));
        std::size_t ahead = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const float s = static_cast<float>(detail::dot_f64(gallery.row(r).data(), tpl.data(), tpl.dim()));
            if (s > s_true || (s == s_true && r < *idx)) {
                ++ahead;
            }
        }
        ++rank_hist[ahead + 1];
    }
    EvalReport report;
    report.probe_count = probes.size();
    report.cmc.resize(max_rank);
    std::size_t cumulative = 0;
    for (std::size_t r = 1; r <= max_rank; ++r) {
        cumulative += rank_hist[r];
        report.cmc[r - 1] = static_cast<double>(cumulative) / static_cast<double>(probes.size());
    }
    return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["genuine_count"] = r.genuine_count;
    j["imposter_count"] = r.imposter_count;
    j["probe_count"] = r.probe_count;
    j["tar_at_far"] = nlohmann::json::array();
    for (const auto& p : r.tar_at_far) {
        j["tar_at_far"].push_back(
            {{"far", p.far}, {"threshold", p.threshold}, {"tar", p.tar}, {"measured_far", p.measured_far}});
    }
    j["cmc"] = r.cmc;
    return j;
}

inline nlohmann::json to_json(const BenchReport& r) {
    return {{"gallery_size", r.gallery_size},
            {"dim", r.dim},
            {"probes", r.probes},
            {"repetitions", r.repetitions},
            {"threads", r.threads},
            {"matches_per_sec_1t", r.matches_per_sec_1t},
            {"matches_per_sec_mt", r.matches_per_sec_mt},
            {"probe_latency_ms", r.probe_latency_ms}};
}

}  // namespace fpfixed
