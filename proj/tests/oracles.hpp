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

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fpfixed/fpfixed.hpp"

namespace fpfixed::oracle {

// Minimal circular distance, written from the two-branch case definition.
inline double oracle_dphi(double a, double b) {
    const double two_pi = 2.0 * std::numbers::pi;
    double ra = a - two_pi * std::floor(a / two_pi);
    double rb = b - two_pi * std::floor(b / two_pi);
    double d = std::fabs(ra - rb);
    return d > std::numbers::pi ? two_pi - d : d;
}

// Cell-by-cell evaluation of the map sum in 64-bit, every minutia at every cell.
inline std::vector<double> oracle_map(const MinutiaeTemplate& tpl, int h, int w, int c, double sigma_s, double sigma_o) {
    std::vector<double> out(static_cast<std::size_t>(h) * w * c, 0.0);
    std::vector<double> orient(tpl.minutiae.size() * c);
    for (std::size_t t = 0; t < tpl.minutiae.size(); ++t) {
        for (int k = 0; k < c; ++k) {
            const double d = oracle_dphi(tpl.minutiae[t].theta, 2.0 * k * std::numbers::pi / c);
            orient[t * c + k] = std::exp(-d / (2.0 * sigma_o * sigma_o));
        }
    }
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (std::size_t t = 0; t < tpl.minutiae.size(); ++t) {
                const auto& m = tpl.minutiae[t];
                const double mx = m.x * w / tpl.w_img, my = m.y * h / tpl.h_img;
                const double dist2 = (mx - (j + 0.5)) * (mx - (j + 0.5)) + (my - (i + 0.5)) * (my - (i + 0.5));
                const double cs = std::exp(-dist2 / (2.0 * sigma_s * sigma_s));
                for (int k = 0; k < c; ++k) {
                    out[(static_cast<std::size_t>(i) * w + j) * c + k] += cs * orient[t * c + k];
                }
            }
        }
    }
    return out;
}

inline MinutiaeTemplate random_template(Rng& rng, int max_n, int w_img = 448, int h_img = 448) {
    MinutiaeTemplate t;
    t.w_img = w_img;
    t.h_img = h_img;
    const auto n = rng.integer(0, max_n);
    for (std::int64_t i = 0; i < n; ++i) {
        t.minutiae.push_back(Minutia::make(rng.uniform(0.0, w_img), rng.uniform(0.0, h_img), rng.uniform(0.0, 6.283)));
    }
    return t;
}

inline FixedTemplate random_unit_template(Rng& rng, std::size_t dim) {
    std::vector<float> v(dim);
    double n2 = 0.0;
    for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        n2 += static_cast<double>(x) * x;
    }
    const double n = std::sqrt(n2);
    for (auto& x : v) x = static_cast<float>(x / n);
    return FixedTemplate::from_unit(std::move(v), dim / 2);
}

// Scores every gallery row with match_score and sorts by (score desc, index asc).
inline std::vector<std::pair<std::string, float>> oracle_search(const std::vector<std::pair<std::string, FixedTemplate>>& rows,
                                                                const FixedTemplate& q, std::size_t k) {
    std::vector<std::pair<std::size_t, float>> scored;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        scored.emplace_back(r, match_score(rows[r].second, q));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::pair<std::string, float>> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        out.emplace_back(rows[scored[i].first].first, scored[i].second);
    }
    return out;
}

// Central difference of f around x along one coordinate.
inline double central_difference(const std::function<double()>& f, double& x, double step) {
    const double saved = x;
    x = saved + step;
    const double up = f();
    x = saved - step;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * step);
}

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
// turning rounding noise into large ratios.
inline double relative_error(double a, double b, double floor = 1e-2) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

struct GradCheckReport {
    std::string block;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
};

// Compares analytic gradients of the joint loss against central differences
// in 64-bit for up to `per_block` entries of every parameter block.
inline std::vector<GradCheckReport> check_network_gradients(const net::NetConfig& cfg, net::NetParams<double>& params,
                                                            const net::TrainBatch<double>& batch, std::size_t per_block,
                                                            double step, std::uint64_t seed) {
    auto loss_at = [&]() {
        const auto out = net::forward(params, cfg, batch.images, false);
        return net::loss(out, batch, cfg, params).total;
    };
    const auto outputs = net::forward(params, cfg, batch.images, false);
    const auto grads = net::backward(params, cfg, batch, outputs);
    auto pb = params.blocks();
    auto gb = grads.blocks();
    Rng rng(seed);
    std::vector<GradCheckReport> reports;
    for (std::size_t b = 0; b < pb.size(); ++b) {
        GradCheckReport rep;
        rep.block = pb[b].name;
        auto& values = pb[b].tensor->values;
        std::vector<std::size_t> idx(values.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (idx.size() > per_block) {
            rng.shuffle(idx.begin(), idx.end());
            idx.resize(per_block);
        }
        for (std::size_t i : idx) {
            const double fd = central_difference(loss_at, values[i], step);
            rep.max_rel_error = std::max(rep.max_rel_error, relative_error(gb[b].tensor->values[i], fd));
            ++rep.checked;
        }
        reports.push_back(rep);
    }
    return reports;
}

}  // namespace fpfixed::oracle
