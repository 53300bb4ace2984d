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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fpfixed/fpfixed.hpp"
#include "oracles.hpp"

using namespace fpfixed;
using namespace fpfixed::net;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- 1 -------------------------------------------------------------------
Outcome minutiae_map_oracle() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0, worst_linear = 0.0, worst_shift = 0.0;
    std::vector<MinutiaeTemplate> tpls;
    for (int t = 0; t < 100; ++t) {
        tpls.push_back(oracle::random_template(rng, 50));
        const auto m = encode_map(tpls.back());
        const auto o = oracle::oracle_map(tpls.back(), 128, 128, 6, 2.0, 2.0);
        for (std::size_t i = 0; i < o.size(); ++i) worst = std::max(worst, std::fabs(m.values[i] - o[i]));
    }
    for (int t = 0; t + 1 < 20; t += 2) {
        MinutiaeTemplate u = tpls[t];
        u.minutiae.insert(u.minutiae.end(), tpls[t + 1].minutiae.begin(), tpls[t + 1].minutiae.end());
        const auto a = encode_map(tpls[t]), b = encode_map(tpls[t + 1]), ab = encode_map(u);
        for (std::size_t i = 0; i < ab.size(); ++i) {
            worst_linear = std::max(worst_linear, std::fabs(static_cast<double>(ab.values[i]) - a.values[i] - b.values[i]));
        }
        MinutiaeTemplate r = tpls[t];
        for (auto& m : r.minutiae) m = Minutia::make(m.x, m.y, m.theta + kTwoPi / 6);
        const auto mr = encode_map(r);
        for (int i = 0; i < 128; ++i) {
            for (int j = 0; j < 128; ++j) {
                for (int k = 0; k < 6; ++k) {
                    worst_shift = std::max(worst_shift, std::fabs(static_cast<double>(mr.at(i, j, (k + 1) % 6)) - a.at(i, j, k)));
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst < 1e-6 && worst_linear < 1e-6 && worst_shift < 1e-6 && secs < 30.0;
    std::ostringstream d;
    d << "max|enc-oracle|=" << worst << " linearity=" << worst_linear << " channel-shift=" << worst_shift << " in "
      << fmt("%.1f", secs) << " s";
    return {ok, d.str()};
}

// ---- 2 -------------------------------------------------------------------
Outcome orientation_properties() {
    const auto t0 = Clock::now();
    const double pi = std::numbers::pi;
    std::vector<double> grid;
    for (int i = -628; i <= 628; ++i) grid.push_back(0.01 * i);
    std::size_t violations = 0, checks = 0;
    double lo = 10, hi = -10;
    for (double a : grid) {
        for (double b : grid) {
            const double d = orientation_diff(a, b);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            violations += d < 0.0 || d > pi;
            violations += d != orientation_diff(b, a);
            violations += std::fabs(d - orientation_diff(a + kTwoPi, b)) > 1e-12;
            violations += std::fabs(d - oracle::oracle_dphi(a, b)) > 1e-12;
            checks += 4;
        }
    }
    for (int i = 0; i < 628; i += 3) {
        for (int j = 0; j < 628; j += 5) {
            for (int k = 0; k < 628; k += 7) {
                const double a = 0.01 * i, b = 0.01 * j, c = 0.01 * k;
                violations += orientation_diff(a, c) > orientation_diff(a, b) + orientation_diff(b, c) + 1e-12;
                ++checks;
            }
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << checks << " checks, " << violations << " violations, observed range [" << lo << ", " << hi << "] in "
      << fmt("%.1f", secs) << " s";
    return {violations == 0 && lo == 0.0 && hi > pi - 0.01 && secs < 10.0, d.str()};
}

// ---- 3 -------------------------------------------------------------------
bool stencil_within_cells(const AlignmentParams& p, int h, int w, int oh, int ow, double step) {
    auto cells = [&](const AlignmentParams& q) {
        const auto a = build_affine(q, w, h);
        std::vector<double> out;
        for (int r = 0; r < oh; ++r) {
            for (int c = 0; c < ow; ++c) {
                const double xt = (2.0 * c + 1.0) / ow - 1.0, yt = (2.0 * r + 1.0) / oh - 1.0;
                out.push_back(std::ceil(0.5 * w * (a.a11 * xt + a.a12 * yt + a.a13 + 1.0) - 0.5));
                out.push_back(std::ceil(0.5 * h * (a.a21 * xt + a.a22 * yt + a.a23 + 1.0) - 0.5));
            }
        }
        return out;
    };
    const auto base = cells(p);
    for (int c = 0; c < 3; ++c) {
        for (double sgn : {-1.0, 1.0}) {
            auto q = p;
            (c == 0 ? q.tx : c == 1 ? q.ty : q.theta) += sgn * step;
            if (cells(q) != base) return false;
        }
    }
    return true;
}

Outcome sampler_gradient() {
    Rng rng(303);
    const int h = 16, w = 16, oh = 16, ow = 16;
    const double step = 1e-4;
    double worst = 0.0;
    int rejected = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> img(h * w), og(oh * ow);
        for (auto& v : img) v = rng.uniform();
        for (auto& v : og) v = rng.normal();
        AlignmentParams p;
        do {
            p = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-1, 1), rng.uniform(6, 14)};
        } while (!stencil_within_cells(p, h, w, oh, ow, step) && ++rejected);
        const auto g = grid_sample_backward<double, double>(img, h, w, build_affine(p, w, h), og, oh, ow);
        const double analytic[3] = {g.tx, g.ty, g.theta};
        for (int c = 0; c < 3; ++c) {
            double& field = c == 0 ? p.tx : c == 1 ? p.ty : p.theta;
            const double fd = oracle::central_difference(
                [&] {
                    const auto out = grid_sample<double>(img, h, w, build_affine(p, w, h), oh, ow);
                    double s = 0.0;
                    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * og[i];
                    return s;
                },
                field, step);
            worst = std::max(worst, oracle::relative_error(analytic[c], fd));
        }
    }
    // Identity exactness on a 448 x 448 image.
    GrayImage img(448, 448);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    const bool exact = grid_sample(img, AffineMatrix::identity(), 448, 448).pixels == img.pixels;
    std::ostringstream d;
    d << "max rel err " << worst << " over 20 instances (" << rejected
      << " draws resampled off cell boundaries), identity bit-exact=" << (exact ? "yes" : "no");
    return {worst < 1e-4 && exact, d.str()};
}

// ---- 4 -------------------------------------------------------------------
Outcome network_gradient() {
    const auto t0 = Clock::now();
    NetConfig c;
    c.in_h = c.in_w = 16;
    c.stem_channels = {3, 4};
    c.branch_channels = 3;
    c.embed_dim = 4;
    c.num_classes = 3;
    c.map_h = c.map_w = 4;
    c.map_c = 2;
    c.use_localizer = true;
    c.dropout_keep = 1.0;
    auto p = init_params<double>(c);
    Rng rng(404);
    for (auto& b : p.blocks()) {
        for (auto& v : b.tensor->values) v += 0.05 * rng.normal();
    }
    TrainBatch<double> batch;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> img(256);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) img[y * 16 + x] = 0.4 * std::sin(0.7 * x + 0.3 * y + i) + 0.1 * rng.normal();
        }
        batch.images.push_back(img);
        batch.labels.push_back(static_cast<int>(rng.integer(0, 2)));
        std::vector<double> m(c.map_size());
        for (auto& v : m) v = rng.uniform();
        batch.gt_maps.push_back(m);
    }
    const auto reports = oracle::check_network_gradients(c, p, batch, 1000000, 1e-6, 405);
    double worst = 0.0;
    std::size_t entries = 0;
    std::string worst_block;
    for (const auto& r : reports) {
        entries += r.checked;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_block = r.block;
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << reports.size() << " blocks, " << entries << " entries, max rel err " << worst << " (" << worst_block << ") in "
      << fmt("%.1f", secs) << " s";
    return {worst < 1e-4 && secs < 300.0, d.str()};
}

// ---- 5 -------------------------------------------------------------------
Outcome closed_form_losses() {
    double worst_ce = 0.0;
    for (int c : {2, 3, 10, 20, 100}) {
        std::vector<double> logits(c, -1.25);
        for (int k = 0; k < c; ++k) worst_ce = std::max(worst_ce, std::fabs(cross_entropy(logits, k) - std::log(c)));
    }
    NetConfig n;
    n.num_classes = 4;
    const auto p = init_params<double>(n);
    TrainBatch<double> b;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> img(n.in_h * n.in_w);
        for (std::size_t j = 0; j < img.size(); ++j) img[j] = std::sin(0.01 * j * (i + 1));
        b.images.push_back(img);
        b.labels.push_back(i);
    }
    const auto out = forward(p, n, b.images, false);
    for (const auto& o : out) b.gt_maps.push_back(o.map_pred);
    const double map_term = loss(out, b, n, p).map;
    std::vector<float> u(512, 0.0F), v(512, 0.0F);
    u[0] = 1.0F;
    v[0] = -1.0F;
    const double opp = distillation_loss(u, v);
    std::ostringstream d;
    d << "max|CE-ln c|=" << worst_ce << ", perfect-map term=" << map_term << ", opposite-unit distillation=" << opp;
    return {worst_ce <= 1e-6 && map_term == 0.0 && std::fabs(opp - 2.0) <= 1e-6, d.str()};
}

// ---- 6 and 7 -------------------------------------------------------------
struct LearningState {
    Dataset ds;
    NetConfig cfg;
    NetParams<float> teacher;
    double teacher_rank1 = 0.0;
};

double held_out_rank1(const NetParams<float>& p, const NetConfig& cfg, const Dataset& ds) {
    std::vector<std::pair<std::string, FixedTemplate>> gallery, probes;
    for (const auto& imp : ds.train) {
        if (imp.impression_index == 0) {
            gallery.emplace_back(std::to_string(imp.label), extract_embedding(p, cfg, imp.image));
        }
    }
    for (const auto& imp : ds.eval) probes.emplace_back(std::to_string(imp.label), extract_embedding(p, cfg, imp.image));
    return eval_search(probes, build_gallery(gallery)).rank(1);
}

Outcome desk_scale_learning(LearningState& st) {
    const auto t0 = Clock::now();
    st.ds = make_dataset(20, 8, 2026);
    st.cfg = NetConfig{};
    st.cfg.num_classes = 20;
    TrainConfig tc;  // 50 epochs, batch 30, RMSProp lr 1e-3
    std::vector<LabeledImage> data;
    for (const auto& imp : st.ds.train) data.push_back({imp.image, imp.minutiae, imp.label});
    const auto r = train(data, st.cfg, tc);
    st.teacher = r.params;
    st.teacher_rank1 = held_out_rank1(st.teacher, st.cfg, st.ds);
    const double drop = 1.0 - r.curve.back().total / r.curve.front().total;
    std::ostringstream d;
    d << "joint loss " << fmt("%.2f", r.curve.front().total) << " -> " << fmt("%.2f", r.curve.back().total)
      << " over " << r.curve.size() << " epochs (" << fmt("%.1f", 100 * drop) << "% drop), held-out rank-1 "
      << fmt("%.1f", 100 * st.teacher_rank1) << "% (chance 5%) in " << fmt("%.0f", seconds_since(t0)) << " s";
    return {r.curve.size() == 50 && drop >= 0.5 && st.teacher_rank1 >= 0.5, d.str()};
}

Outcome distillation(const LearningState& st) {
    const auto t0 = Clock::now();
    NetConfig s = st.cfg;
    s.stem_channels = {4, 8};
    s.branch_channels = 8;
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 10;
    tc.distill_copies = 4;
    std::vector<GrayImage> images;
    for (const auto& imp : st.ds.train) images.push_back(imp.image);
    const auto r = distill(st.teacher, st.cfg, s, images, tc);
    double cos_sum = 0.0;
    for (const auto& img : images) {
        cos_sum += match_score(extract_embedding(st.teacher, st.cfg, img), extract_embedding(r.params, s, img));
    }
    const double mean_cos = cos_sum / static_cast<double>(images.size());
    const double student_rank1 = held_out_rank1(r.params, s, st.ds);
    const auto count = [](const NetParams<float>& p) {
        std::size_t n = 0;
        for (const auto& b : p.blocks()) n += b.tensor->size();
        return n;
    };
    std::ostringstream d;
    d << "student " << count(r.params) << " vs teacher " << count(st.teacher) << " params, mean cosine "
      << fmt("%.4f", mean_cos) << ", rank-1 teacher " << fmt("%.1f", 100 * st.teacher_rank1) << "% student "
      << fmt("%.1f", 100 * student_rank1) << "% in " << fmt("%.0f", seconds_since(t0)) << " s";
    return {mean_cos >= 0.99 && std::fabs(student_rank1 - st.teacher_rank1) <= 0.10 + 1e-12, d.str()};
}

// ---- 8 -------------------------------------------------------------------
Outcome template_format() {
    Rng rng(808);
    bool ok = true;
    std::size_t size = 0;
    for (int t = 0; t < 50; ++t) {
        const auto tpl = oracle::random_unit_template(rng, 512);
        const auto bytes = serialize(tpl);
        size = bytes.size();
        ok = ok && bytes.size() == 2064 && bytes.size() - kTemplateHeaderSize == 2048;
        const auto back = deserialize(bytes);
        ok = ok && back == tpl && serialize(back) == bytes;
    }
    const auto good = serialize(oracle::random_unit_template(rng, 512));
    int rejected = 0, attempts = 0;
    auto expect_reject = [&](std::vector<std::uint8_t> b) {
        ++attempts;
        try {
            deserialize(b);
        } catch (const FormatError&) {
            ++rejected;
        }
    };
    for (std::size_t i = 0; i < 4; ++i) {
        auto b = good;
        b[i] ^= 0x20;
        expect_reject(b);
    }
    auto b = good;
    b[4] = 9;
    expect_reject(b);
    b = good;
    b[6] = 0;
    b[7] = 0;
    expect_reject(b);
    b = good;
    b[7] = 4;
    expect_reject(b);
    expect_reject(std::vector<std::uint8_t>(good.begin(), good.begin() + 10));
    expect_reject(std::vector<std::uint8_t>(good.begin(), good.end() - 1));
    std::ostringstream d;
    d << "file " << size << " B = 16 B header + " << size - 16 << " B payload, 50 bit-exact round trips, " << rejected
      << "/" << attempts << " corruptions rejected";
    return {ok && rejected == attempts, d.str()};
}

// ---- 9 -------------------------------------------------------------------
Outcome search_exactness() {
    Rng rng(909);
    std::vector<std::pair<std::string, FixedTemplate>> rows;
    for (int i = 0; i < 10000; ++i) rows.emplace_back("g" + std::to_string(i), oracle::random_unit_template(rng, 512));
    for (int i = 0; i < 50; ++i) rows[9900 + i].second = rows[i * 13].second;  // exact ties
    const auto g = build_gallery(rows);
    int mismatches = 0;
    for (int p = 0; p < 100; ++p) {
        const auto q = p % 5 == 0 ? rows[(p / 5) * 13].second : oracle::random_unit_template(rng, 512);
        const auto want = oracle::oracle_search(rows, q, 10);
        const auto got = search(g, q, 10, 4);
        bool same = got.hits.size() == want.size();
        for (std::size_t i = 0; same && i < want.size(); ++i) {
            same = got.hits[i].id == want[i].first && got.hits[i].score == want[i].second;
        }
        mismatches += !same;
    }
    std::ostringstream d;
    d << "100 probes x 10,000 templates (50 duplicated rows), top-10 mismatches vs naive oracle: " << mismatches;
    return {mismatches == 0, d.str()};
}

// ---- 10 ------------------------------------------------------------------
Outcome throughput() {
    Rng rng(1010);
    auto make = [&](std::size_t n) {
        std::vector<std::pair<std::string, FixedTemplate>> rows;
        for (std::size_t i = 0; i < n; ++i) rows.emplace_back("b" + std::to_string(i), oracle::random_unit_template(rng, 512));
        return build_gallery(rows);
    };
    const auto g1 = make(20000);
    const auto g2 = make(40000);
    std::vector<FixedTemplate> probes;
    for (int i = 0; i < 50; ++i) probes.push_back(oracle::random_unit_template(rng, 512));
    benchmark(g1, probes, 1, 1);  // warm-up
    const auto r1 = benchmark(g1, probes, 3, 0);
    const auto r2 = benchmark(g2, probes, 3, 0);
    const double t1 = 1.0 / r1.matches_per_sec_1t * g1.size();
    const double t2 = 1.0 / r2.matches_per_sec_1t * g2.size();
    const double ratio = t2 / t1;
    std::ostringstream d;
    d << fmt("%.0f", r1.matches_per_sec_1t) << " matches/s single-thread at dim 512 (N=20000), time ratio 2N/N = "
      << fmt("%.2f", ratio) << ", multi-thread " << fmt("%.0f", r1.matches_per_sec_mt) << " matches/s on "
      << r1.threads << " threads, median probe latency " << fmt("%.2f", r1.probe_latency_ms) << " ms";
    return {r1.matches_per_sec_1t >= 100000.0 && ratio >= 1.4 && ratio <= 2.6, d.str()};
}

// ---- 11 ------------------------------------------------------------------
Outcome evaluation_harness() {
    bool ok = true;
    const auto r = eval_verification({0.9, 0.8, 0.2}, {0.7, 0.3, 0.1}, {1.0 / 3.0, 2.0 / 3.0, 1.0});
    ok = ok && r.tar_at_far[0].threshold == 0.7 && r.tar_at_far[0].tar == 2.0 / 3.0;
    ok = ok && r.tar_at_far[1].threshold == 0.2 && r.tar_at_far[1].tar == 1.0;
    ok = ok && r.tar_at_far[2].threshold == 0.1 && r.tar_at_far[2].tar == 1.0;
    auto unit2 = [](double deg) {
        const double a = deg * std::numbers::pi / 180.0;
        return FixedTemplate::from_unit({static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))}, 1);
    };
    const auto g = build_gallery({{"A", unit2(0)}, {"B", unit2(60)}, {"C", unit2(120)}});
    const auto c = eval_search({{"A", unit2(5)}, {"A", unit2(100)}, {"A", unit2(45)}}, g);
    ok = ok && c.rank(1) == 1.0 / 3.0 && c.rank(2) == 2.0 / 3.0 && c.rank(3) == 1.0;
    bool refused = false;
    try {
        eval_verification({0.9, 0.8, 0.2}, {0.7, 0.3, 0.1}, {0.1});
    } catch (const UnsupportedFarLevelError& e) {
        refused = std::string(e.what()).find("insufficient number of imposters") != std::string::npos;
    }
    std::ostringstream d;
    d << "TAR@FAR {1/3, 2/3, 1} = {" << r.tar_at_far[0].tar << ", " << r.tar_at_far[1].tar << ", "
      << r.tar_at_far[2].tar << "}, CMC = {" << c.rank(1) << ", " << c.rank(2) << ", " << c.rank(3)
      << "}, FAR 0.1 with 3 imposters refused=" << (refused ? "yes" : "no");
    return {ok && refused, d.str()};
}

}  // namespace

int main() {
    LearningState learning;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"minutiae-map oracle equivalence", minutiae_map_oracle},
        {"orientation distance properties", orientation_properties},
        {"sampler gradient check", sampler_gradient},
        {"network gradient check", network_gradient},
        {"closed-form loss values", closed_form_losses},
        {"desk-scale learning", [&] { return desk_scale_learning(learning); }},
        {"distillation", [&] { return distillation(learning); }},
        {"template format", template_format},
        {"search exactness", search_exactness},
        {"throughput", throughput},
        {"evaluation harness", evaluation_harness},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
