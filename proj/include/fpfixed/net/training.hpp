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

// Training loop for the joint objective, template extraction and
// teacher-student distillation of the fused embedding.

#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fpfixed/errors.hpp"
#include "fpfixed/fixed_template.hpp"
#include "fpfixed/image.hpp"
#include "fpfixed/minutiae_map.hpp"
#include "fpfixed/net/config.hpp"
#include "fpfixed/net/optimizer.hpp"
#include "fpfixed/net/toy_net.hpp"
#include "fpfixed/rng.hpp"
#include "fpfixed/spatial_transform.hpp"

namespace fpfixed::net {

struct LabeledImage {
    GrayImage image;
    MinutiaeTemplate minutiae;
    int label = 0;
};

inline MapConfig map_config_for(const NetConfig& net, const TrainConfig& train) {
    MapConfig m;
    m.h_map = net.map_h;
    m.w_map = net.map_w;
    m.c = net.map_c;
    m.sigma_s = train.map_sigma_s;
    m.sigma_o = train.map_sigma_o;
    return m;
}

// Brings an arbitrary-size image to the network input size (identity grid, bilinear).
inline GrayImage fit_to_input(const GrayImage& image, const NetConfig& cfg) {
    if (image.h == cfg.in_h && image.w == cfg.in_w) {
        return image;
    }
    return grid_sample(image, AffineMatrix::identity(), cfg.in_h, cfg.in_w, Padding::kClampToEdge);
}

struct Augmentation {
    double rotation = 0.0;  // radians
    double tx = 0.0;        // pixels
    double ty = 0.0;
    double zoom = 1.0;      // > 1 crops a smaller window and resizes it up
    double brightness = 0.0;
};

inline Augmentation draw_augmentation(Rng& rng, const TrainConfig& tc) {
    Augmentation a;
    const double max_rot = tc.aug_rotation_deg * std::numbers::pi / 180.0;
    a.rotation = rng.uniform(-max_rot, max_rot);
    a.tx = rng.uniform(-tc.aug_translation, tc.aug_translation);
    a.ty = rng.uniform(-tc.aug_translation, tc.aug_translation);
    a.zoom = 1.0 / rng.uniform(tc.aug_min_crop, 1.0);
    a.brightness = rng.uniform(-tc.aug_brightness, tc.aug_brightness);
    return a;
}

// Applies p' = c + zoom R(rotation)(p - c) + t to a normalized image (zero
// padding = neutral gray) and to its minutiae; points leaving the frame are dropped.
template <typename T>
std::pair<std::vector<T>, MinutiaeTemplate> augment(const std::vector<T>& image, const MinutiaeTemplate& minutiae,
                                                    const Augmentation& a, int h, int w) {
    const double cx = 0.5 * w, cy = 0.5 * h;
    const double c = std::cos(a.rotation), s = std::sin(a.rotation);
    std::vector<T> out(image.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double ux = (x - cx - a.tx) / a.zoom, uy = (y - cy - a.ty) / a.zoom;
            const double sx = cx + c * ux + s * uy;
            const double sy = cy - s * ux + c * uy;
            const double v = bilinear_at<T>(image, h, w, sx, sy, Padding::kZero) + a.brightness;
            out[static_cast<std::size_t>(y) * w + x] = static_cast<T>(std::clamp(v, -0.5, 0.5));
        }
    }
    MinutiaeTemplate moved;
    moved.w_img = minutiae.w_img;
    moved.h_img = minutiae.h_img;
    const double mx_scale = static_cast<double>(w) / minutiae.w_img;
    const double my_scale = static_cast<double>(h) / minutiae.h_img;
    for (const auto& m : minutiae.minutiae) {
        // Minutiae live in their own image frame; move them in network-input pixels.
        const double px = m.x * mx_scale - cx, py = m.y * my_scale - cy;
        const double nx = cx + a.zoom * (c * px - s * py) + a.tx;
        const double ny = cy + a.zoom * (s * px + c * py) + a.ty;
        const double ox = nx / mx_scale, oy = ny / my_scale;
        if (ox >= 0.0 && ox < minutiae.w_img && oy >= 0.0 && oy < minutiae.h_img) {
            moved.minutiae.push_back(Minutia::make(ox, oy, m.theta + a.rotation));
        }
    }
    return {std::move(out), std::move(moved)};
}

struct TrainResult {
    NetParams<float> params;
    std::vector<LossBreakdown> curve;  // one entry per epoch, sample-weighted batch means
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;

// Shuffled mini-batches, optional on-the-fly augmentation, RMSProp on the joint objective.
inline TrainResult train(const std::vector<LabeledImage>& data, const NetConfig& cfg, const TrainConfig& tc,
                         const EpochCallback& on_epoch = {}, const NetParams<float>* initial = nullptr) {
    cfg.validate();
    tc.validate();
    if (data.empty()) {
        throw ValidationError("train: empty dataset");
    }
    std::vector<int> seen(cfg.num_classes, 0);
    for (const auto& s : data) {
        if (s.label < 0 || s.label >= cfg.num_classes) {
            throw ValidationError("train: label " + std::to_string(s.label) + " outside [0, num_classes)");
        }
        seen[s.label] = 1;
    }
    if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
        throw ValidationError("train: need samples from at least 2 classes");
    }

    const MapConfig map_cfg = map_config_for(cfg, tc);
    std::vector<std::vector<float>> inputs;
    std::vector<std::vector<float>> maps;
    inputs.reserve(data.size());
    for (const auto& s : data) {
        inputs.push_back(normalize_input<float>(fit_to_input(s.image, cfg).pixels));
        if (!tc.augment) {
            maps.push_back(encode_map(s.minutiae, map_cfg).values);
        }
    }

    TrainResult result;
    result.params = initial ? *initial : init_params<float>(cfg);
    RmsProp<float> opt(cfg, tc.learning_rate, tc.rms_decay, tc.rms_epsilon);
    Rng order_rng(mix_seed(tc.seed, 1));
    Rng aug_rng(mix_seed(tc.seed, 2));
    Rng dropout_rng(mix_seed(tc.seed, 3));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = std::min<std::size_t>(tc.batch_size, data.size());

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        LossBreakdown epoch_loss;
        for (std::size_t start = 0, bi = 0; start < order.size(); start += bs, ++bi) {
            const std::size_t end = std::min(order.size(), start + bs);
            TrainBatch<float> batch;
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = order[i];
                batch.labels.push_back(data[idx].label);
                if (tc.augment) {
                    auto [img, mnt] = augment(inputs[idx], data[idx].minutiae, draw_augmentation(aug_rng, tc), cfg.in_h,
                                              cfg.in_w);
                    batch.images.push_back(std::move(img));
                    batch.gt_maps.push_back(encode_map(mnt, map_cfg).values);
                } else {
                    batch.images.push_back(inputs[idx]);
                    batch.gt_maps.push_back(maps[idx]);
                }
            }
            const auto outputs = forward(result.params, cfg, batch.images, true, &dropout_rng);
            const auto l = loss(outputs, batch, cfg, result.params);
            if (!std::isfinite(l.total)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << " batch " << bi << " (ce1=" << l.ce1 << " ce2=" << l.ce2
                    << " map=" << l.map << " decay=" << l.decay << "); lower the learning rate (" << tc.learning_rate
                    << ")";
                throw TrainingFault(msg.str());
            }
            const double share = static_cast<double>(end - start) / static_cast<double>(order.size());
            epoch_loss.total += share * l.total;
            epoch_loss.ce1 += share * l.ce1;
            epoch_loss.ce2 += share * l.ce2;
            epoch_loss.map += share * l.map;
            epoch_loss.decay += share * l.decay;
            const auto grads = backward(result.params, cfg, batch, outputs);
            opt.step(result.params, grads, cfg.loc_lr_scale);
        }
        result.curve.push_back(epoch_loss);
        if (on_epoch) {
            on_epoch(epoch, epoch_loss);
        }
    }
    return result;
}

// Inference-mode forward; the two branch vectors are fused into a unit template.
inline FixedTemplate embed_input(const NetParams<float>& params, const NetConfig& cfg, const std::vector<float>& input) {
    const auto f = forward_sample(params, cfg, input, false, nullptr);
    return fuse(BranchEmbedding{f.x1, BranchKind::kTexture}, BranchEmbedding{f.x2, BranchKind::kMinutiae});
}

inline FixedTemplate extract_embedding(const NetParams<float>& params, const NetConfig& cfg, const GrayImage& image) {
    return embed_input(params, cfg, normalize_input<float>(fit_to_input(image, cfg).pixels));
}

// 1/2 |teacher - student|^2
inline double distillation_loss(std::span<const float> teacher, std::span<const float> student) {
    if (teacher.size() != student.size()) {
        throw ValidationError("distillation_loss: dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        const double r = static_cast<double>(teacher[i]) - static_cast<double>(student[i]);
        s += r * r;
    }
    return 0.5 * s;
}

struct DistillResult {
    NetParams<float> params;
    std::vector<double> curve;  // mean per-image distillation loss per epoch
};

// The student regresses the teacher's fused unit embeddings (precomputed once);
// gradients flow back through the student's own normalization.
inline DistillResult distill(const NetParams<float>& teacher, const NetConfig& teacher_cfg, const NetConfig& student_cfg,
                             const std::vector<GrayImage>& images, const TrainConfig& tc,
                             const NetParams<float>* initial = nullptr,
                             const std::function<void(int, double)>& on_epoch = {}) {
    teacher_cfg.validate();
    student_cfg.validate();
    tc.validate();
    if (teacher_cfg.embed_dim != student_cfg.embed_dim) {
        throw ValidationError("distill: student embedding is " + std::to_string(2 * student_cfg.embed_dim) +
                              "-d, teacher's is " + std::to_string(2 * teacher_cfg.embed_dim) + "-d");
    }
    if (images.empty()) {
        throw ValidationError("distill: no training images");
    }
    if (tc.distill_copies > 0 && (teacher_cfg.in_h != student_cfg.in_h || teacher_cfg.in_w != student_cfg.in_w)) {
        throw ValidationError("distill: augmented copies need equal teacher and student input sizes");
    }
    std::vector<std::vector<float>> targets;
    std::vector<std::vector<float>> inputs;
    Rng aug_rng(mix_seed(tc.seed, 12));
    const MinutiaeTemplate no_minutiae;
    for (const auto& img : images) {
        const auto t = extract_embedding(teacher, teacher_cfg, img);
        targets.emplace_back(t.values().begin(), t.values().end());
        inputs.push_back(normalize_input<float>(fit_to_input(img, student_cfg).pixels));
        // Fixed augmented copies; their teacher targets are computed here, once.
        const auto base = inputs.back();
        for (int c = 0; c < tc.distill_copies; ++c) {
            auto copy = augment(base, no_minutiae, draw_augmentation(aug_rng, tc), student_cfg.in_h, student_cfg.in_w).first;
            const auto tt = embed_input(teacher, teacher_cfg, copy);
            targets.emplace_back(tt.values().begin(), tt.values().end());
            inputs.push_back(std::move(copy));
        }
    }

    DistillResult result;
    result.params = initial ? *initial : init_params<float>(student_cfg);
    RmsProp<float> opt(student_cfg, tc.learning_rate, tc.rms_decay, tc.rms_epsilon);
    Rng order_rng(mix_seed(tc.seed, 11));
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = std::min<std::size_t>(tc.batch_size, inputs.size());
    const int d = student_cfg.embed_dim;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            const double n = static_cast<double>(end - start);
            auto grads = NetParams<float>::zeros(student_cfg);
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = order[i];
                const auto f = forward_sample(result.params, student_cfg, inputs[idx], false, nullptr);
                std::vector<double> v(2 * d);
                for (int j = 0; j < d; ++j) {
                    v[j] = f.x1[j];
                    v[d + j] = f.x2[j];
                }
                const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
                if (norm == 0.0) {
                    throw TrainingFault("distill: student produced a zero embedding");
                }
                // Normalize exactly as extraction does so a student equal to the teacher has zero residual.
                const auto fused = fuse(BranchEmbedding{f.x1, BranchKind::kTexture}, BranchEmbedding{f.x2, BranchKind::kMinutiae});
                std::vector<double> xs(2 * d), gx(2 * d);
                double loss_i = 0.0, dot = 0.0;
                for (int j = 0; j < 2 * d; ++j) {
                    xs[j] = fused.values()[j];
                    const double r = xs[j] - targets[idx][j];
                    loss_i += 0.5 * r * r;
                    gx[j] = r / n;
                    dot += xs[j] * gx[j];
                }
                if (!std::isfinite(loss_i)) {
                    throw TrainingFault("distill: non-finite loss at epoch " + std::to_string(epoch));
                }
                epoch_loss += loss_i;
                // d(v / |v|) / dv = (I - x x^T) / |v|
                OutputGrads<float> og;
                og.d_x1.resize(d);
                og.d_x2.resize(d);
                for (int j = 0; j < d; ++j) {
                    og.d_x1[j] = static_cast<float>((gx[j] - xs[j] * dot) / norm);
                    og.d_x2[j] = static_cast<float>((gx[d + j] - xs[d + j] * dot) / norm);
                }
                backward_sample(result.params, student_cfg, f, og, grads);
            }
            add_weight_decay(result.params, student_cfg.weight_decay, grads);
            opt.step(result.params, grads, student_cfg.loc_lr_scale);
        }
        epoch_loss /= static_cast<double>(inputs.size());
        result.curve.push_back(epoch_loss);
        if (on_epoch) {
            on_epoch(epoch, epoch_loss);
        }
    }
    return result;
}

}  // namespace fpfixed::net
