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

// Two-branch embedding network at desk scale.
//
//   input -> [localizer + grid sampler] -> stem: (conv3x3 -> ReLU -> maxpool2) per stage
//   texture branch:  conv3x3 -> ReLU -> global average pool -> dense -> x1
//   minutiae branch: conv3x3 -> ReLU -> avgpool2 -> dense -> x2
//                                                \-> dense -> minutiae map
//   logits_i = W_i x_i + b_i, with dropout on x_i during training.
//
// Scalar type T selects float (training, inference) or double (gradient checks).

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fpfixed/errors.hpp"
#include "fpfixed/net/config.hpp"
#include "fpfixed/net/layers.hpp"
#include "fpfixed/rng.hpp"
#include "fpfixed/spatial_transform.hpp"

namespace fpfixed::net {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s)
        : shape(std::move(s)),
          values(static_cast<std::size_t>(std::accumulate(shape.begin(), shape.end(), 1LL, std::multiplies<>())), T(0)) {}

    std::size_t size() const { return values.size(); }
    T* data() { return values.data(); }
    const T* data() const { return values.data(); }
    bool operator==(const Tensor&) const = default;
};

template <typename T>
struct NetParams {
    std::vector<Tensor<T>> stem_w, stem_b;
    Tensor<T> tex_conv_w, tex_conv_b, tex_fc_w, tex_fc_b;
    Tensor<T> min_conv_w, min_conv_b, min_fc_w, min_fc_b;
    Tensor<T> map_w, map_b;
    Tensor<T> cls1_w, cls1_b, cls2_w, cls2_b;
    Tensor<T> loc_w, loc_b;  // empty without a localizer

    // All-zero parameters shaped for `cfg`.
    static NetParams zeros(const NetConfig& cfg) {
        cfg.validate();
        NetParams p;
        int cin = 1;
        for (int c : cfg.stem_channels) {
            p.stem_w.emplace_back(std::vector<int>{c, cin, 3, 3});
            p.stem_b.emplace_back(std::vector<int>{c});
            cin = c;
        }
        const int bc = cfg.branch_channels, d = cfg.embed_dim;
        p.tex_conv_w = Tensor<T>({bc, cin, 3, 3});
        p.tex_conv_b = Tensor<T>({bc});
        p.tex_fc_w = Tensor<T>({d, bc});
        p.tex_fc_b = Tensor<T>({d});
        p.min_conv_w = Tensor<T>({bc, cin, 3, 3});
        p.min_conv_b = Tensor<T>({bc});
        p.min_fc_w = Tensor<T>({d, cfg.pooled_features()});
        p.min_fc_b = Tensor<T>({d});
        p.map_w = Tensor<T>({cfg.map_size(), cfg.pooled_features()});
        p.map_b = Tensor<T>({cfg.map_size()});
        p.cls1_w = Tensor<T>({cfg.num_classes, d});
        p.cls1_b = Tensor<T>({cfg.num_classes});
        p.cls2_w = Tensor<T>({cfg.num_classes, d});
        p.cls2_b = Tensor<T>({cfg.num_classes});
        if (cfg.use_localizer) {
            p.loc_w = Tensor<T>({3, cfg.loc_features()});
            p.loc_b = Tensor<T>({3});
        }
        return p;
    }

    struct Block {
        std::string name;
        Tensor<T>* tensor;
        bool localizer;
    };
    struct ConstBlock {
        std::string name;
        const Tensor<T>* tensor;
        bool localizer;
    };

    // Every parameter block in a fixed order.
    std::vector<Block> blocks() { return collect<Block>(*this); }
    std::vector<ConstBlock> blocks() const { return collect<ConstBlock>(*this); }

    template <typename U>
    NetParams<U> cast() const {
        auto conv = [](const Tensor<T>& t) {
            Tensor<U> u;
            u.shape = t.shape;
            u.values.assign(t.values.begin(), t.values.end());
            return u;
        };
        NetParams<U> out;
        for (const auto& t : stem_w) out.stem_w.push_back(conv(t));
        for (const auto& t : stem_b) out.stem_b.push_back(conv(t));
        out.tex_conv_w = conv(tex_conv_w);
        out.tex_conv_b = conv(tex_conv_b);
        out.tex_fc_w = conv(tex_fc_w);
        out.tex_fc_b = conv(tex_fc_b);
        out.min_conv_w = conv(min_conv_w);
        out.min_conv_b = conv(min_conv_b);
        out.min_fc_w = conv(min_fc_w);
        out.min_fc_b = conv(min_fc_b);
        out.map_w = conv(map_w);
        out.map_b = conv(map_b);
        out.cls1_w = conv(cls1_w);
        out.cls1_b = conv(cls1_b);
        out.cls2_w = conv(cls2_w);
        out.cls2_b = conv(cls2_b);
        out.loc_w = conv(loc_w);
        out.loc_b = conv(loc_b);
        return out;
    }

    bool operator==(const NetParams&) const = default;

 private:
    template <typename B, typename Self>
    static std::vector<B> collect(Self& self) {
        std::vector<B> out;
        for (std::size_t s = 0; s < self.stem_w.size(); ++s) {
            out.push_back({"stem" + std::to_string(s) + ".w", &self.stem_w[s], false});
            out.push_back({"stem" + std::to_string(s) + ".b", &self.stem_b[s], false});
        }
        out.push_back({"texture.conv.w", &self.tex_conv_w, false});
        out.push_back({"texture.conv.b", &self.tex_conv_b, false});
        out.push_back({"texture.fc.w", &self.tex_fc_w, false});
        out.push_back({"texture.fc.b", &self.tex_fc_b, false});
        out.push_back({"minutiae.conv.w", &self.min_conv_w, false});
        out.push_back({"minutiae.conv.b", &self.min_conv_b, false});
        out.push_back({"minutiae.fc.w", &self.min_fc_w, false});
        out.push_back({"minutiae.fc.b", &self.min_fc_b, false});
        out.push_back({"minutiae.map.w", &self.map_w, false});
        out.push_back({"minutiae.map.b", &self.map_b, false});
        out.push_back({"classifier1.w", &self.cls1_w, false});
        out.push_back({"classifier1.b", &self.cls1_b, false});
        out.push_back({"classifier2.w", &self.cls2_w, false});
        out.push_back({"classifier2.b", &self.cls2_b, false});
        if (!self.loc_w.values.empty()) {
            out.push_back({"localizer.w", &self.loc_w, true});
            out.push_back({"localizer.b", &self.loc_b, true});
        }
        return out;
    }
};

// He-normal convolutions, 1/sqrt(fan_in) dense layers, zero biases. The
// localizer starts at zero so training begins from the centered fixed window.
template <typename T>
NetParams<T> init_params(const NetConfig& cfg) {
    auto p = NetParams<T>::zeros(cfg);
    Rng rng(cfg.seed);
    auto fill = [&](Tensor<T>& t, double stddev) {
        for (auto& v : t.values) {
            v = static_cast<T>(rng.normal(0.0, stddev));
        }
    };
    int cin = 1;
    for (std::size_t s = 0; s < p.stem_w.size(); ++s) {
        fill(p.stem_w[s], std::sqrt(2.0 / (cin * 9)));
        cin = cfg.stem_channels[s];
    }
    fill(p.tex_conv_w, std::sqrt(2.0 / (cin * 9)));
    fill(p.min_conv_w, std::sqrt(2.0 / (cin * 9)));
    fill(p.tex_fc_w, std::sqrt(1.0 / cfg.branch_channels));
    fill(p.min_fc_w, std::sqrt(1.0 / cfg.pooled_features()));
    fill(p.map_w, 0.1 * std::sqrt(1.0 / cfg.pooled_features()));
    fill(p.cls1_w, std::sqrt(1.0 / cfg.embed_dim));
    fill(p.cls2_w, std::sqrt(1.0 / cfg.embed_dim));
    return p;
}

// Maps [0, 1] pixels to the zero-centered range the network consumes.
template <typename T>
std::vector<T> normalize_input(std::span<const float> pixels) {
    std::vector<T> out(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        out[i] = static_cast<T>(pixels[i]) - T(0.5);
    }
    return out;
}

template <typename T>
struct TrainBatch {
    std::vector<std::vector<T>> images;   // normalized, in_h x in_w each
    std::vector<int> labels;
    std::vector<std::vector<T>> gt_maps;  // map_h x map_w x map_c each, channel-last

    std::size_t size() const { return images.size(); }
};

// Outputs of one sample plus everything the backward pass replays.
template <typename T>
struct SampleForward {
    std::vector<T> x1, x2, logits1, logits2, map_pred;

    std::vector<T> raw;
    std::vector<T> loc_features;
    std::array<T, 3> loc_z{};
    AffineMatrix affine;
    std::vector<T> input;
    std::vector<std::vector<T>> stem_act;
    std::vector<std::vector<int>> stem_argmax;
    std::vector<std::vector<T>> stem_pool;
    std::vector<T> tex_act, tex_gap;
    std::vector<T> min_act, min_pool;
    std::vector<T> mask1, mask2;  // empty when dropout is off
    std::vector<T> x1_drop, x2_drop;

    const std::vector<T>& features() const { return stem_pool.empty() ? input : stem_pool.back(); }
};

template <typename T>
AlignmentParams localizer_params(const NetConfig& cfg, const std::array<T, 3>& z) {
    const AlignmentBounds bounds{cfg.loc_max_translation(), cfg.loc_max_rotation(), cfg.loc_window()};
    return clamp_params(bounds.max_translation * std::tanh(static_cast<double>(z[0])),
                        bounds.max_translation * std::tanh(static_cast<double>(z[1])),
                        bounds.max_rotation * std::tanh(static_cast<double>(z[2])), bounds);
}

template <typename T>
SampleForward<T> forward_sample(const NetParams<T>& p, const NetConfig& cfg, const std::vector<T>& image,
                                bool train_mode, Rng* dropout_rng) {
    namespace L = layers;
    if (image.size() != static_cast<std::size_t>(cfg.in_h) * cfg.in_w) {
        throw ValidationError("forward: image has " + std::to_string(image.size()) + " pixels, expected " +
                              std::to_string(cfg.in_h * cfg.in_w));
    }
    SampleForward<T> f;
    f.raw = image;
    if (cfg.use_localizer) {
        f.loc_features.resize(static_cast<std::size_t>(cfg.loc_features()));
        L::avgpool_forward(image.data(), 1, cfg.in_h, cfg.in_w, cfg.loc_pool, f.loc_features.data());
        L::dense_forward(f.loc_features.data(), cfg.loc_features(), p.loc_w.data(), p.loc_b.data(), 3, f.loc_z.data());
        f.affine = build_affine(localizer_params(cfg, f.loc_z), cfg.in_w, cfg.in_h);
        f.input = grid_sample<T>(image, cfg.in_h, cfg.in_w, f.affine, cfg.in_h, cfg.in_w, Padding::kZero);
    } else {
        f.input = image;
    }

    const std::vector<T>* cur = &f.input;
    int c = 1, h = cfg.in_h, w = cfg.in_w;
    for (std::size_t s = 0; s < cfg.stem_channels.size(); ++s) {
        const int co = cfg.stem_channels[s];
        auto& act = f.stem_act.emplace_back(static_cast<std::size_t>(co) * h * w);
        L::conv3x3_forward(cur->data(), c, h, w, p.stem_w[s].data(), p.stem_b[s].data(), co, act.data());
        L::relu_forward(act.data(), act.size());
        auto& pooled = f.stem_pool.emplace_back(static_cast<std::size_t>(co) * (h / 2) * (w / 2));
        auto& arg = f.stem_argmax.emplace_back(pooled.size());
        L::maxpool2_forward(act.data(), co, h, w, pooled.data(), arg.data());
        cur = &pooled;
        c = co;
        h /= 2;
        w /= 2;
    }

    const int bc = cfg.branch_channels, d = cfg.embed_dim;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    f.tex_act.resize(bc * plane);
    L::conv3x3_forward(cur->data(), c, h, w, p.tex_conv_w.data(), p.tex_conv_b.data(), bc, f.tex_act.data());
    L::relu_forward(f.tex_act.data(), f.tex_act.size());
    f.tex_gap.resize(bc);
    L::gap_forward(f.tex_act.data(), bc, plane, f.tex_gap.data());
    f.x1.resize(d);
    L::dense_forward(f.tex_gap.data(), bc, p.tex_fc_w.data(), p.tex_fc_b.data(), d, f.x1.data());

    f.min_act.resize(bc * plane);
    L::conv3x3_forward(cur->data(), c, h, w, p.min_conv_w.data(), p.min_conv_b.data(), bc, f.min_act.data());
    L::relu_forward(f.min_act.data(), f.min_act.size());
    const int pooled = cfg.pooled_features();
    f.min_pool.resize(pooled);
    L::avgpool_forward(f.min_act.data(), bc, h, w, 2, f.min_pool.data());
    f.x2.resize(d);
    L::dense_forward(f.min_pool.data(), pooled, p.min_fc_w.data(), p.min_fc_b.data(), d, f.x2.data());
    f.map_pred.resize(cfg.map_size());
    L::dense_forward(f.min_pool.data(), pooled, p.map_w.data(), p.map_b.data(), cfg.map_size(), f.map_pred.data());

    f.x1_drop = f.x1;
    f.x2_drop = f.x2;
    if (train_mode && cfg.dropout_keep < 1.0) {
        if (dropout_rng == nullptr) {
            throw ValidationError("forward: dropout in training mode needs a random stream");
        }
        const T keep_scale = static_cast<T>(1.0 / cfg.dropout_keep);
        auto draw = [&](std::vector<T>& mask, std::vector<T>& x) {
            mask.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                mask[i] = dropout_rng->uniform() < cfg.dropout_keep ? keep_scale : T(0);
                x[i] *= mask[i];
            }
        };
        draw(f.mask1, f.x1_drop);
        draw(f.mask2, f.x2_drop);
    }
    f.logits1.resize(cfg.num_classes);
    f.logits2.resize(cfg.num_classes);
    L::dense_forward(f.x1_drop.data(), d, p.cls1_w.data(), p.cls1_b.data(), cfg.num_classes, f.logits1.data());
    L::dense_forward(f.x2_drop.data(), d, p.cls2_w.data(), p.cls2_b.data(), cfg.num_classes, f.logits2.data());
    return f;
}

template <typename T>
std::vector<SampleForward<T>> forward(const NetParams<T>& p, const NetConfig& cfg, const std::vector<std::vector<T>>& images,
                                      bool train_mode, Rng* dropout_rng = nullptr) {
    std::vector<SampleForward<T>> out;
    out.reserve(images.size());
    for (const auto& img : images) {
        out.push_back(forward_sample(p, cfg, img, train_mode, dropout_rng));
    }
    return out;
}

// Softmax probabilities, computed stably in double.
template <typename T>
std::vector<double> softmax(const std::vector<T>& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : logits) mx = std::max(mx, static_cast<double>(v));
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

// -log softmax(logits)[label].
template <typename T>
double cross_entropy(const std::vector<T>& logits, int label) {
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : logits) mx = std::max(mx, static_cast<double>(v));
    double s = 0.0;
    for (T v : logits) s += std::exp(static_cast<double>(v) - mx);
    return mx + std::log(s) - static_cast<double>(logits[static_cast<std::size_t>(label)]);
}

// Sum of squared residuals over every map cell.
template <typename T>
double map_squared_error(const std::vector<T>& pred, const std::vector<T>& gt) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
        s += r * r;
    }
    return s;
}

template <typename T>
double squared_norm(const NetParams<T>& p) {
    double s = 0.0;
    for (const auto& b : p.blocks()) {
        for (T v : b.tensor->values) s += static_cast<double>(v) * static_cast<double>(v);
    }
    return s;
}

struct LossBreakdown {
    double total = 0.0;
    double ce1 = 0.0;    // batch means, unweighted
    double ce2 = 0.0;
    double map = 0.0;
    double decay = 0.0;  // weight_decay * |params|^2 / 2
};

// Joint objective: mean over the batch of w1 CE1 + w2 CE2 + wm map SSE, plus weight decay.
template <typename T>
LossBreakdown loss(const std::vector<SampleForward<T>>& outputs, const TrainBatch<T>& batch, const NetConfig& cfg,
                   const NetParams<T>& params) {
    if (outputs.size() != batch.size() || batch.labels.size() != batch.size() || batch.gt_maps.size() != batch.size()) {
        throw ValidationError("loss: batch and outputs disagree in size");
    }
    LossBreakdown l;
    const double n = static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const int label = batch.labels[b];
        if (label < 0 || label >= cfg.num_classes) {
            throw ValidationError("loss: label out of range");
        }
        if (batch.gt_maps[b].size() != static_cast<std::size_t>(cfg.map_size())) {
            throw ValidationError("loss: ground-truth map has the wrong size");
        }
        l.ce1 += cross_entropy(outputs[b].logits1, label) / n;
        l.ce2 += cross_entropy(outputs[b].logits2, label) / n;
        l.map += map_squared_error(outputs[b].map_pred, batch.gt_maps[b]) / n;
    }
    l.decay = 0.5 * cfg.weight_decay * squared_norm(params);
    l.total = cfg.ce1_weight * l.ce1 + cfg.ce2_weight * l.ce2 + cfg.map_weight * l.map + l.decay;
    return l;
}

// Upstream gradients for one sample; empty vectors mean zero.
template <typename T>
struct OutputGrads {
    std::vector<T> d_logits1, d_logits2, d_map, d_x1, d_x2;
};

// Accumulates parameter gradients for one sample into `g`.
template <typename T>
void backward_sample(const NetParams<T>& p, const NetConfig& cfg, const SampleForward<T>& f, const OutputGrads<T>& og,
                     NetParams<T>& g) {
    namespace L = layers;
    const int d = cfg.embed_dim, bc = cfg.branch_channels, nc = cfg.num_classes;
    const int fh = cfg.stem_out_h(), fw = cfg.stem_out_w(), fc = cfg.stem_out_c();
    const std::size_t plane = static_cast<std::size_t>(fh) * fw;

    std::vector<T> d_x1(d, T(0)), d_x2(d, T(0));
    auto through_head = [&](const std::vector<T>& d_logits, const std::vector<T>& x_drop, const std::vector<T>& mask,
                            const Tensor<T>& w, Tensor<T>& gw, Tensor<T>& gb, const std::vector<T>& extra,
                            std::vector<T>& d_x) {
        if (!d_logits.empty()) {
            std::vector<T> d_drop(d, T(0));
            L::dense_backward(x_drop.data(), d, w.data(), nc, d_logits.data(), d_drop.data(), gw.data(), gb.data());
            for (int i = 0; i < d; ++i) {
                d_x[i] += mask.empty() ? d_drop[i] : d_drop[i] * mask[i];
            }
        }
        if (!extra.empty()) {
            for (int i = 0; i < d; ++i) d_x[i] += extra[i];
        }
    };
    through_head(og.d_logits1, f.x1_drop, f.mask1, p.cls1_w, g.cls1_w, g.cls1_b, og.d_x1, d_x1);
    through_head(og.d_logits2, f.x2_drop, f.mask2, p.cls2_w, g.cls2_w, g.cls2_b, og.d_x2, d_x2);

    std::vector<T> d_feat(static_cast<std::size_t>(fc) * plane, T(0));

    // Texture branch.
    {
        std::vector<T> d_gap(bc, T(0));
        L::dense_backward(f.tex_gap.data(), bc, p.tex_fc_w.data(), d, d_x1.data(), d_gap.data(), g.tex_fc_w.data(),
                          g.tex_fc_b.data());
        std::vector<T> d_act(bc * plane, T(0));
        L::gap_backward(d_gap.data(), bc, plane, d_act.data());
        L::relu_backward(f.tex_act.data(), d_act.data(), d_act.size());
        L::conv3x3_backward(f.features().data(), fc, fh, fw, p.tex_conv_w.data(), bc, d_act.data(), d_feat.data(),
                            g.tex_conv_w.data(), g.tex_conv_b.data());
    }
    // Minutiae branch and map head.
    {
        const int pooled = cfg.pooled_features();
        std::vector<T> d_pool(pooled, T(0));
        L::dense_backward(f.min_pool.data(), pooled, p.min_fc_w.data(), d, d_x2.data(), d_pool.data(),
                          g.min_fc_w.data(), g.min_fc_b.data());
        if (!og.d_map.empty()) {
            L::dense_backward(f.min_pool.data(), pooled, p.map_w.data(), cfg.map_size(), og.d_map.data(), d_pool.data(),
                              g.map_w.data(), g.map_b.data());
        }
        std::vector<T> d_act(bc * plane, T(0));
        L::avgpool_backward(d_pool.data(), bc, fh, fw, 2, d_act.data());
        L::relu_backward(f.min_act.data(), d_act.data(), d_act.size());
        L::conv3x3_backward(f.features().data(), fc, fh, fw, p.min_conv_w.data(), bc, d_act.data(), d_feat.data(),
                            g.min_conv_w.data(), g.min_conv_b.data());
    }

    // Stem, last stage first.
    std::vector<T> d_cur = std::move(d_feat);
    int h = fh * 2, w = fw * 2;
    for (std::size_t si = cfg.stem_channels.size(); si-- > 0;) {
        const int co = cfg.stem_channels[si];
        const int ci = si == 0 ? 1 : cfg.stem_channels[si - 1];
        std::vector<T> d_act(static_cast<std::size_t>(co) * h * w, T(0));
        L::maxpool2_backward(d_cur.data(), f.stem_argmax[si].data(), d_cur.size(), d_act.data());
        L::relu_backward(f.stem_act[si].data(), d_act.data(), d_act.size());
        const auto& in = si == 0 ? f.input : f.stem_pool[si - 1];
        const bool need_input_grad = si > 0 || cfg.use_localizer;
        std::vector<T> d_in(need_input_grad ? static_cast<std::size_t>(ci) * h * w : 0, T(0));
        L::conv3x3_backward(in.data(), ci, h, w, p.stem_w[si].data(), co, d_act.data(),
                            need_input_grad ? d_in.data() : nullptr, g.stem_w[si].data(), g.stem_b[si].data());
        d_cur = std::move(d_in);
        h *= 2;
        w *= 2;
    }

    if (cfg.use_localizer) {
        // d_cur is dL/d(aligned input); chain through the sampler and the tanh squashing.
        const auto ag = grid_sample_backward<T, T>(f.raw, cfg.in_h, cfg.in_w, f.affine, d_cur, cfg.in_h, cfg.in_w,
                                                   Padding::kZero);
        const double bounds[3] = {cfg.loc_max_translation(), cfg.loc_max_translation(), cfg.loc_max_rotation()};
        const double d_param[3] = {ag.tx, ag.ty, ag.theta};
        T d_z[3];
        for (int i = 0; i < 3; ++i) {
            const double t = std::tanh(static_cast<double>(f.loc_z[i]));
            d_z[i] = static_cast<T>(d_param[i] * bounds[i] * (1.0 - t * t));
        }
        L::dense_backward(f.loc_features.data(), cfg.loc_features(), p.loc_w.data(), 3, d_z, static_cast<T*>(nullptr),
                          g.loc_w.data(), g.loc_b.data());
    }
}

template <typename T>
void add_weight_decay(const NetParams<T>& p, double weight_decay, NetParams<T>& g) {
    if (weight_decay == 0.0) {
        return;
    }
    auto pb = p.blocks();
    auto gb = g.blocks();
    for (std::size_t i = 0; i < pb.size(); ++i) {
        const auto& pv = pb[i].tensor->values;
        auto& gv = gb[i].tensor->values;
        for (std::size_t j = 0; j < pv.size(); ++j) {
            gv[j] += static_cast<T>(weight_decay) * pv[j];
        }
    }
}

// Gradient of `loss` with respect to every parameter block.
template <typename T>
NetParams<T> backward(const NetParams<T>& p, const NetConfig& cfg, const TrainBatch<T>& batch,
                      const std::vector<SampleForward<T>>& outputs) {
    auto g = NetParams<T>::zeros(cfg);
    const double n = static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& f = outputs[b];
        OutputGrads<T> og;
        auto ce_grad = [&](const std::vector<T>& logits, double weight) {
            auto prob = softmax(logits);
            prob[static_cast<std::size_t>(batch.labels[b])] -= 1.0;
            std::vector<T> d(prob.size());
            for (std::size_t i = 0; i < prob.size(); ++i) d[i] = static_cast<T>(weight * prob[i] / n);
            return d;
        };
        if (cfg.ce1_weight != 0.0) og.d_logits1 = ce_grad(f.logits1, cfg.ce1_weight);
        if (cfg.ce2_weight != 0.0) og.d_logits2 = ce_grad(f.logits2, cfg.ce2_weight);
        if (cfg.map_weight != 0.0) {
            og.d_map.resize(f.map_pred.size());
            for (std::size_t i = 0; i < f.map_pred.size(); ++i) {
                og.d_map[i] = static_cast<T>(cfg.map_weight * 2.0 *
                                             (static_cast<double>(f.map_pred[i]) - static_cast<double>(batch.gt_maps[b][i])) / n);
            }
        }
        backward_sample(p, cfg, f, og, g);
    }
    add_weight_decay(p, cfg.weight_decay, g);
    return g;
}

}  // namespace fpfixed::net
