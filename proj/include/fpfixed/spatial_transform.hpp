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

// Similarity crop-and-align: bounded (tx, ty, theta) parameters, the 2x3
// sampling matrix acting on normalized target coordinates, a bilinear grid
// sampler and its derivative with respect to the alignment parameters.
//
// Normalized coordinates run over [-1, 1] with pixel centers at
// (2 q + 1) / w - 1, so a translation of w / 2 pixels equals 1.0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "fpfixed/errors.hpp"
#include "fpfixed/image.hpp"

namespace fpfixed {

struct AlignmentBounds {
    double max_translation = 224.0;                  // input pixels
    double max_rotation = std::numbers::pi / 3.0;    // radians
    double window = 285.0;                           // fixed crop side, input pixels
};

struct AlignmentParams {
    double tx = 0.0;
    double ty = 0.0;
    double theta = 0.0;
    double window = 285.0;

    bool operator==(const AlignmentParams&) const = default;
};

struct AffineMatrix {
    double a11 = 1.0, a12 = 0.0, a13 = 0.0;
    double a21 = 0.0, a22 = 1.0, a23 = 0.0;

    static AffineMatrix identity() { return {}; }
};

enum class Padding { kZero, kClampToEdge };

inline AlignmentParams clamp_params(double raw_tx, double raw_ty, double raw_theta, const AlignmentBounds& bounds = {}) {
    if (!std::isfinite(raw_tx) || !std::isfinite(raw_ty) || !std::isfinite(raw_theta)) {
        throw DomainError("clamp_params: non-finite alignment parameter");
    }
    const double t = bounds.max_translation;
    const double r = bounds.max_rotation;
    return AlignmentParams{std::clamp(raw_tx, -t, t), std::clamp(raw_ty, -t, t), std::clamp(raw_theta, -r, r),
                           bounds.window};
}

// Scale is window / w_in horizontally and window / h_in vertically; no shear.
inline AffineMatrix build_affine(const AlignmentParams& p, int w_in, int h_in) {
    if (w_in < 1 || h_in < 1) {
        throw ValidationError("build_affine: input dimensions must be positive");
    }
    const double sx = p.window / w_in;
    const double sy = p.window / h_in;
    const double c = std::cos(p.theta);
    const double s = std::sin(p.theta);
    return AffineMatrix{sx * c, -sx * s, 2.0 * p.tx / w_in, sy * s, sy * c, 2.0 * p.ty / h_in};
}

namespace detail {

template <typename T>
struct ImageView {
    std::span<const T> pixels;
    int h;
    int w;

    double fetch(int y, int x, Padding padding) const {
        if (x < 0 || x >= w || y < 0 || y >= h) {
            if (padding == Padding::kZero) {
                return 0.0;
            }
            x = std::clamp(x, 0, w - 1);
            y = std::clamp(y, 0, h - 1);
        }
        return static_cast<double>(pixels[static_cast<std::size_t>(y) * w + x]);
    }
};

inline double normalized_center(int index, int extent) { return (2.0 * index + 1.0) / extent - 1.0; }

// Coordinates within 1e-9 px of a pixel center snap onto it, so exact-grid
// transforms (identity, integer shifts) reproduce pixels bit for bit.
inline double to_pixel(double normalized, int extent) {
    const double p = 0.5 * extent * (normalized + 1.0) - 0.5;
    const double r = std::nearbyint(p);
    return std::fabs(p - r) < 1e-9 ? r : p;
}

}  // namespace detail

template <typename T>
double bilinear_at(std::span<const T> pixels, int h, int w, double px, double py, Padding padding = Padding::kZero) {
    const detail::ImageView<T> img{pixels, h, w};
    const double fx0 = std::floor(px), fy0 = std::floor(py);
    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
    const double fx = px - fx0, fy = py - fy0;
    const double top = (1.0 - fx) * img.fetch(y0, x0, padding) + fx * img.fetch(y0, x0 + 1, padding);
    const double bottom = (1.0 - fx) * img.fetch(y0 + 1, x0, padding) + fx * img.fetch(y0 + 1, x0 + 1, padding);
    return (1.0 - fy) * top + fy * bottom;
}

inline double bilinear_at(const GrayImage& img, double px, double py, Padding padding = Padding::kZero) {
    return bilinear_at<float>(img.pixels, img.h, img.w, px, py, padding);
}

// Samples an out_h x out_w grid; each target cell maps through A to a source location.
template <typename T>
std::vector<T> grid_sample(std::span<const T> pixels, int h, int w, const AffineMatrix& a, int out_h, int out_w,
                           Padding padding = Padding::kZero) {
    if (out_h < 1 || out_w < 1) {
        throw ValidationError("grid_sample: output dimensions must be >= 1");
    }
    if (pixels.size() != static_cast<std::size_t>(h) * w) {
        throw ValidationError("grid_sample: pixel buffer does not match dimensions");
    }
    std::vector<T> out(static_cast<std::size_t>(out_h) * out_w);
    for (int r = 0; r < out_h; ++r) {
        const double yt = detail::normalized_center(r, out_h);
        for (int q = 0; q < out_w; ++q) {
            const double xt = detail::normalized_center(q, out_w);
            const double u = a.a11 * xt + a.a12 * yt + a.a13;
            const double v = a.a21 * xt + a.a22 * yt + a.a23;
            out[static_cast<std::size_t>(r) * out_w + q] =
                static_cast<T>(bilinear_at(pixels, h, w, detail::to_pixel(u, w), detail::to_pixel(v, h), padding));
        }
    }
    return out;
}

inline GrayImage grid_sample(const GrayImage& image, const AffineMatrix& a, int out_h = 448, int out_w = 448,
                             Padding padding = Padding::kZero) {
    image.validate();
    GrayImage out;
    out.h = out_h;
    out.w = out_w;
    out.pixels = grid_sample<float>(image.pixels, image.h, image.w, a, out_h, out_w, padding);
    return out;
}

// Crop-and-align with the fixed window, resampled to out_h x out_w.
inline GrayImage align_image(const GrayImage& image, const AlignmentParams& params, int out_h = 448, int out_w = 448,
                             Padding padding = Padding::kZero) {
    return grid_sample(image, build_affine(params, image.w, image.h), out_h, out_w, padding);
}

struct AffineGrad {
    double a11 = 0, a12 = 0, a13 = 0, a21 = 0, a22 = 0, a23 = 0;
};

struct AlignmentGrad {
    double tx = 0.0;
    double ty = 0.0;
    double theta = 0.0;
};

// dL/dA given dL/d(output). At an exact integer source coordinate the
// derivative of the left (top) interval is used.
template <typename T, typename G>
AffineGrad grid_sample_backward_matrix(std::span<const T> pixels, int h, int w, const AffineMatrix& a,
                                       std::span<const G> out_grad, int out_h, int out_w,
                                       Padding padding = Padding::kZero) {
    if (out_grad.size() != static_cast<std::size_t>(out_h) * out_w) {
        throw ValidationError("grid_sample_backward: gradient shape does not match output");
    }
    const detail::ImageView<T> img{pixels, h, w};
    AffineGrad g;
    for (int r = 0; r < out_h; ++r) {
        const double yt = detail::normalized_center(r, out_h);
        for (int q = 0; q < out_w; ++q) {
            const double go = static_cast<double>(out_grad[static_cast<std::size_t>(r) * out_w + q]);
            if (go == 0.0) {
                continue;
            }
            const double xt = detail::normalized_center(q, out_w);
            const double px = detail::to_pixel(a.a11 * xt + a.a12 * yt + a.a13, w);
            const double py = detail::to_pixel(a.a21 * xt + a.a22 * yt + a.a23, h);
            double fx0 = std::floor(px), fy0 = std::floor(py);
            double fx = px - fx0, fy = py - fy0;
            if (fx == 0.0) {
                fx0 -= 1.0;
                fx = 1.0;
            }
            if (fy == 0.0) {
                fy0 -= 1.0;
                fy = 1.0;
            }
            const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
            const double i00 = img.fetch(y0, x0, padding), i01 = img.fetch(y0, x0 + 1, padding);
            const double i10 = img.fetch(y0 + 1, x0, padding), i11 = img.fetch(y0 + 1, x0 + 1, padding);
            const double dpx = (1.0 - fy) * (i01 - i00) + fy * (i11 - i10);
            const double dpy = (1.0 - fx) * (i10 - i00) + fx * (i11 - i01);
            const double du = go * dpx * 0.5 * w;
            const double dv = go * dpy * 0.5 * h;
            g.a11 += du * xt;
            g.a12 += du * yt;
            g.a13 += du;
            g.a21 += dv * xt;
            g.a22 += dv * yt;
            g.a23 += dv;
        }
    }
    return g;
}

// Chains dL/dA into the similarity parameters: a13 = 2 tx / w, a23 = 2 ty / h and
// the rotation block s R(theta), whose theta-derivative is expressible in A itself.
inline AlignmentGrad alignment_grad(const AffineGrad& g, const AffineMatrix& a, int w_in, int h_in) {
    AlignmentGrad out;
    out.tx = g.a13 * 2.0 / w_in;
    out.ty = g.a23 * 2.0 / h_in;
    out.theta = g.a11 * a.a12 - g.a12 * a.a11 + g.a21 * a.a22 - g.a22 * a.a21;
    return out;
}

template <typename T, typename G>
AlignmentGrad grid_sample_backward(std::span<const T> pixels, int h, int w, const AffineMatrix& a,
                                   std::span<const G> out_grad, int out_h, int out_w,
                                   Padding padding = Padding::kZero) {
    return alignment_grad(grid_sample_backward_matrix(pixels, h, w, a, out_grad, out_h, out_w, padding), a, w, h);
}

inline AlignmentGrad grid_sample_backward(const GrayImage& image, const AffineMatrix& a, const GrayImage& out_grad,
                                          Padding padding = Padding::kZero) {
    return grid_sample_backward<float, float>(image.pixels, image.h, image.w, a, out_grad.pixels, out_grad.h,
                                              out_grad.w, padding);
}

}  // namespace fpfixed
