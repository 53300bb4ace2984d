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

// Forward/backward kernels on channel-major (C x H x W) buffers. Backward
// routines accumulate into their gradient outputs.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace fpfixed::net::layers {

// 3x3 convolution, stride 1, zero padding 1.
template <typename T>
void conv3x3_forward(const T* in, int cin, int h, int w, const T* weight, const T* bias, int cout, T* out) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int o = 0; o < cout; ++o) {
        T* dst = out + o * plane;
        std::fill(dst, dst + plane, bias[o]);
        for (int i = 0; i < cin; ++i) {
            const T* src = in + i * plane;
            const T* k = weight + (static_cast<std::size_t>(o) * cin + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
                for (int kx = 0; kx < 3; ++kx) {
                    const T kv = k[ky * 3 + kx];
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    for (int y = y0; y < y1; ++y) {
                        T* drow = dst + static_cast<std::size_t>(y) * w;
                        const T* srow = src + static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
                        for (int x = x0; x < x1; ++x) {
                            drow[x] += kv * srow[x];
                        }
                    }
                }
            }
        }
    }
}

// d_in may be null when the input gradient is not needed.
template <typename T>
void conv3x3_backward(const T* in, int cin, int h, int w, const T* weight, int cout, const T* d_out, T* d_in,
                      T* d_weight, T* d_bias) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int o = 0; o < cout; ++o) {
        const T* g = d_out + o * plane;
        T sum = 0;
        for (std::size_t p = 0; p < plane; ++p) {
            sum += g[p];
        }
        d_bias[o] += sum;
        for (int i = 0; i < cin; ++i) {
            const T* src = in + i * plane;
            T* dsrc = d_in ? d_in + i * plane : nullptr;
            const T* k = weight + (static_cast<std::size_t>(o) * cin + i) * 9;
            T* dk = d_weight + (static_cast<std::size_t>(o) * cin + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
                for (int kx = 0; kx < 3; ++kx) {
                    const T kv = k[ky * 3 + kx];
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    T acc = 0;
                    for (int y = y0; y < y1; ++y) {
                        const T* grow = g + static_cast<std::size_t>(y) * w;
                        const std::size_t off = static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
                        const T* srow = src + off;
                        for (int x = x0; x < x1; ++x) {
                            acc += grow[x] * srow[x];
                        }
                        if (dsrc) {
                            T* dsrow = dsrc + off;
                            for (int x = x0; x < x1; ++x) {
                                dsrow[x] += kv * grow[x];
                            }
                        }
                    }
                    dk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

template <typename T>
void relu_forward(T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x[i] > T(0) ? x[i] : T(0);
    }
}

// Masks the gradient by the post-activation values.
template <typename T>
void relu_backward(const T* activated, T* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!(activated[i] > T(0))) {
            grad[i] = T(0);
        }
    }
}

// 2x2 max pool, stride 2. `argmax` records the flat input index per output.
template <typename T>
void maxpool2_forward(const T* in, int c, int h, int w, T* out, int* argmax) {
    const int oh = h / 2, ow = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const T* src = in + static_cast<std::size_t>(ch) * h * w;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int best = (2 * y) * w + 2 * x;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * y + dy) * w + 2 * x + dx;
                        if (src[idx] > src[best]) {
                            best = idx;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(ch) * oh + y) * ow + x;
                out[o] = src[best];
                argmax[o] = ch * h * w + best;
            }
        }
    }
}

template <typename T>
void maxpool2_backward(const T* d_out, const int* argmax, std::size_t n_out, T* d_in) {
    for (std::size_t o = 0; o < n_out; ++o) {
        d_in[argmax[o]] += d_out[o];
    }
}

// Average pool with a square window and matching stride.
template <typename T>
void avgpool_forward(const T* in, int c, int h, int w, int f, T* out) {
    const int oh = h / f, ow = w / f;
    const T scale = T(1) / static_cast<T>(f * f);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                T s = 0;
                for (int dy = 0; dy < f; ++dy) {
                    for (int dx = 0; dx < f; ++dx) {
                        s += in[(static_cast<std::size_t>(ch) * h + f * y + dy) * w + f * x + dx];
                    }
                }
                out[(static_cast<std::size_t>(ch) * oh + y) * ow + x] = s * scale;
            }
        }
    }
}

template <typename T>
void avgpool_backward(const T* d_out, int c, int h, int w, int f, T* d_in) {
    const int oh = h / f, ow = w / f;
    const T scale = T(1) / static_cast<T>(f * f);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const T g = d_out[(static_cast<std::size_t>(ch) * oh + y) * ow + x] * scale;
                for (int dy = 0; dy < f; ++dy) {
                    for (int dx = 0; dx < f; ++dx) {
                        d_in[(static_cast<std::size_t>(ch) * h + f * y + dy) * w + f * x + dx] += g;
                    }
                }
            }
        }
    }
}

// Global average pool per channel.
template <typename T>
void gap_forward(const T* in, int c, std::size_t plane, T* out) {
    for (int ch = 0; ch < c; ++ch) {
        T s = 0;
        for (std::size_t p = 0; p < plane; ++p) {
            s += in[ch * plane + p];
        }
        out[ch] = s / static_cast<T>(plane);
    }
}

template <typename T>
void gap_backward(const T* d_out, int c, std::size_t plane, T* d_in) {
    for (int ch = 0; ch < c; ++ch) {
        const T g = d_out[ch] / static_cast<T>(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            d_in[ch * plane + p] += g;
        }
    }
}

// y = W x + b with W stored [out][in].
template <typename T>
void dense_forward(const T* x, int n_in, const T* weight, const T* bias, int n_out, T* y) {
    for (int o = 0; o < n_out; ++o) {
        const T* row = weight + static_cast<std::size_t>(o) * n_in;
        T s = bias[o];
        for (int i = 0; i < n_in; ++i) {
            s += row[i] * x[i];
        }
        y[o] = s;
    }
}

// d_x may be null.
template <typename T>
void dense_backward(const T* x, int n_in, const T* weight, int n_out, const T* d_y, T* d_x, T* d_weight, T* d_bias) {
    for (int o = 0; o < n_out; ++o) {
        const T g = d_y[o];
        if (g == T(0)) {
            continue;
        }
        d_bias[o] += g;
        T* drow = d_weight + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) {
            drow[i] += g * x[i];
        }
        if (d_x) {
            const T* row = weight + static_cast<std::size_t>(o) * n_in;
            for (int i = 0; i < n_in; ++i) {
                d_x[i] += g * row[i];
            }
        }
    }
}

}  // namespace fpfixed::net::layers
