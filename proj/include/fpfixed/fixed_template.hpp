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

// Fixed-length fingerprint templates: fusion of the texture and minutiae
// branch embeddings into one unit vector, cosine scoring and the `.fpt`
// byte format (16-byte header + dim little-endian float32 values).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/errors.hpp"

namespace fpfixed {

enum class BranchKind : std::uint8_t { kTexture, kMinutiae };

struct BranchEmbedding {
    std::vector<float> values;
    BranchKind kind = BranchKind::kTexture;
};

namespace detail {

// Dot product accumulated in double over eight interleaved lanes, combined in a
// fixed tree. Every score in the library goes through this kernel, so scores are
// reproducible and symmetric in their arguments.
inline double dot_f64(const float* a, const float* b, std::size_t n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) {
            acc[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
        }
    }
    for (std::size_t l = 0; i < n; ++i, ++l) {
        acc[l] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline double norm_f64(std::span<const float> v) { return std::sqrt(dot_f64(v.data(), v.data(), v.size())); }

}  // namespace detail

class FixedTemplate {
 public:
    static constexpr double kNormTolerance = 1e-5;

    FixedTemplate() = default;

    // Wraps an already-normalized vector. Throws if it is not unit length within `tolerance`.
    static FixedTemplate from_unit(std::vector<float> values, std::size_t texture_dim, double tolerance = kNormTolerance) {
        if (values.empty()) {
            throw ValidationError("template: empty vector");
        }
        for (float v : values) {
            if (!std::isfinite(v)) {
                throw ValidationError("template: non-finite value");
            }
        }
        double norm = detail::norm_f64(values);
        if (std::abs(norm - 1.0) > tolerance) {
            throw ValidationError("template: norm " + std::to_string(norm) + " is not 1");
        }
        if (texture_dim > values.size()) {
            throw ValidationError("template: texture half exceeds template dimension");
        }
        FixedTemplate t;
        t.values_ = std::move(values);
        t.texture_dim_ = texture_dim;
        return t;
    }

    std::size_t dim() const { return values_.size(); }
    std::size_t texture_dim() const { return texture_dim_; }
    std::size_t minutiae_dim() const { return values_.size() - texture_dim_; }
    std::span<const float> values() const { return values_; }
    const float* data() const { return values_.data(); }

    bool operator==(const FixedTemplate&) const = default;

 private:
    std::vector<float> values_;
    std::size_t texture_dim_ = 0;
};

// Concatenates texture then minutiae halves and scales to unit length.
inline FixedTemplate fuse(const BranchEmbedding& texture, const BranchEmbedding& minutiae) {
    if (texture.kind != BranchKind::kTexture || minutiae.kind != BranchKind::kMinutiae) {
        throw ValidationError("fuse: expected (texture, minutiae) embeddings");
    }
    if (texture.values.empty() || minutiae.values.empty()) {
        throw ValidationError("fuse: branch embeddings must have dimension >= 1");
    }
    std::vector<float> joined;
    joined.reserve(texture.values.size() + minutiae.values.size());
    joined.insert(joined.end(), texture.values.begin(), texture.values.end());
    joined.insert(joined.end(), minutiae.values.begin(), minutiae.values.end());
    for (float v : joined) {
        if (!std::isfinite(v)) {
            throw ValidationError("fuse: non-finite embedding value");
        }
    }
    const double norm = detail::norm_f64(joined);
    if (norm == 0.0) {
        throw DegenerateEmbeddingError("fuse: both branch embeddings are zero");
    }
    for (auto& v : joined) {
        v = static_cast<float>(static_cast<double>(v) / norm);
    }
    return FixedTemplate::from_unit(std::move(joined), texture.values.size());
}

inline float match_score(const FixedTemplate& t1, const FixedTemplate& t2) {
    if (t1.dim() != t2.dim()) {
        throw ValidationError("match_score: dimension mismatch (" + std::to_string(t1.dim()) + " vs " +
                              std::to_string(t2.dim()) + ")");
    }
    return static_cast<float>(detail::dot_f64(t1.data(), t2.data(), t1.dim()));
}

inline constexpr std::uint8_t kTemplateFormatVersion = 1;
inline constexpr std::size_t kTemplateHeaderSize = 16;
inline constexpr double kSerializedNormTolerance = 1e-4;

inline std::vector<std::uint8_t> serialize(const FixedTemplate& t) {
    if (t.dim() == 0 || t.dim() > 0xFFFF) {
        throw ValidationError("serialize: template dimension out of range");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kTemplateHeaderSize + 4 * t.dim());
    detail::put_bytes(out, "FPFL");
    out.push_back(kTemplateFormatVersion);
    out.push_back(0);
    detail::put_le(out, static_cast<std::uint16_t>(t.dim()));
    out.insert(out.end(), 8, std::uint8_t{0});
    for (float v : t.values()) {
        detail::put_f32(out, v);
    }
    return out;
}

inline FixedTemplate deserialize(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "template");
    if (in.str(4) != "FPFL") {
        throw FormatError("template: bad magic");
    }
    const auto version = in.le<std::uint8_t>();
    if (version != kTemplateFormatVersion) {
        throw FormatError("template: unsupported version " + std::to_string(version));
    }
    in.skip(1);
    const auto dim = in.le<std::uint16_t>();
    if (dim == 0) {
        throw FormatError("template: zero dimension");
    }
    in.skip(8);
    if (in.remaining() != 4u * dim) {
        throw FormatError("template: payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                          std::to_string(4u * dim));
    }
    std::vector<float> values(dim);
    for (auto& v : values) {
        v = in.f32();
    }
    try {
        return FixedTemplate::from_unit(std::move(values), dim / 2, kSerializedNormTolerance);
    } catch (const ValidationError& e) {
        throw FormatError(e.what());
    }
}

inline FixedTemplate read_template(const std::filesystem::path& path) { return deserialize(detail::read_file(path)); }

inline void write_template(const std::filesystem::path& path, const FixedTemplate& t) {
    detail::write_file_atomic(path, serialize(t));
}

}  // namespace fpfixed
