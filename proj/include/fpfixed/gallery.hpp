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

// Exhaustive 1:N cosine search over a packed, immutable template gallery.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/errors.hpp"
#include "fpfixed/fixed_template.hpp"

namespace fpfixed {

inline constexpr double kGalleryNormTolerance = 1e-4;

class Gallery {
 public:
    Gallery() = default;

    // Takes ownership of a packed N x dim block. Rows must be unit-norm and ids unique.
    Gallery(std::vector<std::string> ids, std::vector<float> matrix, std::size_t dim)
        : ids_(std::move(ids)), matrix_(std::move(matrix)), dim_(dim) {
        if (dim_ == 0) {
            throw ValidationError("gallery: dimension must be >= 1");
        }
        if (matrix_.size() != ids_.size() * dim_) {
            throw ValidationError("gallery: matrix size does not match id count x dim");
        }
        std::unordered_set<std::string> seen;
        for (std::size_t r = 0; r < ids_.size(); ++r) {
            if (!seen.insert(ids_[r]).second) {
                throw ValidationError("gallery: duplicate id '" + ids_[r] + "'");
            }
            double norm = detail::norm_f64(row(r));
            if (!std::isfinite(norm) || std::abs(norm - 1.0) > kGalleryNormTolerance) {
                throw ValidationError("gallery: row " + std::to_string(r) + " is not unit-norm");
            }
        }
    }

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> matrix() const { return matrix_; }
    std::span<const float> row(std::size_t r) const { return std::span(matrix_).subspan(r * dim_, dim_); }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = std::find(ids_.begin(), ids_.end(), id);
        if (it == ids_.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - ids_.begin());
    }

 private:
    std::vector<std::string> ids_;
    std::vector<float> matrix_;
    std::size_t dim_ = 0;
};

inline Gallery build_gallery(const std::vector<std::pair<std::string, FixedTemplate>>& templates) {
    if (templates.empty()) {
        throw ValidationError("build_gallery: no templates");
    }
    const std::size_t dim = templates.front().second.dim();
    std::vector<std::string> ids;
    std::vector<float> matrix;
    ids.reserve(templates.size());
    matrix.reserve(templates.size() * dim);
    for (const auto& [id, tpl] : templates) {
        if (tpl.dim() != dim) {
            throw ValidationError("build_gallery: template '" + id + "' has dimension " + std::to_string(tpl.dim()) +
                                  ", expected " + std::to_string(dim));
        }
        ids.push_back(id);
        matrix.insert(matrix.end(), tpl.values().begin(), tpl.values().end());
    }
    return Gallery(std::move(ids), std::move(matrix), dim);
}

struct SearchHit {
    std::string id;
    float score = 0.0F;
    std::size_t index = 0;

    bool operator==(const SearchHit&) const = default;
};

struct SearchResult {
    std::vector<SearchHit> hits;  // descending score, ties by lower gallery index
};

namespace detail {

struct Scored {
    float score;
    std::size_t index;
};

// Strict "ranks ahead of": higher score, then lower gallery index.
inline bool ranks_before(const Scored& a, const Scored& b) {
    return a.score > b.score || (a.score == b.score && a.index < b.index);
}

inline constexpr std::size_t kScanBlockRows = 64;

// Top-k over rows [begin, end). Scores are computed a block of rows at a time.
inline std::vector<Scored> scan_top_k(const Gallery& g, const float* query, std::size_t k, std::size_t begin,
                                      std::size_t end) {
    std::vector<Scored> heap;  // worst candidate at front
    heap.reserve(k + 1);
    float block[kScanBlockRows];
    const std::size_t dim = g.dim();
    const float* base = g.matrix().data();
    for (std::size_t r0 = begin; r0 < end; r0 += kScanBlockRows) {
        const std::size_t rows = std::min(kScanBlockRows, end - r0);
        for (std::size_t r = 0; r < rows; ++r) {
            block[r] = static_cast<float>(dot_f64(base + (r0 + r) * dim, query, dim));
        }
        for (std::size_t r = 0; r < rows; ++r) {
            Scored s{block[r], r0 + r};
            if (heap.size() < k) {
                heap.push_back(s);
                std::push_heap(heap.begin(), heap.end(), ranks_before);
            } else if (ranks_before(s, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), ranks_before);
                heap.back() = s;
                std::push_heap(heap.begin(), heap.end(), ranks_before);
            }
        }
    }
    return heap;
}

}  // namespace detail

// Exact top-k by cosine score. Rows may be sharded over `threads` workers; the
// merge re-applies the tie-break so the result does not depend on the worker count.
inline SearchResult search(const Gallery& gallery, const FixedTemplate& query, std::size_t k, unsigned threads = 1) {
    if (query.dim() != gallery.dim()) {
        throw ValidationError("search: query dimension " + std::to_string(query.dim()) + " != gallery dimension " +
                              std::to_string(gallery.dim()));
    }
    if (k < 1) {
        throw ValidationError("search: k must be >= 1");
    }
    const std::size_t n = gallery.size();
    k = std::min(k, n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 1024))));

    std::vector<detail::Scored> merged;
    if (threads == 1) {
        merged = detail::scan_top_k(gallery, query.data(), k, 0, n);
    } else {
        std::vector<std::vector<detail::Scored>> parts(threads);
        std::vector<std::thread> workers;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
            workers.emplace_back([&, t, b, e] { parts[t] = detail::scan_top_k(gallery, query.data(), k, b, e); });
        }
        for (auto& w : workers) {
            w.join();
        }
        for (auto& p : parts) {
            merged.insert(merged.end(), p.begin(), p.end());
        }
    }
    std::sort(merged.begin(), merged.end(), detail::ranks_before);
    merged.resize(std::min(k, merged.size()));

    SearchResult result;
    result.hits.reserve(merged.size());
    for (const auto& s : merged) {
        result.hits.push_back(SearchHit{gallery.ids()[s.index], s.score, s.index});
    }
    return result;
}

// Gallery file: "FPGL", version u8, dim u16, count u64, count x (u16 length + UTF-8 id),
// then count x dim float32, all little-endian.
inline constexpr std::uint8_t kGalleryFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_gallery(const Gallery& g) {
    if (g.dim() > 0xFFFF) {
        throw ValidationError("gallery: dimension does not fit the file format");
    }
    std::vector<std::uint8_t> out;
    detail::put_bytes(out, "FPGL");
    out.push_back(kGalleryFormatVersion);
    detail::put_le(out, static_cast<std::uint16_t>(g.dim()));
    detail::put_le(out, static_cast<std::uint64_t>(g.size()));
    for (const auto& id : g.ids()) {
        if (id.size() > 0xFFFF) {
            throw ValidationError("gallery: id longer than 65535 bytes");
        }
        detail::put_le(out, static_cast<std::uint16_t>(id.size()));
        detail::put_bytes(out, id);
    }
    out.reserve(out.size() + g.matrix().size() * 4);
    for (float v : g.matrix()) {
        detail::put_f32(out, v);
    }
    return out;
}

inline Gallery deserialize_gallery(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "gallery");
    if (in.str(4) != "FPGL") {
        throw FormatError("gallery: bad magic");
    }
    const auto version = in.le<std::uint8_t>();
    if (version != kGalleryFormatVersion) {
        throw FormatError("gallery: unsupported version " + std::to_string(version));
    }
    const auto dim = in.le<std::uint16_t>();
    const auto count = in.le<std::uint64_t>();
    if (dim == 0) {
        throw FormatError("gallery: zero dimension");
    }
    // Each entry needs at least 2 id bytes and its float row.
    if (count > in.remaining() / (2 + 4ULL * dim)) {
        throw FormatError("gallery: count " + std::to_string(count) + " exceeds file size");
    }
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = in.le<std::uint16_t>();
        ids.emplace_back(in.str(len));
    }
    if (in.remaining() != count * dim * 4) {
        throw FormatError("gallery: float block is " + std::to_string(in.remaining()) + " bytes, expected " +
                          std::to_string(count * dim * 4));
    }
    std::vector<float> matrix(count * dim);
    for (auto& v : matrix) {
        v = in.f32();
    }
    try {
        return Gallery(std::move(ids), std::move(matrix), dim);
    } catch (const ValidationError& e) {
        throw FormatError(e.what());
    }
}

inline Gallery read_gallery(const std::filesystem::path& path) { return deserialize_gallery(detail::read_file(path)); }

inline void write_gallery(const std::filesystem::path& path, const Gallery& g) {
    detail::write_file_atomic(path, serialize_gallery(g));
}

struct BenchReport {
    std::size_t gallery_size = 0;
    std::size_t dim = 0;
    std::size_t probes = 0;
    std::size_t repetitions = 0;
    unsigned threads = 1;
    double matches_per_sec_1t = 0.0;
    double matches_per_sec_mt = 0.0;
    double probe_latency_ms = 0.0;  // median single-thread search time per probe
};

// Throughput counts template comparisons: N x probes x repetitions per elapsed second.
inline BenchReport benchmark(const Gallery& gallery, const std::vector<FixedTemplate>& queries,
                             std::size_t repetitions = 1, unsigned threads = 0, std::size_t k = 10) {
    if (queries.empty() || repetitions == 0) {
        throw ValidationError("benchmark: need at least one probe and one repetition");
    }
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    using Clock = std::chrono::steady_clock;
    BenchReport rep;
    rep.gallery_size = gallery.size();
    rep.dim = gallery.dim();
    rep.probes = queries.size();
    rep.repetitions = repetitions;
    rep.threads = threads;
    const double matches = static_cast<double>(gallery.size()) * queries.size() * repetitions;

    volatile float sink = 0.0F;
    std::vector<double> latencies;
    latencies.reserve(queries.size() * repetitions);
    const auto t0 = Clock::now();
    for (std::size_t r = 0; r < repetitions; ++r) {
        for (const auto& q : queries) {
            const auto p0 = Clock::now();
            auto res = search(gallery, q, k, 1);
            latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - p0).count());
            sink = sink + res.hits.front().score;
        }
    }
    const double single = std::chrono::duration<double>(Clock::now() - t0).count();
    rep.matches_per_sec_1t = matches / single;
    std::nth_element(latencies.begin(), latencies.begin() + static_cast<std::ptrdiff_t>(latencies.size() / 2),
                     latencies.end());
    rep.probe_latency_ms = latencies[latencies.size() / 2];

    // Probes are dealt round-robin to workers, each scanning the whole gallery.
    const auto m0 = Clock::now();
    std::vector<std::thread> workers;
    std::vector<float> partial(threads, 0.0F);
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t r = 0; r < repetitions; ++r) {
                for (std::size_t i = t; i < queries.size(); i += threads) {
                    partial[t] += search(gallery, queries[i], k, 1).hits.front().score;
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    const double multi = std::chrono::duration<double>(Clock::now() - m0).count();
    for (float p : partial) {
        sink = sink + p;
    }
    rep.matches_per_sec_mt = matches / multi;
    return rep;
}

}  // namespace fpfixed
