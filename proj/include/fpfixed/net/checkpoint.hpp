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

// Parameter checkpoints: "FPCK", u32 version, u32 length + config text
// (key = value lines), u32 block count, then per block: u16 name length, name,
// u8 rank, rank x u32 dims, float32 values. All little-endian.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fpfixed/detail/byte_io.hpp"
#include "fpfixed/net/config.hpp"
#include "fpfixed/net/toy_net.hpp"

namespace fpfixed::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const NetConfig& cfg, const NetParams<float>& params) {
    using fpfixed::detail::put_bytes;
    using fpfixed::detail::put_f32;
    using fpfixed::detail::put_le;
    std::vector<std::uint8_t> out;
    put_bytes(out, "FPCK");
    put_le(out, kCheckpointVersion);
    const std::string text = format_key_values(cfg);
    put_le(out, static_cast<std::uint32_t>(text.size()));
    put_bytes(out, text);
    const auto blocks = params.blocks();
    put_le(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        put_le(out, static_cast<std::uint16_t>(b.name.size()));
        put_bytes(out, b.name);
        out.push_back(static_cast<std::uint8_t>(b.tensor->shape.size()));
        for (int d : b.tensor->shape) {
            put_le(out, static_cast<std::uint32_t>(d));
        }
        for (float v : b.tensor->values) {
            put_f32(out, v);
        }
    }
    return out;
}

inline std::pair<NetConfig, NetParams<float>> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    fpfixed::detail::ByteReader in(bytes, "checkpoint");
    if (in.str(4) != "FPCK") {
        throw FormatError("checkpoint: bad magic");
    }
    if (const auto v = in.le<std::uint32_t>(); v != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(v));
    }
    const auto text_len = in.le<std::uint32_t>();
    NetConfig cfg;
    TrainConfig unused;
    try {
        apply_key_values(std::string(in.str(text_len)), cfg, unused);
        cfg.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
    auto params = NetParams<float>::zeros(cfg);
    auto blocks = params.blocks();
    const auto count = in.le<std::uint32_t>();
    if (count != blocks.size()) {
        throw FormatError("checkpoint: " + std::to_string(count) + " blocks, config implies " +
                          std::to_string(blocks.size()));
    }
    for (auto& b : blocks) {
        const auto name_len = in.le<std::uint16_t>();
        const std::string name(in.str(name_len));
        if (name != b.name) {
            throw FormatError("checkpoint: expected block '" + b.name + "', found '" + name + "'");
        }
        const auto rank = in.le<std::uint8_t>();
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            d = static_cast<int>(in.le<std::uint32_t>());
        }
        if (shape != b.tensor->shape) {
            throw FormatError("checkpoint: block '" + name + "' has the wrong shape");
        }
        for (auto& v : b.tensor->values) {
            v = in.f32();
            if (!std::isfinite(v)) {
                throw FormatError("checkpoint: non-finite value in block '" + name + "'");
            }
        }
    }
    if (in.remaining() != 0) {
        throw FormatError("checkpoint: trailing bytes");
    }
    return {cfg, std::move(params)};
}

inline void save_checkpoint(const std::filesystem::path& path, const NetConfig& cfg, const NetParams<float>& params) {
    fpfixed::detail::write_file_atomic(path, serialize_checkpoint(cfg, params));
}

inline std::pair<NetConfig, NetParams<float>> load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(fpfixed::detail::read_file(path));
}

}  // namespace fpfixed::net
