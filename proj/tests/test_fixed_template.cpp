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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "fpfixed/fixed_template.hpp"
#include "oracles.hpp"

using namespace fpfixed;

namespace {

BranchEmbedding texture(std::vector<float> v) { return {std::move(v), BranchKind::kTexture}; }
BranchEmbedding minutiae(std::vector<float> v) { return {std::move(v), BranchKind::kMinutiae}; }

std::vector<float> random_vector(Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

}  // namespace

TEST(Fuse, OneHotTexture) {
    std::vector<float> x1(256, 0.0F);
    x1[0] = 1.0F;
    const auto t = fuse(texture(x1), minutiae(std::vector<float>(256, 0.0F)));
    EXPECT_EQ(t.dim(), 512u);
    EXPECT_EQ(t.values()[0], 1.0F);
    for (std::size_t i = 1; i < 512; ++i) EXPECT_EQ(t.values()[i], 0.0F);
}

TEST(Fuse, AllOnesIsUniform) {
    const auto t = fuse(texture(std::vector<float>(256, 1.0F)), minutiae(std::vector<float>(256, 1.0F)));
    for (float v : t.values()) EXPECT_NEAR(v, 1.0 / std::sqrt(512.0), 1e-7);
}

TEST(Fuse, RandomPairIsUnitAndProportional) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x1 = random_vector(rng, 256), x2 = random_vector(rng, 256);
        const auto t = fuse(texture(x1), minutiae(x2));
        double n2 = 0.0;
        for (float v : t.values()) n2 += static_cast<double>(v) * v;
        EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-6);
        // Prefix is x1 scaled by one common factor.
        const double ratio = t.values()[0] / x1[0];
        for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(t.values()[i], ratio * x1[i], 1e-6);
    }
}

TEST(Fuse, ScaleInvariant) {
    Rng rng(2);
    const auto x1 = random_vector(rng, 32), x2 = random_vector(rng, 32);
    auto s1 = x1, s2 = x2;
    for (auto& v : s1) v *= 7.5F;
    for (auto& v : s2) v *= 7.5F;
    const auto a = fuse(texture(x1), minutiae(x2));
    const auto b = fuse(texture(s1), minutiae(s2));
    for (std::size_t i = 0; i < a.dim(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-6);
}

TEST(Fuse, Errors) {
    EXPECT_THROW(fuse(texture(std::vector<float>(8, 0.0F)), minutiae(std::vector<float>(8, 0.0F))),
                 DegenerateEmbeddingError);
    EXPECT_THROW(fuse(minutiae({1.0F}), texture({1.0F})), ValidationError);
    EXPECT_THROW(fuse(texture({NAN}), minutiae({1.0F})), ValidationError);
}

TEST(MatchScore, SelfOrthogonalAndSymmetric) {
    Rng rng(3);
    const auto a = oracle::random_unit_template(rng, 512);
    EXPECT_NEAR(match_score(a, a), 1.0F, 1e-6);
    std::vector<float> e0(512, 0.0F), e1(512, 0.0F);
    e0[3] = 1.0F;
    e1[400] = 1.0F;
    EXPECT_NEAR(match_score(FixedTemplate::from_unit(e0, 256), FixedTemplate::from_unit(e1, 256)), 0.0F, 1e-6);
    for (int i = 0; i < 200; ++i) {
        const auto x = oracle::random_unit_template(rng, 512);
        const auto y = oracle::random_unit_template(rng, 512);
        const float s = match_score(x, y);
        EXPECT_EQ(s, match_score(y, x));
        EXPECT_LE(std::fabs(s), 1.0F + 1e-6F);
        double ref = 0.0;
        for (std::size_t k = 0; k < 512; ++k) ref += static_cast<double>(x.values()[k]) * y.values()[k];
        EXPECT_NEAR(s, ref, 1e-7);
    }
    EXPECT_THROW(match_score(a, oracle::random_unit_template(rng, 64)), ValidationError);
}

TEST(MatchScore, OperatingPointDecision) {
    // Two templates at angle acos(0.69) sit exactly on the accept threshold.
    std::vector<float> a(4, 0.0F), b(4, 0.0F);
    a[0] = 1.0F;
    b[0] = 0.69F;
    b[1] = static_cast<float>(std::sqrt(1.0 - 0.69 * 0.69));
    const float s = match_score(FixedTemplate::from_unit(a, 2), FixedTemplate::from_unit(b, 2));
    EXPECT_NEAR(s, 0.69F, 1e-6);
}

TEST(Serialize, SizeAndLayout) {
    Rng rng(4);
    const auto t = oracle::random_unit_template(rng, 512);
    const auto bytes = serialize(t);
    ASSERT_EQ(bytes.size(), 2064u);
    EXPECT_EQ(bytes.size() - kTemplateHeaderSize, 2048u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPFL");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[6] | (bytes[7] << 8), 512);
    float first = 0.0F;
    std::memcpy(&first, bytes.data() + 16, 4);  // test host is little-endian
    EXPECT_EQ(first, t.values()[0]);
}

TEST(Serialize, RoundTripIsBitExact) {
    Rng rng(5);
    for (std::size_t dim : {2u, 64u, 512u}) {
        const auto t = oracle::random_unit_template(rng, dim);
        const auto bytes = serialize(t);
        const auto back = deserialize(bytes);
        EXPECT_EQ(back, t);
        EXPECT_EQ(serialize(back), bytes);
    }
}

TEST(Serialize, RejectsCorruption) {
    Rng rng(6);
    const auto bytes = serialize(oracle::random_unit_template(rng, 512));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize(bad), FormatError);
    bad = bytes;
    bad[4] = 2;
    EXPECT_THROW(deserialize(bad), FormatError);
    bad = bytes;
    bad[6] = 0;
    bad[7] = 0;
    EXPECT_THROW(deserialize(bad), FormatError);
    bad = bytes;
    bad[6] = 0x01;  // dim 513 disagrees with payload size
    bad[7] = 0x02;
    EXPECT_THROW(deserialize(bad), FormatError);
    for (std::size_t cut : {0u, 3u, 15u, 16u, 2063u}) {
        EXPECT_THROW(deserialize(std::span(bytes).first(cut)), FormatError) << cut;
    }
    bad = bytes;
    const float big = 0.9F;
    std::memcpy(bad.data() + 16, &big, 4);
    EXPECT_THROW(deserialize(bad), FormatError);
}

TEST(Serialize, FileRoundTrip) {
    Rng rng(7);
    const auto t = oracle::random_unit_template(rng, 512);
    const auto dir = std::filesystem::temp_directory_path() / "fpfixed_template_test";
    std::filesystem::create_directories(dir);
    write_template(dir / "a.fpt", t);
    EXPECT_EQ(std::filesystem::file_size(dir / "a.fpt"), 2064u);
    EXPECT_EQ(read_template(dir / "a.fpt"), t);
    std::filesystem::remove_all(dir);
}
