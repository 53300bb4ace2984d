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

#include <algorithm>
#include <filesystem>

#include "fpfixed/gallery.hpp"
#include "oracles.hpp"

using namespace fpfixed;

namespace {

std::vector<std::pair<std::string, FixedTemplate>> random_rows(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<std::pair<std::string, FixedTemplate>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back("s" + std::to_string(i), oracle::random_unit_template(rng, dim));
    return rows;
}

void expect_same(const SearchResult& got, const std::vector<std::pair<std::string, float>>& want) {
    ASSERT_EQ(got.hits.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(got.hits[i].id, want[i].first) << "rank " << i + 1;
        EXPECT_EQ(got.hits[i].score, want[i].second) << "rank " << i + 1;
    }
}

}  // namespace

TEST(BuildGallery, ShapesAndErrors) {
    Rng rng(1);
    auto rows = random_rows(rng, 1, 512);
    EXPECT_EQ(build_gallery(rows).size(), 1u);
    rows.push_back(rows.front());
    EXPECT_THROW(build_gallery(rows), ValidationError);
    rows.back().first = "other";
    rows.back().second = oracle::random_unit_template(rng, 64);
    EXPECT_THROW(build_gallery(rows), ValidationError);
    EXPECT_THROW(build_gallery({}), ValidationError);
    EXPECT_THROW(Gallery({"a"}, std::vector<float>(4, 1.0F), 4), ValidationError);
}

TEST(Search, MemberQueryAndShortGallery) {
    Rng rng(2);
    const auto rows = random_rows(rng, 50, 128);
    const auto g = build_gallery(rows);
    const auto r = search(g, rows[17].second, 5);
    EXPECT_EQ(r.hits.front().id, "s17");
    EXPECT_NEAR(r.hits.front().score, 1.0F, 1e-6);
    EXPECT_EQ(search(g, rows[0].second, 500).hits.size(), 50u);
    EXPECT_THROW(search(g, rows[0].second, 0), ValidationError);
    EXPECT_THROW(search(g, oracle::random_unit_template(rng, 64), 3), ValidationError);
}

TEST(Search, ScoresNonIncreasing) {
    Rng rng(3);
    const auto g = build_gallery(random_rows(rng, 300, 64));
    const auto r = search(g, oracle::random_unit_template(rng, 64), 300);
    for (std::size_t i = 1; i < r.hits.size(); ++i) EXPECT_GE(r.hits[i - 1].score, r.hits[i].score);
}

TEST(Search, TiesBreakByLowerIndex) {
    Rng rng(4);
    const auto a = oracle::random_unit_template(rng, 16);
    const auto b = oracle::random_unit_template(rng, 16);
    std::vector<std::pair<std::string, FixedTemplate>> rows = {
        {"b0", b}, {"a0", a}, {"b1", b}, {"a1", a}, {"a2", a}, {"b2", b}};
    const auto g = build_gallery(rows);
    const auto r = search(g, a, 4);
    EXPECT_EQ(r.hits[0].id, "a0");
    EXPECT_EQ(r.hits[1].id, "a1");
    EXPECT_EQ(r.hits[2].id, "a2");
    expect_same(r, oracle::oracle_search(rows, a, 4));
    // Reordering insertion only reorders the equal-score block.
    std::vector<std::pair<std::string, FixedTemplate>> perm = {rows[4], rows[0], rows[3], rows[1], rows[2], rows[5]};
    const auto rp = search(build_gallery(perm), a, 3);
    EXPECT_EQ(rp.hits[0].id, "a2");
    EXPECT_EQ(rp.hits[1].id, "a1");
    EXPECT_EQ(rp.hits[2].id, "a0");
}

TEST(Search, EqualsNaiveOracleOnTenThousandRows) {
    Rng rng(5);
    auto rows = random_rows(rng, 10000, 512);
    // Plant exact duplicates so tie order is exercised.
    for (std::size_t i = 0; i < 40; ++i) rows[9000 + i].second = rows[i * 7].second;
    const auto g = build_gallery(rows);
    for (int p = 0; p < 100; ++p) {
        const auto q = p % 4 == 0 ? rows[static_cast<std::size_t>(p) * 7 % 280].second
                                  : oracle::random_unit_template(rng, 512);
        const auto want = oracle::oracle_search(rows, q, 10);
        expect_same(search(g, q, 10, 1), want);
        expect_same(search(g, q, 10, 3), want);
    }
}

TEST(GalleryFile, RoundTripAndCorruption) {
    Rng rng(6);
    const auto rows = random_rows(rng, 25, 32);
    const auto g = build_gallery(rows);
    const auto bytes = serialize_gallery(g);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPGL");
    const auto back = deserialize_gallery(bytes);
    EXPECT_EQ(back.ids(), g.ids());
    EXPECT_TRUE(std::equal(back.matrix().begin(), back.matrix().end(), g.matrix().begin()));
    auto bad = bytes;
    bad[0] = 'Q';
    EXPECT_THROW(deserialize_gallery(bad), FormatError);
    EXPECT_THROW(deserialize_gallery(std::span(bytes).first(bytes.size() - 4)), FormatError);
    bad = bytes;
    bad[7] = 0xFF;  // absurd count
    EXPECT_THROW(deserialize_gallery(bad), FormatError);

    const auto dir = std::filesystem::temp_directory_path() / "fpfixed_gallery_test";
    std::filesystem::create_directories(dir);
    write_gallery(dir / "g.fpg", g);
    EXPECT_EQ(read_gallery(dir / "g.fpg").ids(), g.ids());
    std::filesystem::remove_all(dir);
}

TEST(Benchmark, ReportFieldsArePositive) {
    Rng rng(7);
    const auto g = build_gallery(random_rows(rng, 2000, 512));
    std::vector<FixedTemplate> qs;
    for (int i = 0; i < 5; ++i) qs.push_back(oracle::random_unit_template(rng, 512));
    const auto rep = benchmark(g, qs, 2, 2);
    EXPECT_EQ(rep.gallery_size, 2000u);
    EXPECT_EQ(rep.dim, 512u);
    EXPECT_GT(rep.matches_per_sec_1t, 0.0);
    EXPECT_GT(rep.matches_per_sec_mt, 0.0);
    EXPECT_GT(rep.probe_latency_ms, 0.0);
    EXPECT_THROW(benchmark(g, {}, 1), ValidationError);
}
