#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"
#include "sphereloc/map_store.hpp"

using namespace sphereloc;

namespace {

std::vector<float> random_descriptor(std::mt19937_64& rng, std::size_t dim = 256) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> d(dim);
  for (auto& v : d) v = n(rng);
  return d;
}

std::vector<PlaceEntry> random_entries(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PlaceEntry> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].pose = Pose::from_yaw(0.01 * static_cast<double>(i), Vec3(static_cast<double>(i), -2.0, 1.0));
    out[i].descriptor = random_descriptor(rng);
  }
  return out;
}

// Descriptors drawn around a few hundred centres, as produced by nearby places.
std::vector<PlaceEntry> clustered_entries(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<float>> centres;
  for (int c = 0; c < 200; ++c) {
    auto d = random_descriptor(rng);
    for (auto& v : d) v *= 10.0f;
    centres.push_back(d);
  }
  std::normal_distribution<float> n(0.0f, 0.3f);
  std::vector<PlaceEntry> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].descriptor = centres[rng() % centres.size()];
    for (auto& v : out[i].descriptor) v += n(rng);
  }
  return out;
}

std::vector<PlaceMatch> brute_force(const std::vector<PlaceEntry>& entries, std::span<const float> q,
                                    std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = static_cast<double>(entries[i].descriptor[j]) - static_cast<double>(q[j]);
      s += d * d;
    }
    all.emplace_back(s, static_cast<std::uint32_t>(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<PlaceMatch> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
  return out;
}

void expect_same_matches(const std::vector<PlaceMatch>& a, const std::vector<PlaceMatch>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id) << "rank " << i;
    EXPECT_EQ(a[i].distance, b[i].distance) << "rank " << i;
  }
}

FeatureSphere sparse_sphere(int bandwidth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureSphere fs = FeatureSphere::zeros(bandwidth);
  for (auto m : kModalities) {
    Channel& c = fs.channel(m);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (u(rng) < 0.3) c.data()[i] = static_cast<float>(u(rng) * 20.0);
    }
  }
  return fs;
}

}  // namespace

TEST(BuildMap, SingleEntry) {
  const PlaceMap map = build_map(random_entries(1, 1));
  EXPECT_EQ(map.size(), 1u);
  const auto m = map.knn_query(map.entry(0).descriptor, 1);
  EXPECT_EQ(m[0].id, 0u);
  EXPECT_EQ(m[0].distance, 0.0);
}

TEST(BuildMap, TestSetScale) {
  const PlaceMap map = build_map(random_entries(3000, 2));
  EXPECT_EQ(map.size(), 3000u);
  for (std::uint32_t i = 0; i < 3000; i += 499) EXPECT_EQ(map.entry(i).id, i);
}

TEST(BuildMap, DuplicatesAreBothRetrievable) {
  auto entries = random_entries(10, 3);
  entries[7].descriptor = entries[2].descriptor;
  const PlaceMap map = build_map(entries);
  const auto m = map.knn_query(entries[2].descriptor, 2);
  EXPECT_EQ(m[0].id, 2u);
  EXPECT_EQ(m[1].id, 7u);
  EXPECT_EQ(m[1].distance, 0.0);
}

TEST(BuildMap, Errors) {
  EXPECT_THROW(build_map({}), InvalidParameter);
  auto entries = random_entries(3, 4);
  entries[1].descriptor.pop_back();
  EXPECT_THROW(build_map(entries), ShapeError);
  auto mixed = random_entries(2, 5);
  mixed[0].features = FeatureSphere::zeros(8);
  mixed[1].features = FeatureSphere::zeros(16);
  EXPECT_THROW(build_map(mixed), ShapeError);
}

TEST(KnnQuery, ExactStoredDescriptor) {
  const auto entries = random_entries(500, 6);
  const PlaceMap map = build_map(entries);
  for (std::uint32_t i = 0; i < 500; i += 37) {
    const auto m = map.knn_query(entries[i].descriptor, 1);
    EXPECT_EQ(m[0].id, i);
    EXPECT_EQ(m[0].distance, 0.0);
  }
}

TEST(KnnQuery, MatchesBruteForceOn2000) {
  const auto entries = random_entries(2000, 7);
  const PlaceMap map = build_map(entries);
  std::mt19937_64 rng(8);
  for (int q = 0; q < 100; ++q) {
    const auto d = random_descriptor(rng);
    expect_same_matches(map.knn_query(d, 15), brute_force(entries, d, 15));
  }
}

TEST(KnnQuery, WholeMapIsSorted) {
  const auto entries = random_entries(300, 9);
  const PlaceMap map = build_map(entries);
  std::mt19937_64 rng(10);
  const auto d = random_descriptor(rng);
  const auto m = map.knn_query(d, 300);
  expect_same_matches(m, brute_force(entries, d, 300));
  for (std::size_t i = 1; i < m.size(); ++i) EXPECT_LE(m[i - 1].distance, m[i].distance);
}

TEST(KnnQuery, TiesGoToLowerId) {
  std::vector<PlaceEntry> entries(4);
  for (auto& e : entries) e.descriptor.assign(256, 0.0f);
  entries[0].descriptor[0] = 2.0f;
  entries[1].descriptor[1] = 1.0f;
  entries[2].descriptor[2] = -1.0f;
  entries[3].descriptor[3] = 1.0f;
  const PlaceMap map = build_map(entries);
  const auto m = map.knn_query(std::vector<float>(256, 0.0f), 3);
  EXPECT_EQ(m[0].id, 1u);
  EXPECT_EQ(m[1].id, 2u);
  EXPECT_EQ(m[2].id, 3u);
}

TEST(KnnQuery, KOutOfRange) {
  const PlaceMap map = build_map(random_entries(5, 11));
  EXPECT_THROW(map.knn_query(map.entry(0).descriptor, 0), InvalidParameter);
  EXPECT_THROW(map.knn_query(map.entry(0).descriptor, 6), InvalidParameter);
  EXPECT_THROW(map.knn_query(std::vector<float>(10), 1), ShapeError);
}

TEST(KnnQuery, ExactOnThousandQueriesAgainstTenThousandEntries) {
  const auto entries = random_entries(10000, 12);
  const PlaceMap map = build_map(entries);
  std::mt19937_64 rng(13);
  int mismatches = 0;
  for (int q = 0; q < 1000; ++q) {
    // Half the queries sit near stored entries, half are unrelated.
    std::vector<float> d = random_descriptor(rng);
    if (q % 2 == 0) {
      const auto& base = entries[rng() % entries.size()].descriptor;
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = base[j] + 0.05f * d[j];
    }
    const auto a = map.knn_query(d, 15);
    const auto b = brute_force(entries, d, 15);
    for (std::size_t i = 0; i < 15; ++i) mismatches += a[i].id != b[i].id || a[i].distance != b[i].distance;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(KnnQuery, ClusteredDataVisitsFewerThanAllEntries) {
  const auto entries = clustered_entries(10000, 14);
  const PlaceMap map = build_map(entries);
  std::mt19937_64 rng(15);
  std::size_t evaluations = 0;
  const int queries = 200;
  for (int q = 0; q < queries; ++q) {
    KdQueryStats stats;
    std::vector<float> d = entries[rng() % entries.size()].descriptor;
    std::normal_distribution<float> n(0.0f, 0.3f);
    for (auto& v : d) v += n(rng);
    map.knn_query(d, 15, &stats);
    evaluations += stats.distance_evaluations;
  }
  EXPECT_LT(static_cast<double>(evaluations) / queries, 10000.0);
}

TEST(MapFile, RoundTripIsBitExact) {
  auto entries = random_entries(100, 16);
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].features = sparse_sphere(8, 100 + i);
  const PlaceMap map = build_map(entries);
  const auto path = std::filesystem::temp_directory_path() / "sphereloc_test_map.smap";
  save_map(map, path);
  EXPECT_TRUE(file_has_magic(path, "SMAP"));
  const PlaceMap back = load_map(path);
  ASSERT_EQ(back.size(), map.size());
  EXPECT_EQ(back.descriptor_dim(), 256u);
  for (std::uint32_t i = 0; i < map.size(); ++i) {
    const auto& a = map.entry(i);
    const auto& b = back.entry(i);
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.descriptor, b.descriptor);
    EXPECT_EQ(a.pose.translation, b.pose.translation);
    EXPECT_EQ(a.pose.rotation.coeffs(), b.pose.rotation.coeffs());
    ASSERT_TRUE(b.features.has_value());
    for (auto m : kModalities) EXPECT_TRUE(a.features->channel(m) == b.features->channel(m));
  }
  std::mt19937_64 rng(17);
  const auto q = random_descriptor(rng);
  expect_same_matches(map.knn_query(q, 10), back.knn_query(q, 10));
  std::filesystem::remove(path);
}

TEST(MapFile, SparseChannelsCompress) {
  auto entries = random_entries(4, 18);
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].features = sparse_sphere(32, i);
  const auto bytes = encode_map(build_map(entries));
  const std::size_t raw_channels = 4 * 3 * 64 * 64 * sizeof(float);
  EXPECT_LT(bytes.size(), raw_channels);
}

TEST(MapFile, TruncationAndVersionErrors) {
  auto entries = random_entries(20, 19);
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].features = sparse_sphere(4, i);
  auto bytes = encode_map(build_map(entries));
  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    const std::span<const std::uint8_t> head(bytes.data(), cut);
    try {
      decode_map(head);
      ADD_FAILURE() << "decoded a map truncated at " << cut;
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
  bytes[4] = 2;
  EXPECT_THROW(decode_map(bytes), UnsupportedVersion);
  bytes[4] = 1;
  bytes[0] = 'X';
  try {
    decode_map(bytes);
    ADD_FAILURE() << "accepted a bad magic";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}
