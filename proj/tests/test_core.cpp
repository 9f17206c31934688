#include "coreg/affine.hpp"
#include "coreg/correspondence.hpp"
#include "coreg/error.hpp"
#include "coreg/segmentation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace coreg;

namespace {

LabelMap raster(int w, int h, std::initializer_list<int> values) {
  LabelMap m(w, h);
  std::copy(values.begin(), values.end(), m.labels.begin());
  return m;
}

Partition columns_split(const Segmentation& seg, RegionId id, int x_split) {
  Partition psi;
  for (PixelIndex p : seg.region(id).pixels) (p % seg.width() < x_split ? psi.plus : psi.minus).push_back(p);
  return psi;
}

}  // namespace

TEST_CASE("single pixel raster") {
  const auto seg = build_regions(raster(1, 1, {0}));
  REQUIRE(seg.region_count() == 1);
  CHECK(seg.region(0).size() == 1);
  CHECK(seg.region(0).boundary_length == 4);
  CHECK(seg.region(0).border_length == 4);
  CHECK(seg.adjacency().empty());
}

TEST_CASE("two rows give one adjacency edge") {
  const auto seg = build_regions(raster(2, 2, {0, 0, 1, 1}));
  REQUIRE(seg.region_count() == 2);
  CHECK(seg.adjacency() == std::set<RegionEdge>{{0, 1}});
  CHECK(seg.region(0).boundary_length == 6);
  CHECK(seg.region(0).border_length == 4);
  CHECK(seg.region(0).boundary_share() == doctest::Approx(5.0));
}

TEST_CASE("disconnected equal labels become separate regions") {
  const auto seg = build_regions(raster(3, 1, {5, 1, 5}));
  CHECK(seg.region_count() == 3);
  CHECK(seg.label(0) == 0);
  CHECK(seg.label(1) == 1);
  CHECK(seg.label(2) == 2);
}

TEST_CASE("empty raster is rejected") { CHECK_THROWS_AS(build_regions(LabelMap()), DimensionError); }

TEST_CASE("voronoi raster matches flood fill") {
  Rng rng(11);
  const auto m = oracle::voronoi(64, 64, 10, rng);
  const auto seg = build_regions(m);
  const auto comps = oracle::flood_components(m);
  REQUIRE(seg.region_count() == comps.size());
  CHECK(seg.region_count() == 10);
  std::size_t total = 0;
  for (const auto& c : comps) {
    const RegionId id = seg.label(c.front());
    CHECK(seg.region(id).pixels == c);
    total += c.size();
  }
  CHECK(total == 4096);
  CHECK(seg.adjacency() == oracle::brute_adjacency(seg.labels(), 64, 64));
}

TEST_CASE("region statistics") {
  LabelMap m(64, 64);
  const auto seg = build_regions(m);
  const auto s = region_statistics(seg, 0);
  CHECK(s.pixel_count == 4096);
  CHECK(s.equivalent_radius == doctest::Approx(64.0 / std::sqrt(std::numbers::pi)).epsilon(1e-14));
  const auto one = region_statistics(build_regions(raster(1, 1, {0})), 0);
  CHECK(one.equivalent_radius == doctest::Approx(0.5642).epsilon(1e-4));
  CHECK_THROWS_AS(region_statistics(seg, 3), LookupError);
}

TEST_CASE("split 2x2 into columns") {
  auto seg = build_regions(LabelMap(2, 2));
  auto corr = CorrespondenceMap::bijection(seg);
  const auto [after, c2] = split_region(seg, corr, Modality::second, 0, columns_split(seg, 0, 1));
  REQUIRE(after.region_count() == 2);
  CHECK(after.region(0).size() == 2);
  CHECK(after.region(1).size() == 2);
  CHECK(after.adjacency() == std::set<RegionEdge>{{0, 1}});
  CHECK(after.region(0).pixels == std::vector<PixelIndex>{0, 2});
  CHECK(c2.split_log().size() == 1);
  CHECK(c2.linked(0, 1));
  CHECK(seg.region_count() == 1);
}

TEST_CASE("invalid splits are rejected") {
  auto seg = build_regions(LabelMap(3, 1));
  auto corr = CorrespondenceMap::bijection(seg);
  Partition psi{{0, 2}, {1}};
  CHECK_THROWS_AS(split_region_in_place(seg, corr, Modality::first, 0, psi), InvalidPartition);
  Partition empty{{0, 1, 2}, {}};
  CHECK_THROWS_AS(split_region_in_place(seg, corr, Modality::first, 0, empty), InvalidPartition);
  Partition partial{{0}, {1}};
  CHECK_THROWS_AS(split_region_in_place(seg, corr, Modality::first, 0, partial), InvalidPartition);
  CHECK(seg.region_count() == 1);
}

TEST_CASE("incremental split equals full rebuild") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto seg = build_regions(oracle::voronoi(32, 32, 8, rng));
    const auto before = seg.region_count();
    const auto id = static_cast<RegionId>(rng.uniform_index(seg.region_count()));
    std::vector<PixelIndex> moved;
    REQUIRE(oracle::random_split(seg, id, rng, moved));
    const RegionId child = seg.apply_split(id, moved);
    CHECK(child == static_cast<RegionId>(before));
    CHECK(seg.region_count() == before + 1);
    const auto rebuilt = build_regions(seg.label_map());
    CHECK(same_partition(seg, rebuilt));
    CHECK(seg.adjacency() == oracle::brute_adjacency(seg.labels(), 32, 32));
    for (const auto& r : seg.regions()) {
      const auto& o = rebuilt.region(rebuilt.label(r.pixels.front()));
      CHECK(r.boundary == o.boundary);
      CHECK(r.boundary_length == o.boundary_length);
    }
  }
}

TEST_CASE("assign_labels keeps ids and revisions of untouched regions") {
  auto seg = build_regions(raster(3, 2, {0, 1, 2, 0, 1, 2}));
  const auto rev2 = seg.region(2).revision;
  std::vector<RegionId> next(seg.labels().begin(), seg.labels().end());
  next[1] = 0;
  seg.assign_labels(next);
  CHECK(seg.region(0).size() == 3);
  CHECK(seg.region(1).size() == 1);
  CHECK(seg.region(2).revision == rev2);
  next[4] = 0;
  CHECK_THROWS(seg.assign_labels(next));
}

TEST_CASE("shared edges and connectivity helpers") {
  std::vector<PixelIndex> a{0, 1}, b{2, 3};
  CHECK(shared_edge_count(a, b, 2, 2) == 2);
  CHECK(is_four_connected(a, 2, 2));
  std::vector<PixelIndex> diag{0, 3};
  CHECK_FALSE(is_four_connected(diag, 2, 2));
  const std::vector<RegionId> l{4, 4, 9, 1};
  CHECK(canonical_labels(l) == std::vector<RegionId>{0, 0, 1, 2});
}

TEST_CASE("inter-modal energy of a bijection is zero") {
  Rng rng(5);
  const auto seg = build_regions(oracle::voronoi(16, 16, 4, rng));
  const auto corr = CorrespondenceMap::bijection(seg);
  CHECK(inter_modal_energy(corr) == 0);
}

TEST_CASE("one unmatched split counts once") {
  auto s1 = build_regions(LabelMap(8, 8));
  auto s2 = s1;
  auto corr = CorrespondenceMap::bijection(s1);
  split_region_in_place(s2, corr, Modality::second, 0, columns_split(s2, 0, 4));
  CHECK(inter_modal_energy(corr) == 1);
  CHECK(inter_modal_energy(corr.swapped()) == 1);
}

TEST_CASE("matched splits cancel and mismatched ones do not") {
  auto s1 = build_regions(LabelMap(8, 8));
  auto s2 = s1;
  auto corr = CorrespondenceMap::bijection(s1);
  split_region_in_place(s2, corr, Modality::second, 0, columns_split(s2, 0, 4));
  split_region_in_place(s1, corr, Modality::first, 0, columns_split(s1, 0, 4));
  CHECK(inter_modal_energy(corr) == 0);

  auto t1 = build_regions(LabelMap(8, 8));
  auto t2 = t1;
  auto c = CorrespondenceMap::bijection(t1);
  split_region_in_place(t2, c, Modality::second, 0, columns_split(t2, 0, 4));
  Partition rows;
  for (PixelIndex p : t1.region(0).pixels) (p / 8 < 4 ? rows.plus : rows.minus).push_back(p);
  split_region_in_place(t1, c, Modality::first, 0, rows);
  CHECK(inter_modal_energy(c) == 2);
}

TEST_CASE("D equals split count minus twice the best pairing") {
  // Enumerate every injective pairing of the logged splits and take the largest.
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto s1 = build_regions(oracle::voronoi(24, 24, 3, rng));
    auto s2 = s1;
    auto corr = CorrespondenceMap::bijection(s1);
    for (int k = 0; k < 4; ++k) {
      const bool mirror = rng.uniform() < 0.5;
      const auto id = static_cast<RegionId>(rng.uniform_index(s2.region_count()));
      std::vector<PixelIndex> moved;
      if (!oracle::random_split(s2, id, rng, moved)) continue;
      Partition psi;
      psi.minus = moved;
      for (PixelIndex p : s2.region(id).pixels)
        if (!std::binary_search(moved.begin(), moved.end(), p)) psi.plus.push_back(p);
      const bool s1_has = s1.contains(id) && s1.region(id).pixels == s2.region(id).pixels;
      split_region_in_place(s2, corr, Modality::second, id, psi);
      if (mirror && s1_has) split_region_in_place(s1, corr, Modality::first, id, psi);
    }
    std::vector<const SplitRecord*> f, s;
    for (const auto& r : corr.split_log()) (r.modality == Modality::first ? f : s).push_back(&r);
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    int best = 0;
    do {
      int m = 0;
      for (std::size_t i = 0; i < std::min(f.size(), s.size()); ++i)
        if (splits_match(corr, *f[i], *s[perm[i]])) ++m;
      best = std::max(best, m);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(inter_modal_energy(corr) == static_cast<int>(f.size() + s.size()) - 2 * best);
  }
}

TEST_CASE("links grow with splits and validate") {
  auto s1 = build_regions(LabelMap(4, 4));
  auto s2 = s1;
  auto corr = CorrespondenceMap::bijection(s1);
  const RegionId child = split_region_in_place(s2, corr, Modality::second, 0, columns_split(s2, 0, 2));
  CHECK(corr.linked(0, 0));
  CHECK(corr.linked(0, child));
  CHECK_NOTHROW(corr.validate(s1, s2));
  CHECK_THROWS_AS(corr.validate(s2, s1), LookupError);
}

TEST_CASE("mapped jaccard through a shift") {
  CorrespondenceMap corr({8, 8}, {8, 8}, AffineTransform::identity());
  std::vector<PixelIndex> a{0, 1, 2, 3}, b{2, 3, 4, 5};
  CHECK(mapped_jaccard(corr, a, b) == doctest::Approx(2.0 / 6.0));
  AffineTransform shift;
  shift.translation = Eigen::Vector2d(2, 0);
  CorrespondenceMap shifted({8, 8}, {8, 8}, shift);
  CHECK(mapped_jaccard(shifted, a, b) == doctest::Approx(1.0));
}

TEST_CASE("affine inverse and composition") {
  AffineTransform t;
  t.linear << 2, 0.5, -0.3, 1.5;
  t.translation = Eigen::Vector2d(4, -7);
  const auto id = t.compose(t.inverse());
  CHECK((id.linear - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);
  const Eigen::Vector2d p(3, 9);
  CHECK((t.inverse().apply(t.apply(p)) - p).norm() < 1e-12);
  AffineTransform singular;
  singular.linear << 1, 2, 2, 4;
  CHECK_FALSE(singular.invertible());
  CHECK_THROWS_AS(singular.inverse(), DomainError);
}
