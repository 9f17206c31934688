#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/register.hpp"
#include "coreg/synth.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace coreg;

namespace {

// Rotated ellipse with a notch, so that no symmetry fixes its orientation.
BinaryMask blob(int w, int h, double cx, double cy, double scale) {
  BinaryMask m(w, h);
  const double c = std::cos(0.4), s = std::sin(0.4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = (x - cx) / scale, dy = (y - cy) / scale;
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      const bool in = u * u / 400.0 + v * v / 100.0 <= 1.0;
      const bool notch = u > 8 && v > 0;
      m.at(x, y) = in && !notch;
    }
  return m;
}

std::pair<Segmentation, ScalarField> step_edge(int w, int h, int true_edge, int initial_edge, double snr,
                                               std::uint64_t seed) {
  Rng rng(seed);
  ScalarField f(w, h);
  LabelMap l(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(x, y) = rng.normal(x < true_edge ? 0.0 : snr, 1.0);
      l.at(x, y) = x < initial_edge ? 0 : 1;
    }
  return {build_regions(l), f};
}

// Column of the first right-region pixel in each row.
std::vector<int> edge_columns(const Segmentation& seg) {
  std::vector<int> out;
  for (int y = 0; y < seg.height(); ++y) {
    int x = 0;
    while (x < seg.width() && seg.label(y * seg.width() + x) == seg.label(y * seg.width())) ++x;
    out.push_back(x);
  }
  return out;
}

double planted_hit(const Segmentation& s, const PlantedBoundary& pb) {
  const BinaryMask m = dilate(boundary_mask(s), 2.0);
  int hit = 0;
  for (PixelIndex p : pb.pixels) hit += m.values[p];
  return static_cast<double>(hit) / pb.pixels.size();
}

}  // namespace

TEST_CASE("affine of identical masks is the identity") {
  const auto m = blob(96, 96, 48, 48, 1.0);
  const auto t = estimate_affine(m, m);
  CHECK((t.linear - Eigen::Matrix2d::Identity()).norm() < 1e-6);
  CHECK(t.translation.norm() < 0.5);
  CHECK(mask_overlap(m, m, t) == doctest::Approx(1.0));
}

TEST_CASE("affine recovers a shift") {
  const auto a = blob(96, 96, 45, 50, 1.0);
  const auto b = blob(96, 96, 52, 47, 1.0);
  const auto t = estimate_affine(a, b);
  CHECK(std::abs(t.translation.x() - 7.0) < 0.5);
  CHECK(std::abs(t.translation.y() + 3.0) < 0.5);
  CHECK((t.linear - Eigen::Matrix2d::Identity()).norm() < 0.02);
}

TEST_CASE("affine recovers a 2x scale") {
  const auto a = blob(160, 160, 40, 40, 1.0);
  const auto b = blob(160, 160, 80, 80, 2.0);
  const auto t = estimate_affine(a, b);
  CHECK(std::abs(t.linear(0, 0) - 2.0) < 0.04);
  CHECK(std::abs(t.linear(1, 1) - 2.0) < 0.04);
  CHECK(std::abs(t.linear(0, 1)) < 0.04);
  CHECK(std::abs(t.linear(1, 0)) < 0.04);
  CHECK(mask_overlap(a, b, t) > 0.9);
}

TEST_CASE("affine needs non-empty masks") {
  const BinaryMask empty(10, 10);
  const auto m = blob(96, 96, 48, 48, 1.0);
  CHECK_THROWS_AS(estimate_affine(empty, m), DataError);
  CHECK_THROWS_AS(estimate_affine(m, empty), DataError);
}

TEST_CASE("identity mapping copies the segmentation") {
  Rng rng(1);
  const auto seg = build_regions(oracle::voronoi(40, 30, 6, rng));
  const auto mapped = map_segmentation(seg, AffineTransform::identity(), 40, 30);
  CHECK(same_partition(seg, mapped.seg));
  CHECK(std::equal(seg.labels().begin(), seg.labels().end(), mapped.seg.labels().begin()));
  for (const auto& r : seg.regions()) CHECK(mapped.corr.linked(r.id, r.id));
}

TEST_CASE("integer shift mapping") {
  Rng rng(2);
  const auto seg = build_regions(oracle::voronoi(40, 30, 6, rng));
  AffineTransform t;
  t.translation = Eigen::Vector2d(5, -2);
  const auto mapped = map_segmentation(seg, t, 40, 30);
  for (int y = 0; y < 28; ++y)
    for (int x = 5; x < 40; ++x) {
      const RegionId src = seg.label((y + 2) * 40 + (x - 5));
      const RegionId dst = mapped.seg.label(y * 40 + x);
      CHECK(mapped.corr.linked(src, dst));
    }
}

TEST_CASE("affine round trip keeps interior labels") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto seg = build_regions(oracle::voronoi(80, 80, 10, rng));
    AffineTransform t;
    const double a = rng.uniform(-0.3, 0.3), s = rng.uniform(0.9, 1.2);
    t.linear << s * std::cos(a), -s * std::sin(a), s * std::sin(a), s * std::cos(a);
    t.translation = Eigen::Vector2d(40, 40) - t.linear * Eigen::Vector2d(40, 40) + Eigen::Vector2d(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const auto there = map_segmentation(seg, t, 80, 80);
    const auto back = map_segmentation(there.seg, t.inverse(), 80, 80);
    // Compare source labels through the two link maps on the central window.
    std::map<RegionId, RegionId> to_src, back_to_there;
    for (const auto& [a1, b1] : there.corr.links()) to_src[b1] = a1;
    for (const auto& [a2, b2] : back.corr.links()) back_to_there[b2] = a2;
    int same = 0, total = 0;
    for (int y = 20; y < 60; ++y)
      for (int x = 20; x < 60; ++x) {
        ++total;
        same += to_src[back_to_there[back.seg.label(y * 80 + x)]] == seg.label(y * 80 + x);
      }
    CHECK(same >= 0.95 * total);
  }
}

TEST_CASE("singular mapping is rejected") {
  const auto seg = build_regions(LabelMap(4, 4));
  AffineTransform t;
  t.linear.setZero();
  CHECK_THROWS_AS(map_segmentation(seg, t, 4, 4), DomainError);
}

TEST_CASE("step edge moves back to the true position") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int initial : {13, 19}) {
      auto [seg, f] = step_edge(32, 32, 16, initial, 5.0, seed);
      AlignStats stats;
      const auto out = align_boundaries(seg, f, SymmetryGroup::trivial(), ModelConfig{}, 60, &stats);
      int ok = 0;
      for (int x : edge_columns(out)) ok += std::abs(x - 16) <= 1;
      CHECK(ok >= 31);
      CHECK(out.region_count() == 2);
      for (std::size_t i = 1; i < stats.energy.size(); ++i) CHECK(stats.energy[i] < stats.energy[i - 1]);
    }
  }
}

TEST_CASE("strong edge at the right place does not move") {
  auto [seg, f] = step_edge(32, 32, 16, 16, 50.0, 7);
  AlignStats stats;
  const auto out = align_boundaries(seg, f, SymmetryGroup::trivial(), ModelConfig{}, 60, &stats);
  CHECK(stats.pixel_moves == 0);
  CHECK(stats.run_moves == 0);
  CHECK(same_partition(out, seg));
}

TEST_CASE("competition keeps region count and adjacency") {
  Rng rng(4);
  const auto truth = build_regions(oracle::voronoi(64, 64, 12, rng));
  ScalarField f(64, 64);
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = rng.normal(truth.labels()[i] * 20.0, 3.0);
  // Start from a shifted copy of the truth.
  AffineTransform t;
  t.translation = Eigen::Vector2d(2, 1);
  const auto start = map_segmentation(truth, t, 64, 64).seg;
  ModelConfig cfg;
  AlignStats stats;
  const auto out = align_boundaries(start, f, SymmetryGroup::trivial(), cfg, 60, &stats);
  CHECK(out.region_count() == start.region_count());
  CHECK(out.adjacency() == start.adjacency());
  for (const auto& r : out.regions()) CHECK(is_four_connected(r.pixels, 64, 64));
  for (std::size_t i = 1; i < stats.energy.size(); ++i) CHECK(stats.energy[i] <= stats.energy[i - 1]);
  CHECK(stats.energy.back() == doctest::Approx(intra_modal_energy(out, f, cfg, SymmetryGroup::trivial())));
  CHECK(overlapping_rate(truth, out, 1) > overlapping_rate(truth, start, 1));
}

TEST_CASE("pipeline with zero iterations") {
  Rng rng(5);
  const auto s1 = build_regions(oracle::voronoi(32, 32, 5, rng));
  ScalarField a(32, 32), b(32, 32);
  for (auto& v : a.values) v = rng.normal(0, 1);
  for (auto& v : b.values) v = rng.normal(0, 1);
  const auto res = alternate_minimize(a, b, s1, AffineTransform::identity(), SymmetryGroup::trivial(), ModelConfig{}, 0);
  CHECK(res.trace.size() == 1);
  CHECK(res.trace[0].half_iteration == 0);
  CHECK(res.trace[0].d == 0);
  CHECK(same_partition(res.s1, s1));
  CHECK(same_partition(res.s2, s1));
  CHECK_THROWS_AS(alternate_minimize(a, b, s1, AffineTransform::identity(), SymmetryGroup::trivial(), ModelConfig{}, -1),
                  ConfigError);
  const ScalarField small(8, 8);
  CHECK_THROWS_AS(alternate_minimize(small, b, s1, AffineTransform::identity(), SymmetryGroup::trivial(), ModelConfig{}, 1),
                  DimensionError);
}

TEST_CASE("huge lambda never splits") {
  Rng rng(6);
  const auto truth = build_regions(oracle::voronoi(48, 48, 6, rng));
  ScalarField f(48, 48);
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = rng.normal(truth.labels()[i] * 40.0, 2.0);
  const auto init = build_regions(LabelMap(48, 48));
  ModelConfig cfg;
  cfg.lambda = 1e9;
  const auto res = alternate_minimize(f, f, init, AffineTransform::identity(), SymmetryGroup::trivial(), cfg, 2);
  CHECK(res.splits.empty());
  for (const auto& r : res.trace) CHECK(r.d == 0);
  CHECK(res.s1.region_count() == 1);
  CHECK(res.s2.region_count() == 1);
}

TEST_CASE("pipeline restores planted boundaries on a small instance") {
  SynthConfig sc;
  sc.width = 128;
  sc.height = 128;
  sc.n_grains = 24;
  sc.merge_pairs = 3;
  sc.seed = 3;
  const auto group = SymmetryGroup::cubic();
  const auto inst = generate_instance(sc, group);
  REQUIRE(inst.corruption.planted.size() == 3);
  ModelConfig cfg;
  cfg.seed = 3;
  const auto res = alternate_minimize(inst.images.quat, inst.images.scalar, inst.corruption.seg,
                                      AffineTransform::identity(), group, cfg, 3);
  int found = 0;
  for (const auto& pb : inst.corruption.planted) found += planted_hit(res.s2, pb) >= 0.5;
  CHECK(found >= 2);
  REQUIRE(res.trace.size() == 7);
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].u <= res.trace[i - 1].u + 1e-6 * std::abs(res.trace[i - 1].u));
  for (const auto& r : res.trace) CHECK(r.u == doctest::Approx(r.j1 + r.j2 + cfg.lambda * r.d));
  CHECK(res.tests.size() == 6);
  CHECK_NOTHROW(res.corr.validate(res.s1, res.s2));
  CHECK(res.trace.back().d == inter_modal_energy(res.corr));
}
