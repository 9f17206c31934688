#include "coreg/bessel.hpp"
#include "coreg/error.hpp"
#include "coreg/split.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace coreg;

namespace {

struct Region2D {
  std::vector<PixelIndex> pixels;
  std::vector<double> values;
  int width, height;
  RegionSamples samples() const {
    RegionSamples s;
    s.pixels = pixels;
    s.width = width;
    s.height = height;
    s.scalars = values;
    return s;
  }
};

}  // namespace

TEST_CASE("gaussian GLR of identical constant sides is zero") {
  const std::vector<double> a{4, 4, 4}, b{4, 4};
  CHECK(glr_gaussian(a, b) == 0.0);
  CHECK_THROWS_AS(glr_gaussian(a, std::vector<double>{}), DomainError);
}

TEST_CASE("gaussian GLR closed form equals the likelihood difference") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(2 + rng.uniform_index(100)), b(2 + rng.uniform_index(100));
    const double shift = rng.uniform(-5, 5), sd = rng.uniform(0.1, 10);
    for (auto& x : a) x = rng.normal(0, sd);
    for (auto& x : b) x = rng.normal(shift, sd);
    const double ref = oracle::gaussian_glr_explicit(a, b, 1e-6);
    CHECK(std::abs(glr_gaussian(a, b) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("well separated gaussian sides") {
  Rng rng(2);
  std::vector<double> a(200), b(200);
  for (auto& x : a) x = rng.normal(0, 1);
  for (auto& x : b) x = rng.normal(5, 1);
  CHECK(glr_gaussian(a, b) > 100);
  CHECK(glr_gaussian(a, b) == doctest::Approx(oracle::gaussian_glr_explicit(a, b, 1e-6)).epsilon(1e-12));
}

TEST_CASE("VMF GLR of duplicated samples is zero") {
  Rng rng(3);
  std::vector<Quat> a;
  for (int i = 0; i < 30; ++i) a.push_back(sample_vmf(Quat(1, 0, 0, 0), 20.0, rng));
  CHECK(std::abs(glr_vmf(a, a)) < 1e-9);
}

TEST_CASE("VMF GLR closed form equals the likelihood difference") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Quat mu = oracle::random_quat(rng);
    const Quat nu = rng.uniform() < 0.5 ? mu : oracle::random_quat(rng);
    const double k = rng.uniform(1, 200);
    std::vector<Quat> a(3 + rng.uniform_index(100)), b(3 + rng.uniform_index(100));
    for (auto& x : a) x = sample_vmf(mu, k, rng);
    for (auto& x : b) x = sample_vmf(nu, k, rng);
    const double ref = oracle::vmf_glr_explicit(a, b);
    CHECK(std::abs(glr_vmf(a, b) - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("antipodal VMF clusters") {
  Rng rng(5);
  const Quat mu(1, 0, 0, 0);
  std::vector<Quat> a(200), b(200);
  for (auto& x : a) x = sample_vmf(mu, 50, rng);
  for (auto& x : b) x = sample_vmf(-mu, 50, rng);
  CHECK(glr_vmf(a, b) > 100);
}

TEST_CASE("two pixel region has one split") {
  Region2D r{{0, 1}, {0.0, 10.0}, 2, 1};
  Rng rng(0);
  const auto psi = region_growing_psi(r.samples(), SplitModel::gaussian, 5, rng);
  CHECK(psi.plus.size() == 1);
  CHECK(psi.minus.size() == 1);
  CHECK(gaussian_split_objective(std::vector<double>{0.0}, std::vector<double>{10.0}) == 0.0);
  Region2D one{{0}, {1.0}, 1, 1};
  CHECK_THROWS_AS(region_growing_psi(one.samples(), SplitModel::gaussian, 5, rng), NoSplitError);
}

TEST_CASE("region growing finds a two-halves boundary") {
  Rng rng(6);
  Region2D r{{}, {}, 8, 8};
  for (int p = 0; p < 64; ++p) {
    r.pixels.push_back(p);
    r.values.push_back(rng.normal(p % 8 < 4 ? 0.0 : 10.0, std::sqrt(0.1)));
  }
  const auto psi = region_growing_psi(r.samples(), SplitModel::gaussian, 5, rng);
  int agree = 0;
  const bool plus_left = psi.plus.front() % 8 < 4;
  for (PixelIndex p : psi.plus) agree += (p % 8 < 4) == plus_left;
  for (PixelIndex p : psi.minus) agree += (p % 8 < 4) != plus_left;
  CHECK(agree >= 61);
  CHECK(is_four_connected(psi.plus, 8, 8));
  CHECK(is_four_connected(psi.minus, 8, 8));
}

TEST_CASE("VMF log-likelihood is monotone in the summed resultant length") {
  // Every two-part partition of a 6-pixel region: the maximized split
  // log-likelihood must order partitions like |r+| + |r-|.
  Rng rng(7);
  std::vector<Quat> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(sample_vmf(Quat(1, 0, 0, 0), 5.0, rng));
  std::vector<std::pair<double, double>> rows;
  for (int mask = 1; mask < 63; ++mask) {
    std::vector<Quat> a, b;
    for (int i = 0; i < 6; ++i) ((mask >> i) & 1 ? a : b).push_back(xs[i]);
    const double len = vmf_split_objective(a, b);
    const double k = concentration_mle(len / 6.0, 4, 1e4);
    rows.emplace_back(len, 6.0 * (log_cp(k, 4) + k * mean_resultant_length(k, 4)));
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].second >= rows[i - 1].second - 1e-9);
}

TEST_CASE("f_r endpoints and lens area") {
  for (double r : {1.0, 7.5, 20.0}) {
    CHECK(f_r(0.0, r) == 0.0);
    CHECK(f_r(2 * r, r) == 1.0);
  }
  // Monte-Carlo: fraction of the disc at the origin outside the disc at (d, 0).
  Rng rng(8);
  const double d = 5, r = 20;
  int outside = 0, inside = 0;
  while (inside < 200000) {
    const double x = rng.uniform(-r, r), y = rng.uniform(-r, r);
    if (x * x + y * y > r * r) continue;
    ++inside;
    if ((x - d) * (x - d) + y * y > r * r) ++outside;
  }
  CHECK(std::abs(f_r(d, r) - static_cast<double>(outside) / inside) < 0.005);
  CHECK_THROWS_AS(f_r(41.0, 20.0), DomainError);
  CHECK_THROWS_AS(f_r(1.0, 0.0), DomainError);
}

TEST_CASE("f_r inverse") {
  for (double r : {3.0, 20.0})
    for (double t : {0.0, 0.05, 0.3, 0.9, 1.0}) CHECK(f_r(f_r_inv(t, r), r) == doctest::Approx(t).epsilon(1e-9));
}

TEST_CASE("misalignment threshold") {
  CHECK(rayleigh_tail_inverse(0.05, 3.0) == doctest::Approx(7.343).epsilon(1e-3));
  CHECK(rayleigh_tail_inverse(0.05, 3.0) == doctest::Approx(3.0 * std::sqrt(2.0 * std::log(20.0))).epsilon(1e-15));
  CHECK(misalignment_threshold(20.0, {3.0}, 0.999999) < 1e-3);
  CHECK(misalignment_threshold(2.0, {3.0}, 0.05) == 1.0);
  CHECK(misalignment_threshold(20.0, {3.0}, 0.05) == doctest::Approx(f_r(7.343, 20.0)).epsilon(1e-3));
  CHECK_THROWS_AS(rayleigh_tail_inverse(0.0, 3.0), DomainError);
}

TEST_CASE("rejection rate under the displacement model") {
  const double r = 20, sigma = 3, alpha = 0.05;
  const double eta = misalignment_threshold(r, {sigma}, alpha);
  Rng rng(9);
  int reject = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double d = std::hypot(rng.normal(0, sigma), rng.normal(0, sigma));
    if (f_r(std::min(d, 2 * r), r) > eta) ++reject;
  }
  CHECK(std::abs(static_cast<double>(reject) / n - alpha) < 0.01);
}

namespace {

// w x h image, one region; `value(x, y, rng)` fills the pixels.
template <class F>
std::pair<Segmentation, ScalarField> region_image(int w, int h, F value, Rng& rng) {
  ScalarField f(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.at(x, y) = value(x, y, rng);
  return {build_regions(LabelMap(w, h)), f};
}

}  // namespace

TEST_CASE("two-stage test on a bimodal region") {
  Rng rng(10);
  auto [seg, f] = region_image(20, 20, [](int x, int, Rng& g) { return g.normal(x < 10 ? 5.0 : 10.0, 1.0); }, rng);
  ModelConfig cfg;
  const auto v = test_region_split(seg, 0, f, SymmetryGroup::trivial(), cfg, rng);
  CHECK(v.decision == SplitDecision::split);
  CHECK(v.log_glr > cfg.lambda);
  CHECK(v.size_ratio > 0.4);
}

TEST_CASE("two-stage test on a thin sliver") {
  // Disc-sized region of radius 20 with an 8% strip from a neighbour's distribution.
  Rng rng(11);
  const int side = 35;  // 1225 px, r = 19.7
  const int strip = 3;  // 105 px, 8.6%
  auto [seg, f] =
      region_image(side, side, [](int x, int, Rng& g) { return g.normal(x < strip ? 60.0 : 20.0, 3.0); }, rng);
  ModelConfig cfg;
  const auto v = test_region_split(seg, 0, f, SymmetryGroup::trivial(), cfg, rng);
  CHECK(v.log_glr > cfg.lambda);
  CHECK(v.size_ratio == doctest::Approx(static_cast<double>(strip) / side).epsilon(0.02));
  CHECK(v.threshold_eta == doctest::Approx(0.23).epsilon(0.05));
  CHECK(v.decision == SplitDecision::realign);
}

TEST_CASE("homogeneous regions are kept when the boundary penalty is on") {
  int keep = 0;
  ModelConfig cfg;
  cfg.split_boundary_penalty = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(100 + s);
    auto [seg, f] = region_image(20, 20, [](int, int, Rng& g) { return g.normal(5.0, 1.0); }, rng);
    keep += test_region_split(seg, 0, f, SymmetryGroup::trivial(), cfg, rng).decision == SplitDecision::keep;
  }
  CHECK(keep >= 18);
}

TEST_CASE("two-stage test on an orientation region") {
  Rng rng(12);
  const auto g = SymmetryGroup::cubic();
  QuatField q(32, 32);
  const VmfParams left{oracle::random_quat(rng), 60.0}, right{oracle::random_quat(rng), 60.0};
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) q.at(x, y) = sample_vmf_mixture(x < 16 ? left : right, g, rng);
  const auto seg = build_regions(LabelMap(32, 32));
  const auto v = test_region_split(seg, 0, q, g, ModelConfig{}, rng);
  CHECK(v.decision == SplitDecision::split);
  CHECK(v.size_ratio > 0.4);
  CHECK(std::string(to_string(v.decision)) == "split");
}
