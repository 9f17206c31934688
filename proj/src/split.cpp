#include "coreg/split.hpp"

#include "coreg/bessel.hpp"
#include "coreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace coreg {

namespace {

constexpr std::uint8_t kUnassigned = 255;

double biased_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

Quat resultant(std::span<const Quat> v) {
  Quat r = Quat::Zero();
  for (const auto& x : v) r += x;
  return r;
}

// 4-neighbour table in local (sorted pixel list) indices, -1 when outside the region.
std::vector<std::array<int, 4>> local_neighbours(const RegionSamples& region) {
  const auto& px = region.pixels;
  std::vector<std::array<int, 4>> table(px.size());
  auto find = [&](PixelIndex p) -> int {
    auto it = std::lower_bound(px.begin(), px.end(), p);
    return (it != px.end() && *it == p) ? static_cast<int>(it - px.begin()) : -1;
  };
  for (std::size_t i = 0; i < px.size(); ++i) {
    const int x = px[i] % region.width;
    const int y = px[i] / region.width;
    table[i] = {x + 1 < region.width ? find(px[i] + 1) : -1, x > 0 ? find(px[i] - 1) : -1,
                y + 1 < region.height ? find(px[i] + region.width) : -1, y > 0 ? find(px[i] - region.width) : -1};
  }
  return table;
}

std::vector<std::uint8_t> grow(const RegionSamples& region, const std::vector<std::array<int, 4>>& nbr,
                               SplitModel model, std::size_t seed_plus, std::size_t seed_minus) {
  const std::size_t n = region.pixels.size();
  std::vector<std::uint8_t> side(n, kUnassigned);
  std::vector<std::uint8_t> queued[2] = {std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};
  std::vector<int> frontier[2];

  double count[2] = {0, 0};
  double mean[2] = {0, 0};
  Quat sum[2] = {Quat::Zero(), Quat::Zero()};
  double norm[2] = {0, 0};

  auto assign = [&](std::size_t i, int s) {
    side[i] = static_cast<std::uint8_t>(s);
    count[s] += 1.0;
    if (model == SplitModel::gaussian) {
      mean[s] += (region.scalars[i] - mean[s]) / count[s];
    } else {
      sum[s] += region.quats[i];
      norm[s] = sum[s].norm();
    }
    for (int j : nbr[i]) {
      if (j >= 0 && side[static_cast<std::size_t>(j)] == kUnassigned && !queued[s][static_cast<std::size_t>(j)]) {
        queued[s][static_cast<std::size_t>(j)] = 1;
        frontier[s].push_back(j);
      }
    }
  };
  assign(seed_plus, 0);
  assign(seed_minus, 1);

  for (std::size_t assigned = 2; assigned < n; ++assigned) {
    double best_cost = std::numeric_limits<double>::infinity();
    int best_pixel = std::numeric_limits<int>::max();
    int best_side = -1;
    for (int s = 0; s < 2; ++s) {
      auto& f = frontier[s];
      for (std::size_t k = 0; k < f.size();) {
        const int i = f[k];
        if (side[static_cast<std::size_t>(i)] != kUnassigned) {
          f[k] = f.back();
          f.pop_back();
          continue;
        }
        double cost;
        if (model == SplitModel::gaussian) {
          const double d = region.scalars[static_cast<std::size_t>(i)] - mean[s];
          cost = count[s] / (count[s] + 1.0) * d * d;
        } else {
          cost = norm[s] - (sum[s] + region.quats[static_cast<std::size_t>(i)]).norm();
        }
        if (cost < best_cost || (cost == best_cost && (i < best_pixel || (i == best_pixel && s < best_side)))) {
          best_cost = cost;
          best_pixel = i;
          best_side = s;
        }
        ++k;
      }
    }
    if (best_side < 0) break;  // region not connected; caller validates
    assign(static_cast<std::size_t>(best_pixel), best_side);
  }
  return side;
}

std::size_t farthest_from(const RegionSamples& region, std::size_t from) {
  const int fx = region.pixels[from] % region.width;
  const int fy = region.pixels[from] / region.width;
  std::size_t best = from;
  long best_d = -1;
  for (std::size_t i = 0; i < region.pixels.size(); ++i) {
    const long dx = region.pixels[i] % region.width - fx;
    const long dy = region.pixels[i] / region.width - fy;
    const long d = dx * dx + dy * dy;
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::pair<std::size_t, std::size_t> dissimilar_pair(const RegionSamples& region, SplitModel model) {
  const std::size_t n = region.pixels.size();
  std::size_t a = 0, b = 0;
  if (model == SplitModel::gaussian) {
    for (std::size_t i = 1; i < n; ++i) {
      if (region.scalars[i] < region.scalars[a]) a = i;
      if (region.scalars[i] > region.scalars[b]) b = i;
    }
  } else {
    Quat m = resultant(region.quats);
    if (m.norm() > 0) m.normalize();
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = m.dot(region.quats[i]);
      if (d < lowest) {
        lowest = d;
        a = i;
      }
    }
    lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = region.quats[a].dot(region.quats[i]);
      if (d < lowest) {
        lowest = d;
        b = i;
      }
    }
  }
  if (a == b) b = farthest_from(region, a);
  return {a, b};
}

double objective_of(const RegionSamples& region, SplitModel model, const std::vector<std::uint8_t>& side) {
  if (model == SplitModel::gaussian) {
    std::vector<double> p, m;
    for (std::size_t i = 0; i < side.size(); ++i) (side[i] == 0 ? p : m).push_back(region.scalars[i]);
    return gaussian_split_objective(p, m);
  }
  std::vector<Quat> p, m;
  for (std::size_t i = 0; i < side.size(); ++i) (side[i] == 0 ? p : m).push_back(region.quats[i]);
  return -vmf_split_objective(p, m);
}

}  // namespace

double glr_gaussian(std::span<const double> plus, std::span<const double> minus, double variance_floor) {
  if (plus.empty() || minus.empty()) throw DomainError("glr_gaussian needs samples on both sides");
  const double n_plus = static_cast<double>(plus.size());
  const double n_minus = static_cast<double>(minus.size());
  const double n = n_plus + n_minus;
  std::vector<double> pooled(plus.begin(), plus.end());
  pooled.insert(pooled.end(), minus.begin(), minus.end());
  const double s0 = std::max(biased_variance(pooled), variance_floor);
  const double s1 = std::max((n_plus * biased_variance(plus) + n_minus * biased_variance(minus)) / n, variance_floor);
  return 0.5 * n * (std::log(s0) - std::log(s1));
}

double glr_vmf(std::span<const Quat> plus, std::span<const Quat> minus, double kappa_max) {
  if (plus.empty() || minus.empty()) throw DomainError("glr_vmf needs samples on both sides");
  const double n = static_cast<double>(plus.size() + minus.size());
  const Quat r_plus = resultant(plus);
  const Quat r_minus = resultant(minus);
  const double split_len = r_plus.norm() + r_minus.norm();
  const double pooled_len = (r_plus + r_minus).norm();
  const double k1 = concentration_mle(split_len / n, 4, kappa_max);
  const double k0 = concentration_mle(pooled_len / n, 4, kappa_max);
  return n * (log_cp(k1, 4) - log_cp(k0, 4)) + k1 * split_len - k0 * pooled_len;
}

double gaussian_split_objective(std::span<const double> plus, std::span<const double> minus) {
  return biased_variance(plus) * static_cast<double>(plus.size()) +
         biased_variance(minus) * static_cast<double>(minus.size());
}

double vmf_split_objective(std::span<const Quat> plus, std::span<const Quat> minus) {
  return resultant(plus).norm() + resultant(minus).norm();
}

std::vector<std::uint8_t> grow_from_seeds(const RegionSamples& region, SplitModel model, std::size_t seed_plus,
                                          std::size_t seed_minus) {
  if (region.pixels.size() < 2) throw NoSplitError("region has fewer than two pixels");
  if (seed_plus == seed_minus || seed_plus >= region.pixels.size() || seed_minus >= region.pixels.size())
    throw DomainError("seeds must be two distinct pixels of the region");
  return grow(region, local_neighbours(region), model, seed_plus, seed_minus);
}

Partition region_growing_psi(const RegionSamples& region, SplitModel model, int restarts, Rng& rng) {
  const std::size_t n = region.pixels.size();
  if (n < 2) throw NoSplitError("region has fewer than two pixels");
  const auto nbr = local_neighbours(region);

  std::vector<std::pair<std::size_t, std::size_t>> seeds{dissimilar_pair(region, model)};
  for (int r = 1; r < restarts; ++r) {
    const std::size_t a = rng.uniform_index(n);
    std::size_t b = farthest_from(region, a);
    if (b == a) b = (a + 1) % n;
    seeds.emplace_back(a, b);
  }

  std::vector<std::uint8_t> best_side;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : seeds) {
    auto side = grow(region, nbr, model, a, b);
    if (std::find(side.begin(), side.end(), kUnassigned) != side.end())
      throw InvalidPartition("region pixels are not 4-connected");
    const double value = objective_of(region, model, side);
    if (value < best) {
      best = value;
      best_side = std::move(side);
    }
  }
  Partition psi;
  for (std::size_t i = 0; i < n; ++i) (best_side[i] == 0 ? psi.plus : psi.minus).push_back(region.pixels[i]);
  return psi;
}

double f_r(double d, double r) {
  if (!(r > 0)) throw DomainError("f_r: radius must be positive");
  if (d < 0 || d > 2.0 * r * (1.0 + 1e-12)) throw DomainError("f_r: displacement outside [0, 2r]");
  const double u = std::min(d / (2.0 * r), 1.0);
  const double half = std::sqrt(std::max(0.0, r * r - 0.25 * d * d));
  return 1.0 - (2.0 / std::numbers::pi) * std::acos(u) + d / (std::numbers::pi * r * r) * half;
}

double f_r_inv(double t, double r) {
  if (!(r > 0)) throw DomainError("f_r_inv: radius must be positive");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("f_r_inv: ratio outside [0, 1]");
  double lo = 0.0;
  double hi = 2.0 * r;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, r); ++i) {
    const double mid = 0.5 * (lo + hi);
    (f_r(mid, r) < t ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double rayleigh_tail_inverse(double alpha, double sigma) {
  if (!(alpha > 0 && alpha < 1)) throw DomainError("alpha must lie in (0, 1)");
  return sigma * std::sqrt(2.0 * std::log(1.0 / alpha));
}

double misalignment_threshold(double r, const DisplacementModel& model, double alpha) {
  if (!(r > 0)) throw DomainError("radius must be positive");
  if (!(model.sigma_d > 0)) throw DomainError("sigma_d must be positive");
  const double d = rayleigh_tail_inverse(alpha, model.sigma_d);
  if (d >= 2.0 * r) return 1.0;
  return f_r(d, r);
}

const char* to_string(SplitDecision d) {
  switch (d) {
    case SplitDecision::keep:
      return "keep";
    case SplitDecision::realign:
      return "realign";
    case SplitDecision::split:
      return "split";
  }
  return "?";
}

SplitVerdict test_region_split(const Segmentation& seg, RegionId region, ImageRef image, const SymmetryGroup& group,
                               const ModelConfig& config, Rng& rng) {
  const Region& r = seg.region(region);
  if (r.size() < 2) throw NoSplitError("region has fewer than two pixels");
  if (seg.width() != image.width() || seg.height() != image.height())
    throw DimensionError("segmentation and image dimensions differ");

  RegionSamples samples;
  samples.pixels = r.pixels;
  samples.width = seg.width();
  samples.height = seg.height();

  SplitVerdict v;
  std::vector<double> scalars;
  std::vector<Quat> reduced;
  if (image.is_scalar()) {
    scalars.reserve(r.size());
    for (PixelIndex p : r.pixels) scalars.push_back(image.scalar().values[static_cast<std::size_t>(p)]);
    samples.scalars = scalars;
    v.psi = region_growing_psi(samples, SplitModel::gaussian, config.restarts, rng);
  } else {
    std::vector<Quat> raw;
    raw.reserve(r.size());
    for (PixelIndex p : r.pixels) raw.push_back(image.quat().values[static_cast<std::size_t>(p)]);
    EmOptions options;
    options.tol = config.em_tol;
    options.max_iter = config.em_max_iter;
    options.kappa_max = config.kappa_max;
    const VmfParams fit = vmf_mixture_em_detailed(raw, group, options).params;
    reduced = symmetry_reduce(raw, fit.mu, group);
    samples.quats = reduced;
    v.psi = region_growing_psi(samples, SplitModel::vmf, config.restarts, rng);
  }

  // Side values in pixel order; psi sides are sorted subsets of r.pixels.
  auto gather = [&](const std::vector<PixelIndex>& side, auto& values, auto& out) {
    out.reserve(side.size());
    for (PixelIndex p : side) {
      const auto it = std::lower_bound(r.pixels.begin(), r.pixels.end(), p);
      out.push_back(values[static_cast<std::size_t>(it - r.pixels.begin())]);
    }
  };
  if (image.is_scalar()) {
    std::vector<double> a, b;
    gather(v.psi.plus, scalars, a);
    gather(v.psi.minus, scalars, b);
    v.log_glr = glr_gaussian(a, b, config.variance_floor);
  } else {
    std::vector<Quat> a, b;
    gather(v.psi.plus, reduced, a);
    gather(v.psi.minus, reduced, b);
    v.log_glr = glr_vmf(a, b, config.kappa_max);
  }

  v.psi_edges = shared_edge_count(v.psi.plus, v.psi.minus, seg.width(), seg.height());
  v.glr_threshold = config.lambda;
  if (config.split_boundary_penalty) v.glr_threshold += config.epsilon * static_cast<double>(v.psi_edges);

  const double n = static_cast<double>(r.size());
  v.size_ratio = static_cast<double>(std::min(v.psi.plus.size(), v.psi.minus.size())) / n;
  v.threshold_eta = misalignment_threshold(std::sqrt(n / std::numbers::pi), DisplacementModel{config.sigma_d}, config.alpha);

  if (v.log_glr <= v.glr_threshold)
    v.decision = SplitDecision::keep;
  else if (v.size_ratio > v.threshold_eta)
    v.decision = SplitDecision::split;
  else
    v.decision = SplitDecision::realign;
  return v;
}

}  // namespace coreg
