#include "coreg/synth.hpp"

#include "coreg/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace coreg {

void SynthConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("synth: grid must be non-empty");
  if (n_grains < 2) throw ConfigError("synth: n_grains must be at least 2");
  if (merge_pairs < 0 || merge_pairs >= n_grains) throw ConfigError("synth: merge_pairs out of range");
  if (!(displaced_fraction >= 0.0 && displaced_fraction <= 1.0))
    throw ConfigError("synth: displaced_fraction must lie in [0, 1]");
  if (!(sigma_d >= 0.0)) throw ConfigError("synth: sigma_d must be non-negative");
  if (!(min_merge_separation >= 0.0)) throw ConfigError("synth: min_merge_separation must be non-negative");
  if (!(mean_lo <= mean_hi) || !(sigma_lo <= sigma_hi) || !(kappa_lo <= kappa_hi))
    throw ConfigError("synth: empty parameter range");
  if (sigma_lo < 0.0 || kappa_lo < 0.0) throw ConfigError("synth: negative spread parameter");
  if (lloyd_steps < 0) throw ConfigError("synth: lloyd_steps must be non-negative");
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.n_grains = j.value("n_grains", c.n_grains);
    c.displaced_fraction = j.value("displaced_fraction", c.displaced_fraction);
    c.sigma_d = j.value("sigma_d", c.sigma_d);
    c.merge_pairs = j.value("merge_pairs", c.merge_pairs);
    c.min_merge_separation = j.value("min_merge_separation", c.min_merge_separation);
    c.mean_lo = j.value("mean_lo", c.mean_lo);
    c.mean_hi = j.value("mean_hi", c.mean_hi);
    c.sigma_lo = j.value("sigma_lo", c.sigma_lo);
    c.sigma_hi = j.value("sigma_hi", c.sigma_hi);
    c.kappa_lo = j.value("kappa_lo", c.kappa_lo);
    c.kappa_hi = j.value("kappa_hi", c.kappa_hi);
    c.lloyd_steps = j.value("lloyd_steps", c.lloyd_steps);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"n_grains", c.n_grains},
          {"displaced_fraction", c.displaced_fraction},
          {"sigma_d", c.sigma_d},
          {"merge_pairs", c.merge_pairs},
          {"min_merge_separation", c.min_merge_separation},
          {"mean_lo", c.mean_lo},
          {"mean_hi", c.mean_hi},
          {"sigma_lo", c.sigma_lo},
          {"sigma_hi", c.sigma_hi},
          {"kappa_lo", c.kappa_lo},
          {"kappa_hi", c.kappa_hi},
          {"lloyd_steps", c.lloyd_steps},
          {"seed", c.seed}};
}

namespace {

// Nearest seed per pixel, ties to the lower seed index.
std::vector<std::int32_t> voronoi(const std::vector<std::array<double, 2>>& seeds, int w, int h) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(w) * h, 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::int32_t arg = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const double dx = x - seeds[s][0], dy = y - seeds[s][1];
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          arg = static_cast<std::int32_t>(s);
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = arg;
    }
  return out;
}

constexpr std::int32_t kUnset = -1;

// Fills unset pixels with the label of the nearest set pixel (ties: lowest pixel index).
void nearest_fill(std::vector<std::int32_t>& labels, int w, int h) {
  const std::vector<std::int32_t> src = labels;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto& out = labels[static_cast<std::size_t>(y) * w + x];
      if (out != kUnset) continue;
      long best = std::numeric_limits<long>::max();
      std::int32_t arg = kUnset;
      // Anything outside the square of radius r is at least r + 1 away.
      for (long r = 1; r <= std::max(w, h); ++r) {
        best = std::numeric_limits<long>::max();
        for (long yy = std::max<long>(0, y - r); yy <= std::min<long>(h - 1, y + r); ++yy)
          for (long xx = std::max<long>(0, x - r); xx <= std::min<long>(w - 1, x + r); ++xx) {
            const std::int32_t l = src[static_cast<std::size_t>(yy * w + xx)];
            if (l == kUnset) continue;
            const long d = (xx - x) * (xx - x) + (yy - y) * (yy - y);
            if (d < best) {
              best = d;
              arg = l;
            }
          }
        if (arg != kUnset && best < (r + 1) * (r + 1)) break;
      }
      out = arg;
    }
}

// Unsets every pixel outside the largest 4-connected component of its label.
bool drop_fragments(std::vector<std::int32_t>& labels, int w, int h) {
  std::vector<std::int32_t> comp(labels.size(), -1);
  std::vector<std::size_t> comp_size;
  std::vector<std::int32_t> comp_label;
  std::vector<std::size_t> stack;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (comp[p] >= 0 || labels[p] == kUnset) continue;
    const auto c = static_cast<std::int32_t>(comp_size.size());
    comp_size.push_back(0);
    comp_label.push_back(labels[p]);
    stack.assign(1, p);
    comp[p] = c;
    while (!stack.empty()) {
      const std::size_t q = stack.back();
      stack.pop_back();
      ++comp_size[static_cast<std::size_t>(c)];
      const int x = static_cast<int>(q % static_cast<std::size_t>(w)), y = static_cast<int>(q / static_cast<std::size_t>(w));
      const std::size_t nb[4] = {q - w, q - 1, q + 1, q + w};
      const bool ok[4] = {y > 0, x > 0, x + 1 < w, y + 1 < h};
      for (int i = 0; i < 4; ++i)
        if (ok[i] && comp[nb[i]] < 0 && labels[nb[i]] == labels[p]) {
          comp[nb[i]] = c;
          stack.push_back(nb[i]);
        }
    }
  }
  std::map<std::int32_t, std::int32_t> largest;
  for (std::size_t c = 0; c < comp_size.size(); ++c) {
    auto [it, fresh] = largest.emplace(comp_label[c], static_cast<std::int32_t>(c));
    if (!fresh && comp_size[c] > comp_size[static_cast<std::size_t>(it->second)]) it->second = static_cast<std::int32_t>(c);
  }
  bool changed = false;
  for (std::size_t p = 0; p < labels.size(); ++p)
    if (labels[p] != kUnset && largest[labels[p]] != comp[p]) {
      labels[p] = kUnset;
      changed = true;
    }
  return changed;
}

}  // namespace

Segmentation generate_ground_truth(const SynthConfig& config, Rng& rng) {
  config.validate();
  const int w = config.width, h = config.height;
  std::vector<std::array<double, 2>> seeds(static_cast<std::size_t>(config.n_grains));
  for (auto& s : seeds) {
    s[0] = rng.uniform(0.0, w);
    s[1] = rng.uniform(0.0, h);
  }
  std::vector<std::int32_t> cells = voronoi(seeds, w, h);
  for (int step = 0; step < config.lloyd_steps; ++step) {
    std::vector<std::array<double, 3>> acc(seeds.size(), {0.0, 0.0, 0.0});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        auto& a = acc[static_cast<std::size_t>(cells[static_cast<std::size_t>(y) * w + x])];
        a[0] += x;
        a[1] += y;
        a[2] += 1.0;
      }
    for (std::size_t s = 0; s < seeds.size(); ++s)
      if (acc[s][2] > 0.0) seeds[s] = {acc[s][0] / acc[s][2], acc[s][1] / acc[s][2]};
    cells = voronoi(seeds, w, h);
  }
  LabelMap raster(w, h);
  raster.labels = std::move(cells);
  return build_regions(raster);
}

std::vector<GrainParams> draw_grain_params(std::size_t n_grains, const SynthConfig& config, Rng& rng) {
  std::vector<GrainParams> out(n_grains);
  for (std::size_t i = 0; i < n_grains; ++i) {
    Rng g = rng.child({i});
    GrainParams& p = out[i];
    p.mean = g.uniform(config.mean_lo, config.mean_hi);
    const double sigma = g.uniform(config.sigma_lo, config.sigma_hi);
    p.sigma2 = sigma * sigma;
    p.orientation.mu = random_unit_quat(g);
    p.orientation.kappa = g.uniform(config.kappa_lo, config.kappa_hi);
  }
  return out;
}

namespace {

// Pixel lists per grain label, in raster order.
std::vector<std::vector<PixelIndex>> pixels_by_grain(const LabelMap& labels, std::size_t n_grains) {
  std::vector<std::vector<PixelIndex>> out(n_grains);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto l = labels.labels[p];
    if (l < 0 || static_cast<std::size_t>(l) >= n_grains) throw DataError("grain label out of range");
    out[static_cast<std::size_t>(l)].push_back(static_cast<PixelIndex>(p));
  }
  return out;
}

}  // namespace

ScalarField sample_scalar(const LabelMap& grain_labels, const std::vector<GrainParams>& grains, Rng& rng) {
  ScalarField out(grain_labels.width, grain_labels.height);
  const auto by_grain = pixels_by_grain(grain_labels, grains.size());
  const auto n = static_cast<long>(grains.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    Rng g = rng.child({k});
    const double sigma = std::sqrt(grains[k].sigma2);
    for (PixelIndex p : by_grain[k]) out.values[static_cast<std::size_t>(p)] = g.normal(grains[k].mean, sigma);
  }
  return out;
}

QuatField sample_quat(const LabelMap& grain_labels, const std::vector<GrainParams>& grains,
                      const SymmetryGroup& group, Rng& rng) {
  QuatField out(grain_labels.width, grain_labels.height);
  const auto by_grain = pixels_by_grain(grain_labels, grains.size());
  const auto n = static_cast<long>(grains.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    Rng g = rng.child({k});
    for (PixelIndex p : by_grain[k])
      out.values[static_cast<std::size_t>(p)] = sample_vmf_mixture(grains[k].orientation, group, g);
  }
  return out;
}

SampledImages sample_images(const Segmentation& truth, const SynthConfig& config, const SymmetryGroup& group,
                            Rng& rng) {
  SampledImages out;
  Rng params_rng = rng.child({1});
  Rng scalar_rng = rng.child({2});
  Rng quat_rng = rng.child({3});
  out.grains = draw_grain_params(truth.region_count(), config, params_rng);
  const LabelMap labels = truth.label_map();
  out.scalar = sample_scalar(labels, out.grains, scalar_rng);
  out.quat = sample_quat(labels, out.grains, group, quat_rng);
  return out;
}

Corruption corrupt_segmentation(const Segmentation& truth, const SynthConfig& config, Rng& rng,
                                const std::vector<GrainParams>* grains) {
  const int w = truth.width(), h = truth.height();
  const std::size_t n_grains = truth.region_count();
  Corruption out;

  // Merges: adjacent pairs by decreasing shared boundary, each grain used once.
  struct Pair {
    RegionId a, b;
    std::int64_t shared;
  };
  std::vector<Pair> pairs;
  for (const auto& [a, b] : truth.adjacency())
    pairs.push_back({a, b, shared_edge_count(truth.region(a).pixels, truth.region(b).pixels, w, h)});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.shared > y.shared; });
  std::vector<bool> used(n_grains, false);
  std::vector<RegionId> unit(n_grains);  // segment each grain belongs to
  for (std::size_t i = 0; i < n_grains; ++i) unit[i] = static_cast<RegionId>(i);
  for (const Pair& pr : pairs) {
    if (static_cast<int>(out.planted.size()) >= config.merge_pairs) break;
    if (used[static_cast<std::size_t>(pr.a)] || used[static_cast<std::size_t>(pr.b)]) continue;
    if (grains && config.min_merge_separation > 0.0) {
      const GrainParams& ga = (*grains)[static_cast<std::size_t>(pr.a)];
      const GrainParams& gb = (*grains)[static_cast<std::size_t>(pr.b)];
      const double sd = std::sqrt(std::max(ga.sigma2, gb.sigma2));
      if (std::abs(ga.mean - gb.mean) < config.min_merge_separation * sd) continue;
    }
    used[static_cast<std::size_t>(pr.a)] = used[static_cast<std::size_t>(pr.b)] = true;
    PlantedBoundary pb{pr.a, pr.b, {}};
    auto touches = [&](PixelIndex p, RegionId other) {
      const int x = p % w, y = p / w;
      return (y > 0 && truth.label(p - w) == other) || (x > 0 && truth.label(p - 1) == other) ||
             (x + 1 < w && truth.label(p + 1) == other) || (y + 1 < h && truth.label(p + w) == other);
    };
    for (PixelIndex p : truth.region(pr.a).boundary)
      if (touches(p, pr.b)) pb.pixels.push_back(p);
    for (PixelIndex p : truth.region(pr.b).boundary)
      if (touches(p, pr.a)) pb.pixels.push_back(p);
    std::sort(pb.pixels.begin(), pb.pixels.end());
    unit[static_cast<std::size_t>(pr.b)] = pr.a;
    out.planted.push_back(std::move(pb));
  }

  // Displacement of a random subset of the segments.
  std::vector<RegionId> segments;
  for (std::size_t i = 0; i < n_grains; ++i)
    if (unit[i] == static_cast<RegionId>(i)) segments.push_back(static_cast<RegionId>(i));
  const auto k = static_cast<std::size_t>(std::lround(config.displaced_fraction * static_cast<double>(segments.size())));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(segments.size() - i);
    std::swap(segments[i], segments[j]);
  }
  std::vector<RegionId> moved(segments.begin(), segments.begin() + static_cast<long>(k));
  std::sort(moved.begin(), moved.end());
  for (RegionId id : moved) {
    const double dx = rng.normal(0.0, config.sigma_d);
    const double dy = rng.normal(0.0, config.sigma_d);
    out.displaced.push_back({id, static_cast<int>(std::lround(dx)), static_cast<int>(std::lround(dy))});
  }

  std::vector<std::int32_t> labels(truth.labels().begin(), truth.labels().end());
  if (!out.displaced.empty()) {
    std::vector<std::int32_t> shift_x(n_grains, 0), shift_y(n_grains, 0);
    std::vector<bool> is_moved(n_grains, false);
    for (const Displacement& d : out.displaced)
      for (std::size_t g = 0; g < n_grains; ++g)
        if (unit[g] == d.grain) {
          is_moved[g] = true;
          shift_x[g] = d.dx;
          shift_y[g] = d.dy;
        }
    std::vector<std::int32_t> painted(labels.size(), kUnset);
    for (std::size_t p = 0; p < labels.size(); ++p)
      if (!is_moved[static_cast<std::size_t>(labels[p])]) painted[p] = labels[p];
    // Moved grains are painted over the static ones; where two overlap, the later pixel wins.
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto g = static_cast<std::size_t>(labels[p]);
      if (!is_moved[g]) continue;
      const int x = static_cast<int>(p % static_cast<std::size_t>(w)) + shift_x[g];
      const int y = static_cast<int>(p / static_cast<std::size_t>(w)) + shift_y[g];
      if (x >= 0 && y >= 0 && x < w && y < h) painted[static_cast<std::size_t>(y) * w + x] = labels[p];
    }
    nearest_fill(painted, w, h);
    for (int round = 0; round < 8 && drop_fragments(painted, w, h); ++round) nearest_fill(painted, w, h);
    labels = std::move(painted);
  }

  out.grain_labels = LabelMap(w, h);
  out.grain_labels.labels = labels;
  for (auto& l : labels) l = unit[static_cast<std::size_t>(l)];
  LabelMap merged(w, h);
  merged.labels = std::move(labels);
  out.seg = build_regions(merged);
  return out;
}

SynthInstance generate_instance(const SynthConfig& config, const SymmetryGroup& group) {
  config.validate();
  const Rng root(config.seed);
  Rng truth_rng = root.child({1});
  Rng params_rng = root.child({2});
  Rng corrupt_rng = root.child({3});
  Rng scalar_rng = root.child({4});
  Rng quat_rng = root.child({5});
  SynthInstance inst;
  inst.truth = generate_ground_truth(config, truth_rng);
  inst.images.grains = draw_grain_params(inst.truth.region_count(), config, params_rng);
  inst.corruption = corrupt_segmentation(inst.truth, config, corrupt_rng, &inst.images.grains);
  inst.images.scalar = sample_scalar(inst.truth.label_map(), inst.images.grains, scalar_rng);
  inst.images.quat = sample_quat(inst.corruption.grain_labels, inst.images.grains, group, quat_rng);
  return inst;
}

nlohmann::json sidecar_json(const SynthInstance& inst, const SynthConfig& config) {
  nlohmann::json grains = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.images.grains.size(); ++i) {
    const GrainParams& g = inst.images.grains[i];
    const Quat& mu = g.orientation.mu;
    grains.push_back({{"id", i},
                      {"pixels", inst.truth.regions()[i].size()},
                      {"mean", g.mean},
                      {"sigma2", g.sigma2},
                      {"mu", {mu(0), mu(1), mu(2), mu(3)}},
                      {"kappa", g.orientation.kappa}});
  }
  nlohmann::json displaced = nlohmann::json::array();
  for (const auto& d : inst.corruption.displaced) displaced.push_back({{"grain", d.grain}, {"dx", d.dx}, {"dy", d.dy}});
  nlohmann::json planted = nlohmann::json::array();
  for (const auto& p : inst.corruption.planted) planted.push_back({{"a", p.a}, {"b", p.b}, {"pixels", p.pixels}});
  return {{"config", to_json(config)}, {"grains", grains}, {"displaced", displaced}, {"planted", planted}};
}

}  // namespace coreg
