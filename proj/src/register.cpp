#include "coreg/register.hpp"

#include "coreg/error.hpp"
#include "coreg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace coreg {

namespace {

struct Moments {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

Moments mask_moments(const BinaryMask& m) {
  const std::size_t n = m.count();
  if (n == 0) throw DataError("mask has no foreground pixels");
  Moments out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) out.centroid += Eigen::Vector2d(x, y);
  out.centroid /= static_cast<double>(n);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) {
        const Eigen::Vector2d d = Eigen::Vector2d(x, y) - out.centroid;
        out.cov += d * d.transpose();
      }
  out.cov /= static_cast<double>(n);
  // Pixel-area correction keeps a single pixel from having zero spread.
  out.cov += Eigen::Matrix2d::Identity() / 12.0;
  return out;
}

bool near_isotropic(const Eigen::Vector2d& evals) { return evals(1) - evals(0) <= 1e-3 * evals(1); }

int nearest(double v, int size) {
  const long r = std::lround(v);
  return static_cast<int>(std::clamp<long>(r, 0, size - 1));
}

}  // namespace

double mask_overlap(const BinaryMask& from, const BinaryMask& to, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < to.height; ++y) {
    for (int x = 0; x < to.width; ++x) {
      const Eigen::Vector2d s = inv.apply(Eigen::Vector2d(x, y));
      const long sx = std::lround(s.x()), sy = std::lround(s.y());
      const bool a = sx >= 0 && sy >= 0 && sx < from.width && sy < from.height &&
                     from.at(static_cast<int>(sx), static_cast<int>(sy)) != 0;
      const bool b = to.at(x, y) != 0;
      inter += (a && b);
      uni += (a || b);
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

AffineTransform estimate_affine(const BinaryMask& from, const BinaryMask& to) {
  const Moments m1 = mask_moments(from);
  const Moments m2 = mask_moments(to);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> e1(m1.cov), e2(m2.cov);

  std::vector<Eigen::Matrix2d> candidates;
  if (near_isotropic(e1.eigenvalues()) || near_isotropic(e2.eigenvalues())) {
    const double s = std::sqrt(std::sqrt(m2.cov.determinant() / m1.cov.determinant()));
    candidates.push_back(s * Eigen::Matrix2d::Identity());
  } else {
    const Eigen::Vector2d scale = (e2.eigenvalues().array() / e1.eigenvalues().array()).sqrt();
    for (double s0 : {1.0, -1.0})
      for (double s1 : {1.0, -1.0}) {
        const Eigen::Matrix2d signs = Eigen::Vector2d(s0 * scale(0), s1 * scale(1)).asDiagonal();
        candidates.push_back(e2.eigenvectors() * signs * e1.eigenvectors().transpose());
      }
  }

  AffineTransform best;
  double best_overlap = -1.0;
  for (const auto& linear : candidates) {
    AffineTransform t;
    t.linear = linear;
    t.translation = m2.centroid - linear * m1.centroid;
    const double o = mask_overlap(from, to, t);
    if (o > best_overlap) {
      best_overlap = o;
      best = t;
    }
  }

  // Integer offsets in order of increasing length, so ties keep the smaller shift.
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) offsets.emplace_back(dx, dy);
  std::stable_sort(offsets.begin(), offsets.end(), [](auto a, auto b) {
    return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
  });
  const Eigen::Vector2d base = best.translation;
  for (auto [dx, dy] : offsets) {
    AffineTransform t = best;
    t.translation = base + Eigen::Vector2d(dx, dy);
    const double o = mask_overlap(from, to, t);
    if (o > best_overlap) {
      best_overlap = o;
      best.translation = t.translation;
    }
  }
  return best;
}

MappedSegmentation map_segmentation(const Segmentation& seg, const AffineTransform& t, int target_width,
                                    int target_height) {
  if (target_width <= 0 || target_height <= 0) throw DimensionError("empty target grid");
  const AffineTransform inv = t.inverse();
  LabelMap raster(target_width, target_height);
  for (int y = 0; y < target_height; ++y)
    for (int x = 0; x < target_width; ++x) {
      const Eigen::Vector2d s = inv.apply(Eigen::Vector2d(x, y));
      const int sx = nearest(s.x(), seg.width());
      const int sy = nearest(s.y(), seg.height());
      raster.at(x, y) = seg.label(static_cast<PixelIndex>(sy * seg.width() + sx));
    }
  MappedSegmentation out{build_regions(raster), CorrespondenceMap({seg.width(), seg.height()}, {target_width, target_height}, t)};
  for (const auto& r : out.seg.regions())
    out.corr.link(raster.labels[static_cast<std::size_t>(r.pixels.front())], r.id);
  return out;
}

// ---------------------------------------------------------------------------
// Boundary competition

namespace {

class Competition {
 public:
  Competition(const Segmentation& seg, IntraModalEnergy& energy)
      : w_(seg.width()), h_(seg.height()), energy_(energy), labels_(seg.labels().begin(), seg.labels().end()) {
    sizes_.assign(seg.region_count(), 0);
    for (RegionId l : labels_) ++sizes_[static_cast<std::size_t>(l)];
    models_.reserve(seg.region_count());
    for (const auto& r : seg.regions()) models_.push_back(&energy.model(seg, r.id));
    for (PixelIndex p = 0; p < static_cast<PixelIndex>(labels_.size()); ++p) {
      const int x = p % w_, y = p / w_;
      if (x + 1 < w_ && labels_[p] != labels_[p + 1]) ++edges_[key(labels_[p], labels_[p + 1])];
      if (y + 1 < h_ && labels_[p] != labels_[p + w_]) ++edges_[key(labels_[p], labels_[p + w_])];
    }
  }

  const std::vector<RegionId>& labels() const { return labels_; }

  std::size_t pixel_pass() {
    std::size_t moves = 0;
    std::array<PixelIndex, 4> nb{};
    for (PixelIndex p = 0; p < static_cast<PixelIndex>(labels_.size()); ++p) {
      const int count = neighbours(p, nb);
      const RegionId a = labels_[p];
      RegionId best = -1;
      double best_delta = 0.0;
      for (int i = 0; i < count; ++i) {
        const RegionId b = labels_[nb[i]];
        if (b == a || b == best) continue;
        const PixelIndex one[1] = {p};
        const double d = delta(one, a, b);
        if (d < best_delta || (d == best_delta && best >= 0 && b < best)) {
          best_delta = d;
          best = b;
        }
      }
      if (best < 0) continue;
      const PixelIndex one[1] = {p};
      if (try_move(one, a, best)) ++moves;
    }
    return moves;
  }

  std::size_t run_pass() {
    static constexpr std::array<std::array<int, 2>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    std::size_t moves = 0;
    std::vector<PixelIndex> run;
    for (const auto& d : dirs) {
      const int dx = d[0], dy = d[1];
      const int tx = dy != 0 ? 1 : 0, ty = dx != 0 ? 1 : 0;  // run direction
      auto pairs = [&](int x, int y, RegionId a, RegionId b) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return false;
        const int ox = x + dx, oy = y + dy;
        if (ox < 0 || oy < 0 || ox >= w_ || oy >= h_) return false;
        return labels_[y * w_ + x] == a && labels_[oy * w_ + ox] == b;
      };
      for (int y = 0; y < h_; ++y) {
        for (int x = 0; x < w_; ++x) {
          const int ox = x + dx, oy = y + dy;
          if (ox < 0 || oy < 0 || ox >= w_ || oy >= h_) continue;
          const RegionId a = labels_[y * w_ + x];
          const RegionId b = labels_[oy * w_ + ox];
          if (a == b) continue;
          if (pairs(x - tx, y - ty, a, b)) continue;  // not the start of the run
          run.clear();
          for (int k = 0; pairs(x + k * tx, y + k * ty, a, b); ++k)
            run.push_back((y + k * ty) * w_ + (x + k * tx));
          if (run.size() < 2) continue;
          if (delta(run, a, b) < 0.0 && try_move(run, a, b)) ++moves;
        }
      }
    }
    return moves;
  }

 private:
  static std::uint64_t key(RegionId a, RegionId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  int neighbours(PixelIndex p, std::array<PixelIndex, 4>& nb) const {
    const int x = p % w_, y = p / w_;
    int c = 0;
    if (y > 0) nb[c++] = p - w_;
    if (x > 0) nb[c++] = p - 1;
    if (x + 1 < w_) nb[c++] = p + 1;
    if (y + 1 < h_) nb[c++] = p + w_;
    return c;
  }

  bool in_set(std::span<const PixelIndex> set, PixelIndex q) const {
    return std::find(set.begin(), set.end(), q) != set.end();
  }

  /// Change of J when `set` moves from a to b, at the current region parameters.
  double delta(std::span<const PixelIndex> set, RegionId a, RegionId b) const {
    const RegionModel& ma = *models_[static_cast<std::size_t>(a)];
    const RegionModel& mb = *models_[static_cast<std::size_t>(b)];
    double d = 0.0;
    std::int64_t length = 0;
    std::array<PixelIndex, 4> nb{};
    for (PixelIndex p : set) {
      d += pixel_nll(mb, energy_.image(), p, energy_.group()) - pixel_nll(ma, energy_.image(), p, energy_.group());
      const int count = neighbours(p, nb);
      for (int i = 0; i < count; ++i) {
        if (set.size() > 1 && in_set(set, nb[i])) continue;
        const RegionId c = labels_[nb[i]];
        length += (c == a) - (c == b);
      }
    }
    return d + energy_.config().epsilon * static_cast<double>(length);
  }

  /// Applies the move if region a stays non-empty and connected and the
  /// adjacency graph is unchanged.
  bool try_move(std::span<const PixelIndex> set, RegionId a, RegionId b) {
    if (sizes_[static_cast<std::size_t>(a)] <= set.size()) return false;

    std::unordered_map<std::uint64_t, std::int64_t> change;
    std::array<PixelIndex, 4> nb{};
    for (PixelIndex p : set) {
      const int count = neighbours(p, nb);
      for (int i = 0; i < count; ++i) {
        if (set.size() > 1 && in_set(set, nb[i])) continue;
        const RegionId c = labels_[nb[i]];
        if (c != a) --change[key(a, c)];
        if (c != b) ++change[key(b, c)];
      }
    }
    for (const auto& [k, dc] : change) {
      if (dc == 0) continue;
      const auto it = edges_.find(k);
      const std::int64_t before = it == edges_.end() ? 0 : it->second;
      if (before == 0 || before + dc <= 0) return false;
    }
    if (!stays_connected(set, a)) return false;

    for (PixelIndex p : set) labels_[p] = b;
    for (const auto& [k, dc] : change) edges_[k] += dc;
    sizes_[static_cast<std::size_t>(a)] -= set.size();
    sizes_[static_cast<std::size_t>(b)] += set.size();
    return true;
  }

  bool stays_connected(std::span<const PixelIndex> set, RegionId a) {
    if (set.size() == 1 && locally_simple(set[0], a)) return true;
    // Flood fill of a without the moved pixels.
    std::array<PixelIndex, 4> nb{};
    PixelIndex start = -1;
    for (PixelIndex p : set) {
      const int count = neighbours(p, nb);
      for (int i = 0; i < count && start < 0; ++i)
        if (labels_[nb[i]] == a && !in_set(set, nb[i])) start = nb[i];
      if (start >= 0) break;
    }
    if (start < 0) return false;
    ++stamp_;
    if (mark_.size() != labels_.size()) mark_.assign(labels_.size(), 0);
    for (PixelIndex p : set) mark_[p] = stamp_;
    std::vector<PixelIndex>& stack = stack_;
    stack.clear();
    stack.push_back(start);
    mark_[start] = stamp_;
    std::size_t seen = 1;
    while (!stack.empty()) {
      const PixelIndex p = stack.back();
      stack.pop_back();
      const int count = neighbours(p, nb);
      for (int i = 0; i < count; ++i) {
        const PixelIndex q = nb[i];
        if (labels_[q] != a || mark_[q] == stamp_) continue;
        mark_[q] = stamp_;
        ++seen;
        stack.push_back(q);
      }
    }
    return seen == sizes_[static_cast<std::size_t>(a)] - set.size();
  }

  /// 4-neighbours of p labelled a are 4-connected within the 3x3 ring around p.
  bool locally_simple(PixelIndex p, RegionId a) const {
    const int x = p % w_, y = p / w_;
    // Ring in cyclic order starting at the top-left corner.
    static constexpr std::array<std::array<int, 2>, 8> ring{
        {{-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};
    std::array<bool, 8> in{};
    for (int i = 0; i < 8; ++i) {
      const int qx = x + ring[i][0], qy = y + ring[i][1];
      in[i] = qx >= 0 && qy >= 0 && qx < w_ && qy < h_ && labels_[qy * w_ + qx] == a;
    }
    // Consecutive ring pixels are 4-adjacent, so the edge neighbours stay
    // connected iff they all fall in one cyclic run of ring members.
    if (std::all_of(in.begin(), in.end(), [](bool v) { return v; })) return true;
    int runs_with_edge = 0;
    for (int start = 0; start < 8; ++start) {
      if (!in[start] || in[(start + 7) % 8]) continue;
      bool has_edge = false;
      for (int i = start; in[i % 8] && i - start < 8; ++i)
        if (i % 2 == 1) has_edge = true;
      runs_with_edge += has_edge;
    }
    return runs_with_edge <= 1;
  }

  int w_, h_;
  IntraModalEnergy& energy_;
  std::vector<RegionId> labels_;
  std::vector<std::size_t> sizes_;
  std::vector<const RegionModel*> models_;
  std::unordered_map<std::uint64_t, std::int64_t> edges_;
  std::vector<std::uint32_t> mark_;
  std::vector<PixelIndex> stack_;
  std::uint32_t stamp_ = 0;
};

}  // namespace

AlignStats align_boundaries_in_place(Segmentation& seg, IntraModalEnergy& energy, int max_sweeps) {
  AlignStats stats;
  double j = energy.total(seg);
  stats.energy.push_back(j);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Competition comp(seg, energy);
    const std::size_t pm = comp.pixel_pass();
    const std::size_t rm = comp.run_pass();
    if (pm + rm == 0) break;
    ++stats.sweeps;

    std::vector<RegionId> previous(seg.labels().begin(), seg.labels().end());
    seg.assign_labels(comp.labels());
    const double next = energy.total(seg);
    if (next > j) {
      seg.assign_labels(std::move(previous));
      energy.refresh(seg);
      stats.reverted = true;
      break;
    }
    stats.pixel_moves += pm;
    stats.run_moves += rm;
    j = next;
    stats.energy.push_back(j);
  }
  return stats;
}

Segmentation align_boundaries(const Segmentation& seg, ImageRef image, const SymmetryGroup& group,
                              const ModelConfig& config, int max_sweeps, AlignStats* stats) {
  Segmentation out = seg;
  IntraModalEnergy energy(image, config, group);
  AlignStats s = align_boundaries_in_place(out, energy, max_sweeps);
  if (stats) *stats = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Split tests

namespace {

std::vector<RegionId> test_order(const Segmentation& seg) {
  std::vector<RegionId> ids;
  for (const auto& r : seg.regions())
    if (r.size() >= 2) ids.push_back(r.id);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](RegionId a, RegionId b) { return seg.region(a).size() > seg.region(b).size(); });
  return ids;
}

bool test_one(const Segmentation& seg, RegionId id, ImageRef image, const SymmetryGroup& group,
              const ModelConfig& config, std::uint64_t stream_key, SplitVerdict& out) {
  Rng rng = Rng::stream(config.seed, {stream_key, static_cast<std::uint64_t>(id)});
  try {
    out = test_region_split(seg, id, image, group, config, rng);
    return true;
  } catch (const NoSplitError&) {
    return false;
  } catch (const EstimationError&) {
    return false;
  }
}

}  // namespace

std::vector<std::pair<RegionId, SplitVerdict>> test_all_regions(const Segmentation& seg, ImageRef image,
                                                                const SymmetryGroup& group,
                                                                const ModelConfig& config, std::uint64_t stream_key) {
  const std::vector<RegionId> ids = test_order(seg);
  std::vector<SplitVerdict> verdicts(ids.size());
  std::vector<std::uint8_t> ok(ids.size(), 0);
  const auto n = static_cast<long>(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ok[k] = test_one(seg, ids[k], image, group, config, stream_key, verdicts[k]);
  }
  std::vector<std::pair<RegionId, SplitVerdict>> out;
  for (std::size_t k = 0; k < ids.size(); ++k)
    if (ok[k]) out.emplace_back(ids[k], std::move(verdicts[k]));
  return out;
}

std::vector<std::pair<RegionId, SplitVerdict>> test_all_regions_serial(const Segmentation& seg, ImageRef image,
                                                                       const SymmetryGroup& group,
                                                                       const ModelConfig& config,
                                                                       std::uint64_t stream_key) {
  std::vector<std::pair<RegionId, SplitVerdict>> out;
  for (RegionId id : test_order(seg)) {
    SplitVerdict v;
    if (test_one(seg, id, image, group, config, stream_key, v)) out.emplace_back(id, std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alternating minimization

PipelineResult alternate_minimize(ImageRef i1, ImageRef i2, const Segmentation& s1_init,
                                  const AffineTransform& transform, const SymmetryGroup& group,
                                  const ModelConfig& config, int iters) {
  config.validate();
  if (iters < 0) throw ConfigError("iteration count must be non-negative");
  if (s1_init.width() != i1.width() || s1_init.height() != i1.height())
    throw DimensionError("initial segmentation does not match the first image");

  MappedSegmentation mapped = map_segmentation(s1_init, transform, i2.width(), i2.height());
  PipelineResult res{s1_init, mapped.seg, mapped.seg, std::move(mapped.corr), {}, {}, {}};

  IntraModalEnergy e1(i1, config, group);
  IntraModalEnergy e2(i2, config, group);
  int d = inter_modal_energy(res.corr);
  double j1 = e1.total(res.s1);
  double j2 = e2.total(res.s2);
  auto record = [&](int half, Modality m) {
    res.trace.push_back({half, m, j1, j2, d, j1 + j2 + config.lambda * d});
  };
  record(0, Modality::second);

  int half = 0;
  for (int it = 0; it < iters; ++it) {
    for (Modality m : {Modality::second, Modality::first}) {
      ++half;
      Segmentation& seg = m == Modality::first ? res.s1 : res.s2;
      IntraModalEnergy& energy = m == Modality::first ? e1 : e2;
      ImageRef image = m == Modality::first ? i1 : i2;

      TestSummary summary;
      const auto verdicts = test_all_regions(seg, image, group, config, static_cast<std::uint64_t>(half));
      summary.tested = verdicts.size();
      for (const auto& [id, v] : verdicts) {
        switch (v.decision) {
          case SplitDecision::keep: ++summary.keep; continue;
          case SplitDecision::realign: ++summary.realign; continue;
          case SplitDecision::split: ++summary.split; break;
        }
        Segmentation trial = seg;
        CorrespondenceMap trial_corr = res.corr;
        const RegionId child = split_region_in_place(trial, trial_corr, m, id, v.psi);
        const double before = energy.region_term(seg, id);
        double after = 0.0;
        for (RegionId r : {id, child}) {
          const Region& region = trial.region(r);
          after += fit_region_model(image, region.pixels, config, group).nll +
                   config.epsilon * region.boundary_share();
        }
        const int d_after = inter_modal_energy(trial_corr);
        const double delta_u = after - before + config.lambda * (d_after - d);
        if (delta_u > 0.0) {
          ++summary.rejected_by_energy;
          continue;
        }
        seg = std::move(trial);
        res.corr = std::move(trial_corr);
        d = d_after;
        ++summary.applied;
        res.splits.push_back({half, m, id, child, v.log_glr, v.size_ratio, v.threshold_eta, delta_u});
      }

      align_boundaries_in_place(seg, energy, config.max_sweeps);
      (m == Modality::first ? j1 : j2) = energy.total(seg);
      res.tests.push_back(summary);
      record(half, m);
    }
  }
  return res;
}

}  // namespace coreg
