#include "coreg/correspondence.hpp"

#include "coreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace coreg {

CorrespondenceMap::CorrespondenceMap(GridDims first, GridDims second, AffineTransform first_to_second)
    : first_(first), second_(second), first_to_second_(std::move(first_to_second)) {}

CorrespondenceMap CorrespondenceMap::bijection(const Segmentation& seg) {
  CorrespondenceMap corr({seg.width(), seg.height()}, {seg.width(), seg.height()}, AffineTransform::identity());
  for (const auto& r : seg.regions()) corr.link(r.id, r.id);
  return corr;
}

void CorrespondenceMap::record_split(SplitRecord record) {
  std::vector<std::pair<RegionId, RegionId>> inherited;
  for (const auto& [a, b] : links_) {
    if (record.modality == Modality::first && a == record.parent) inherited.emplace_back(record.added, b);
    if (record.modality == Modality::second && b == record.parent) inherited.emplace_back(a, record.added);
  }
  links_.insert(inherited.begin(), inherited.end());
  split_log_.push_back(std::move(record));
}

CorrespondenceMap CorrespondenceMap::swapped() const {
  CorrespondenceMap out(second_, first_, first_to_second_.inverse());
  for (const auto& [a, b] : links_) out.links_.insert({b, a});
  out.split_log_ = split_log_;
  for (auto& r : out.split_log_) r.modality = other(r.modality);
  return out;
}

void CorrespondenceMap::validate(const Segmentation& first, const Segmentation& second) const {
  for (const auto& [a, b] : links_) {
    if (!first.contains(a) || !second.contains(b))
      throw LookupError("correspondence link refers to a missing region");
  }
}

namespace {

// Pixels of grid `to` whose nearest preimage under `map` lies in `set` (sorted, grid `from`).
std::vector<PixelIndex> resample_set(std::span<const PixelIndex> set, GridDims from, GridDims to,
                                     const AffineTransform& map) {
  std::vector<PixelIndex> out;
  if (set.empty()) return out;
  double min_x = std::numeric_limits<double>::max(), min_y = min_x;
  double max_x = std::numeric_limits<double>::lowest(), max_y = max_x;
  int bx0 = from.width, by0 = from.height, bx1 = -1, by1 = -1;
  for (PixelIndex p : set) {
    bx0 = std::min(bx0, p % from.width);
    bx1 = std::max(bx1, p % from.width);
    by0 = std::min(by0, p / from.width);
    by1 = std::max(by1, p / from.width);
  }
  for (int cx : {bx0, bx1}) {
    for (int cy : {by0, by1}) {
      const Eigen::Vector2d q = map.apply(Eigen::Vector2d(cx, cy));
      min_x = std::min(min_x, q.x());
      max_x = std::max(max_x, q.x());
      min_y = std::min(min_y, q.y());
      max_y = std::max(max_y, q.y());
    }
  }
  const AffineTransform back = map.inverse();
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int x1 = std::min(to.width - 1, static_cast<int>(std::ceil(max_x)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int y1 = std::min(to.height - 1, static_cast<int>(std::ceil(max_y)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Eigen::Vector2d s = back.apply(Eigen::Vector2d(x, y));
      const int sx = static_cast<int>(std::lround(s.x()));
      const int sy = static_cast<int>(std::lround(s.y()));
      if (sx < 0 || sy < 0 || sx >= from.width || sy >= from.height) continue;
      if (std::binary_search(set.begin(), set.end(), sy * from.width + sx)) out.push_back(y * to.width + x);
    }
  }
  return out;
}

double jaccard_sorted(std::span<const PixelIndex> a, std::span<const PixelIndex> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::vector<PixelIndex> sorted_copy(std::span<const PixelIndex> s) {
  std::vector<PixelIndex> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double mapped_jaccard(const CorrespondenceMap& corr, std::span<const PixelIndex> in_first,
                      std::span<const PixelIndex> in_second) {
  const auto a = sorted_copy(in_first);
  const auto b = sorted_copy(in_second);
  const GridDims g1 = corr.dims(Modality::first);
  const GridDims g2 = corr.dims(Modality::second);
  const auto forward = resample_set(a, g1, g2, corr.transform());
  const auto backward = resample_set(b, g2, g1, corr.transform().inverse());
  return 0.5 * (jaccard_sorted(forward, b) + jaccard_sorted(a, backward));
}

bool splits_match(const CorrespondenceMap& corr, const SplitRecord& a, const SplitRecord& b) {
  if (a.modality == b.modality) return false;
  const SplitRecord& s1 = a.modality == Modality::first ? a : b;
  const SplitRecord& s2 = a.modality == Modality::first ? b : a;
  if (!corr.linked(s1.parent, s2.parent)) return false;
  const bool straight = mapped_jaccard(corr, s1.kept_pixels, s2.kept_pixels) >= 0.5 &&
                        mapped_jaccard(corr, s1.added_pixels, s2.added_pixels) >= 0.5;
  if (straight) return true;
  return mapped_jaccard(corr, s1.kept_pixels, s2.added_pixels) >= 0.5 &&
         mapped_jaccard(corr, s1.added_pixels, s2.kept_pixels) >= 0.5;
}

int inter_modal_energy(const CorrespondenceMap& corr) {
  std::vector<const SplitRecord*> first, second;
  for (const auto& r : corr.split_log()) (r.modality == Modality::first ? first : second).push_back(&r);
  if (first.empty() || second.empty()) return static_cast<int>(first.size() + second.size());

  std::vector<std::vector<std::size_t>> edges(first.size());
  for (std::size_t i = 0; i < first.size(); ++i)
    for (std::size_t j = 0; j < second.size(); ++j)
      if (splits_match(corr, *first[i], *second[j])) edges[i].push_back(j);

  // Kuhn's augmenting paths; matching size is independent of visiting order.
  std::vector<long> match_of_second(second.size(), -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j : edges[i]) {
      if (visited[j]) continue;
      visited[j] = 1;
      if (match_of_second[j] < 0 || augment(static_cast<std::size_t>(match_of_second[j]))) {
        match_of_second[j] = static_cast<long>(i);
        return true;
      }
    }
    return false;
  };
  int matched = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    visited.assign(second.size(), 0);
    if (augment(i)) ++matched;
  }
  return static_cast<int>(first.size() + second.size()) - 2 * matched;
}

RegionId split_region_in_place(Segmentation& seg, CorrespondenceMap& corr, Modality modality, RegionId region,
                               const Partition& psi) {
  const Region& parent = seg.region(region);
  if (psi.plus.empty() || psi.minus.empty()) throw InvalidPartition("both sides of a split must be non-empty");
  if (psi.plus.size() + psi.minus.size() != parent.size())
    throw InvalidPartition("split sides do not cover the region");
  const PixelIndex first_pixel = parent.pixels.front();
  const bool plus_keeps = std::find(psi.plus.begin(), psi.plus.end(), first_pixel) != psi.plus.end();
  const auto& moved = plus_keeps ? psi.minus : psi.plus;

  const RegionId child = seg.apply_split(region, moved);
  SplitRecord record;
  record.modality = modality;
  record.parent = region;
  record.kept = region;
  record.added = child;
  record.kept_pixels = seg.region(region).pixels;
  record.added_pixels = sorted_copy(moved);
  corr.record_split(std::move(record));
  return child;
}

std::pair<Segmentation, CorrespondenceMap> split_region(const Segmentation& seg, const CorrespondenceMap& corr,
                                                        Modality modality, RegionId region, const Partition& psi) {
  Segmentation s = seg;
  CorrespondenceMap c = corr;
  split_region_in_place(s, c, modality, region, psi);
  return {std::move(s), std::move(c)};
}

}  // namespace coreg
