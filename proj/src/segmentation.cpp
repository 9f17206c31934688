#include "coreg/segmentation.hpp"

#include "coreg/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace coreg {

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// Process-wide so that a revision identifies one pixel set across copies of a segmentation.
std::atomic<std::uint64_t> g_next_revision{1};

std::uint64_t fresh_revision() { return g_next_revision.fetch_add(1, std::memory_order_relaxed); }

}  // namespace

LabelMap Segmentation::label_map() const {
  LabelMap out(width_, height_);
  std::copy(labels_.begin(), labels_.end(), out.labels.begin());
  return out;
}

const Region& Segmentation::region(RegionId id) const {
  if (!contains(id)) throw LookupError("unknown region id " + std::to_string(id));
  return regions_[static_cast<std::size_t>(id)];
}

std::int64_t Segmentation::total_boundary_length() const {
  std::int64_t total = 0;
  for (const auto& r : regions_) total += r.boundary_length;
  return total;
}

void Segmentation::rebuild_region_geometry(Region& r) const {
  r.boundary.clear();
  r.boundary_length = 0;
  r.border_length = 0;
  for (PixelIndex p : r.pixels) {
    const int x = p % width_;
    const int y = p / width_;
    int exposed = 0;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= width_ || ny >= height_) {
        ++exposed;
        ++r.border_length;
      } else if (labels_[static_cast<std::size_t>(ny) * width_ + nx] != r.id) {
        ++exposed;
      }
    }
    if (exposed > 0) r.boundary.push_back(p);
    r.boundary_length += exposed;
  }
}

void Segmentation::rebuild_all(bool keep_revisions, const std::vector<Region>* previous) {
  const std::size_t n_regions = regions_.size();
  std::vector<std::vector<PixelIndex>> pixels(n_regions);
  for (std::size_t i = 0; i < labels_.size(); ++i) pixels[static_cast<std::size_t>(labels_[i])].push_back(static_cast<PixelIndex>(i));
  adjacency_.clear();
  for (std::size_t id = 0; id < n_regions; ++id) {
    Region& r = regions_[id];
    r.id = static_cast<RegionId>(id);
    r.pixels = std::move(pixels[id]);
    const bool same = keep_revisions && previous != nullptr && id < previous->size() &&
                      (*previous)[id].pixels == r.pixels;
    r.revision = same ? (*previous)[id].revision : fresh_revision();
    rebuild_region_geometry(r);
  }
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const RegionId a = labels_[static_cast<std::size_t>(y) * width_ + x];
      if (x + 1 < width_) {
        const RegionId b = labels_[static_cast<std::size_t>(y) * width_ + x + 1];
        if (a != b) adjacency_.insert(make_edge(a, b));
      }
      if (y + 1 < height_) {
        const RegionId b = labels_[static_cast<std::size_t>(y + 1) * width_ + x];
        if (a != b) adjacency_.insert(make_edge(a, b));
      }
    }
  }
}

Segmentation build_regions(const LabelMap& raster) {
  if (raster.width <= 0 || raster.height <= 0 || raster.labels.empty())
    throw DimensionError("label raster is empty");
  if (raster.labels.size() != static_cast<std::size_t>(raster.width) * raster.height)
    throw DimensionError("label raster size does not match width*height");

  Segmentation seg;
  seg.width_ = raster.width;
  seg.height_ = raster.height;
  seg.labels_.assign(raster.labels.size(), -1);

  // Flood fill in row-major seed order gives ids by first-pixel order.
  std::vector<PixelIndex> stack;
  RegionId next_id = 0;
  for (std::size_t start = 0; start < raster.labels.size(); ++start) {
    if (seg.labels_[start] != -1) continue;
    const std::int32_t source = raster.labels[start];
    seg.labels_[start] = next_id;
    stack.assign(1, static_cast<PixelIndex>(start));
    while (!stack.empty()) {
      const PixelIndex p = stack.back();
      stack.pop_back();
      const int x = p % raster.width;
      const int y = p / raster.width;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        if (nx < 0 || ny < 0 || nx >= raster.width || ny >= raster.height) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * raster.width + nx;
        if (seg.labels_[q] == -1 && raster.labels[q] == source) {
          seg.labels_[q] = next_id;
          stack.push_back(static_cast<PixelIndex>(q));
        }
      }
    }
    ++next_id;
  }
  seg.regions_.resize(static_cast<std::size_t>(next_id));
  seg.rebuild_all(false, nullptr);
  return seg;
}

RegionId Segmentation::apply_split(RegionId parent, std::span<const PixelIndex> moved) {
  Region& source = regions_.at(static_cast<std::size_t>(region(parent).id));
  std::vector<PixelIndex> moved_sorted(moved.begin(), moved.end());
  std::sort(moved_sorted.begin(), moved_sorted.end());
  moved_sorted.erase(std::unique(moved_sorted.begin(), moved_sorted.end()), moved_sorted.end());
  if (moved_sorted.empty() || moved_sorted.size() >= source.pixels.size())
    throw InvalidPartition("split must leave both parts non-empty");

  std::vector<PixelIndex> kept;
  kept.reserve(source.pixels.size() - moved_sorted.size());
  std::set_difference(source.pixels.begin(), source.pixels.end(), moved_sorted.begin(), moved_sorted.end(),
                      std::back_inserter(kept));
  if (kept.size() + moved_sorted.size() != source.pixels.size())
    throw InvalidPartition("split pixels are not a subset of the region");
  if (!is_four_connected(kept, width_, height_) || !is_four_connected(moved_sorted, width_, height_))
    throw InvalidPartition("both sides of a split must be 4-connected");

  const auto child = static_cast<RegionId>(regions_.size());
  for (PixelIndex p : moved_sorted) labels_[static_cast<std::size_t>(p)] = child;

  Region fresh;
  fresh.id = child;
  fresh.pixels = std::move(moved_sorted);
  fresh.revision = fresh_revision();
  regions_.push_back(std::move(fresh));

  Region& kept_region = regions_[static_cast<std::size_t>(parent)];
  kept_region.pixels = std::move(kept);
  kept_region.revision = fresh_revision();
  rebuild_region_geometry(kept_region);
  rebuild_region_geometry(regions_.back());

  for (auto it = adjacency_.begin(); it != adjacency_.end();) {
    if (it->first == parent || it->second == parent)
      it = adjacency_.erase(it);
    else
      ++it;
  }
  for (RegionId id : {parent, child}) {
    for (PixelIndex p : regions_[static_cast<std::size_t>(id)].boundary) {
      const int x = p % width_;
      const int y = p / width_;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        if (nx < 0 || ny < 0 || nx >= width_ || ny >= height_) continue;
        const RegionId other = labels_[static_cast<std::size_t>(ny) * width_ + nx];
        if (other != id) adjacency_.insert(make_edge(id, other));
      }
    }
  }
  return child;
}

void Segmentation::assign_labels(std::vector<RegionId> labels) {
  if (labels.size() != labels_.size()) throw DimensionError("label raster size changed");
  std::vector<std::size_t> counts(regions_.size(), 0);
  for (RegionId l : labels) {
    if (!contains(l)) throw InvalidPartition("new label raster introduces unknown id " + std::to_string(l));
    ++counts[static_cast<std::size_t>(l)];
  }
  for (std::size_t id = 0; id < counts.size(); ++id)
    if (counts[id] == 0) throw InvalidPartition("region " + std::to_string(id) + " would become empty");
  const std::vector<Region> previous = regions_;
  labels_ = std::move(labels);
  rebuild_all(true, &previous);
  for (const auto& r : regions_) {
    const bool unchanged = r.id < static_cast<RegionId>(previous.size()) &&
                           previous[static_cast<std::size_t>(r.id)].revision == r.revision;
    if (!unchanged && !is_four_connected(r.pixels, width_, height_))
      throw InvalidPartition("region " + std::to_string(r.id) + " is not 4-connected");
  }
}

std::vector<RegionId> canonical_labels(std::span<const RegionId> labels) {
  std::unordered_map<RegionId, RegionId> remap;
  std::vector<RegionId> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<RegionId>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

bool same_partition(const Segmentation& a, const Segmentation& b) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  if (a.region_count() != b.region_count()) return false;
  if (canonical_labels(a.labels()) != canonical_labels(b.labels())) return false;
  // Induced correspondence a-id -> b-id.
  std::vector<RegionId> to_b(a.region_count(), -1);
  for (std::size_t i = 0; i < a.pixel_count(); ++i) to_b[static_cast<std::size_t>(a.labels()[i])] = b.labels()[i];
  std::set<RegionEdge> mapped;
  for (const auto& [x, y] : a.adjacency()) mapped.insert(make_edge(to_b[static_cast<std::size_t>(x)], to_b[static_cast<std::size_t>(y)]));
  if (mapped != b.adjacency()) return false;
  for (const auto& r : a.regions()) {
    const Region& other = b.region(to_b[static_cast<std::size_t>(r.id)]);
    if (r.pixels != other.pixels || r.boundary != other.boundary || r.boundary_length != other.boundary_length ||
        r.border_length != other.border_length)
      return false;
  }
  return true;
}

RegionStats region_statistics(const Segmentation& seg, RegionId id) {
  const Region& r = seg.region(id);
  RegionStats s;
  s.pixel_count = r.size();
  s.equivalent_radius = std::sqrt(static_cast<double>(s.pixel_count) / std::numbers::pi);
  return s;
}

bool is_four_connected(std::span<const PixelIndex> pixels, int width, int height) {
  if (pixels.empty()) return false;
  std::vector<PixelIndex> sorted(pixels.begin(), pixels.end());
  std::sort(sorted.begin(), sorted.end());
  auto find = [&](PixelIndex p) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), p);
    return (it != sorted.end() && *it == p) ? static_cast<std::ptrdiff_t>(it - sorted.begin()) : -1;
  };
  std::vector<std::uint8_t> seen(sorted.size(), 0);
  std::vector<std::ptrdiff_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const PixelIndex p = sorted[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    const int x = p % width;
    const int y = p / width;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const auto j = find(ny * width + nx);
      if (j >= 0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  return reached == sorted.size();
}

std::int64_t shared_edge_count(std::span<const PixelIndex> a, std::span<const PixelIndex> b, int width, int height) {
  std::vector<PixelIndex> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  std::int64_t count = 0;
  for (PixelIndex p : a) {
    const int x = p % width;
    const int y = p / width;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      if (std::binary_search(sb.begin(), sb.end(), ny * width + nx)) ++count;
    }
  }
  return count;
}

}  // namespace coreg
