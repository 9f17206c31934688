#pragma once

#include "coreg/fields.hpp"

#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace coreg {

using RegionId = std::int32_t;
using PixelIndex = std::int32_t;

/// Undirected adjacency edge, stored with first < second.
using RegionEdge = std::pair<RegionId, RegionId>;

inline RegionEdge make_edge(RegionId a, RegionId b) { return a < b ? RegionEdge{a, b} : RegionEdge{b, a}; }

struct Region {
  RegionId id = -1;
  std::vector<PixelIndex> pixels;    // sorted
  std::vector<PixelIndex> boundary;  // sorted; pixels with at least one exposed edge
  std::int64_t boundary_length = 0;  // exposed pixel edges, image border included
  std::int64_t border_length = 0;    // the part of boundary_length on the image border
  std::uint64_t revision = 0;        // changes whenever the pixel set changes

  std::size_t size() const { return pixels.size(); }
  /// Boundary length with edges shared with another region counted half.
  /// Summed over a partition this counts every boundary edge once.
  double boundary_share() const { return 0.5 * static_cast<double>(boundary_length + border_length); }
};

struct RegionStats {
  std::size_t pixel_count = 0;
  double equivalent_radius = 0.0;
};

/// Two-part split of one region's pixels.
struct Partition {
  std::vector<PixelIndex> plus;
  std::vector<PixelIndex> minus;
};

/// Label raster plus derived region table and adjacency graph.
///
/// Region ids are dense in [0, region_count()). build_regions assigns them in
/// row-major order of each region's first pixel; later splits append new ids
/// so that ids referenced by a CorrespondenceMap stay valid.
class Segmentation {
 public:
  Segmentation() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return labels_.size(); }

  std::span<const RegionId> labels() const { return labels_; }
  RegionId label(PixelIndex p) const { return labels_[static_cast<std::size_t>(p)]; }
  LabelMap label_map() const;

  std::size_t region_count() const { return regions_.size(); }
  const std::vector<Region>& regions() const { return regions_; }
  /// Throws LookupError for an unknown id.
  const Region& region(RegionId id) const;
  bool contains(RegionId id) const { return id >= 0 && static_cast<std::size_t>(id) < regions_.size(); }

  const std::set<RegionEdge>& adjacency() const { return adjacency_; }
  bool adjacent(RegionId a, RegionId b) const { return adjacency_.count(make_edge(a, b)) != 0; }

  /// Sum of all regions' boundary lengths.
  std::int64_t total_boundary_length() const;

  /// Moves `moved` (a subset of `parent`) into a new region and returns its id.
  /// Only the two affected regions and their adjacency entries are recomputed.
  /// Both parts must be non-empty and 4-connected (checked).
  RegionId apply_split(RegionId parent, std::span<const PixelIndex> moved);

  /// Replaces the label raster while keeping region ids. Every existing id
  /// must still label a non-empty 4-connected pixel set and no new ids may
  /// appear. Revisions are kept for regions whose pixel set is unchanged.
  void assign_labels(std::vector<RegionId> labels);

  friend Segmentation build_regions(const LabelMap& raster);

 private:
  void rebuild_region_geometry(Region& r) const;
  void rebuild_all(bool keep_revisions, const std::vector<Region>* previous);

  int width_ = 0;
  int height_ = 0;
  std::vector<RegionId> labels_;
  std::vector<Region> regions_;
  std::set<RegionEdge> adjacency_;
};

/// Connected-component labelling (4-connectivity) of an arbitrary label raster.
/// Components of equal input label that are not 4-connected become separate
/// regions. Throws DimensionError on an empty raster.
Segmentation build_regions(const LabelMap& raster);

/// Row-major first-occurrence relabelling of a label raster.
std::vector<RegionId> canonical_labels(std::span<const RegionId> labels);

/// True when both segmentations induce the same partition of the grid, with
/// matching adjacency and boundary sets under the induced id correspondence.
bool same_partition(const Segmentation& a, const Segmentation& b);

/// Pixel count and equivalent radius sqrt(n / pi) of one region.
RegionStats region_statistics(const Segmentation& seg, RegionId id);

/// True when `pixels` (any order) forms a single 4-connected set on a grid of the given width.
bool is_four_connected(std::span<const PixelIndex> pixels, int width, int height);

/// Number of 4-adjacent pixel pairs with one pixel in each set.
std::int64_t shared_edge_count(std::span<const PixelIndex> a, std::span<const PixelIndex> b, int width, int height);

}  // namespace coreg
