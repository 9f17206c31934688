#pragma once

#include "coreg/affine.hpp"
#include "coreg/segmentation.hpp"

#include <set>
#include <utility>
#include <vector>

namespace coreg {

enum class Modality : int { first = 1, second = 2 };

inline Modality other(Modality m) { return m == Modality::first ? Modality::second : Modality::first; }

/// One region split, with the children's pixel sets as they were when the split was made.
struct SplitRecord {
  Modality modality = Modality::first;
  RegionId parent = -1;
  RegionId kept = -1;   // child that keeps the parent id
  RegionId added = -1;  // newly created child
  std::vector<PixelIndex> kept_pixels;
  std::vector<PixelIndex> added_pixels;
};

struct GridDims {
  int width = 0;
  int height = 0;
};

/// Region lineage between the two modalities' segmentations.
///
/// `links` holds (id in modality 1, id in modality 2). A new child inherits
/// the links of the region it was split from, so links only ever grow.
class CorrespondenceMap {
 public:
  CorrespondenceMap() = default;
  CorrespondenceMap(GridDims first, GridDims second, AffineTransform first_to_second);

  /// Identity correspondence between one segmentation and a copy of itself.
  static CorrespondenceMap bijection(const Segmentation& seg);

  const std::set<std::pair<RegionId, RegionId>>& links() const { return links_; }
  const std::vector<SplitRecord>& split_log() const { return split_log_; }
  const AffineTransform& transform() const { return first_to_second_; }
  GridDims dims(Modality m) const { return m == Modality::first ? first_ : second_; }

  void link(RegionId in_first, RegionId in_second) { links_.insert({in_first, in_second}); }
  bool linked(RegionId in_first, RegionId in_second) const { return links_.count({in_first, in_second}) != 0; }

  /// Records a split and propagates the parent's links to the new child.
  void record_split(SplitRecord record);

  /// Same lineage with the two modalities' roles exchanged.
  CorrespondenceMap swapped() const;

  /// Throws LookupError when a linked id does not exist in its segmentation.
  void validate(const Segmentation& first, const Segmentation& second) const;

 private:
  GridDims first_;
  GridDims second_;
  AffineTransform first_to_second_;
  std::set<std::pair<RegionId, RegionId>> links_;
  std::vector<SplitRecord> split_log_;
};

/// Jaccard overlap of a modality-1 pixel set and a modality-2 pixel set,
/// averaged over resampling in both directions (nearest-pixel, no interpolation).
double mapped_jaccard(const CorrespondenceMap& corr, std::span<const PixelIndex> in_first,
                      std::span<const PixelIndex> in_second);

/// True when two split records (one per modality) describe the same split:
/// the parents are linked and each child pairs with one on the other side at
/// Jaccard >= 0.5.
bool splits_match(const CorrespondenceMap& corr, const SplitRecord& a, const SplitRecord& b);

/// Inter-modal energy D: number of recorded splits that have no matching
/// split of the corresponding parent in the other modality (maximum matching).
int inter_modal_energy(const CorrespondenceMap& corr);

/// split_region: splits `region` of `seg` along `psi` and records the split.
/// The side containing the region's lowest pixel index keeps the id.
std::pair<Segmentation, CorrespondenceMap> split_region(const Segmentation& seg, const CorrespondenceMap& corr,
                                                        Modality modality, RegionId region, const Partition& psi);

/// In-place variant; returns the new child's id.
RegionId split_region_in_place(Segmentation& seg, CorrespondenceMap& corr, Modality modality, RegionId region,
                               const Partition& psi);

}  // namespace coreg
