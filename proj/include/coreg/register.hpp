#pragma once

#include "coreg/affine.hpp"
#include "coreg/config.hpp"
#include "coreg/correspondence.hpp"
#include "coreg/energy.hpp"
#include "coreg/fields.hpp"
#include "coreg/segmentation.hpp"
#include "coreg/split.hpp"

#include <vector>

namespace coreg {

/// Global pre-alignment of two foreground masks: centroids, principal axes and
/// per-axis second moments give the linear part; a +-3 px translation grid
/// search then maximizes mask overlap. Throws DataError on an empty mask.
AffineTransform estimate_affine(const BinaryMask& from, const BinaryMask& to);

/// Intersection-over-union of `to` and `from` resampled through `t`.
double mask_overlap(const BinaryMask& from, const BinaryMask& to, const AffineTransform& t);

struct MappedSegmentation {
  Segmentation seg;
  CorrespondenceMap corr;  // links source regions to mapped regions
};

/// Carries a segmentation onto another grid by inverse-mapping every target
/// pixel to its nearest source pixel (clamped to the source grid). Only labels
/// are resampled. Throws DomainError for a singular transform.
MappedSegmentation map_segmentation(const Segmentation& seg, const AffineTransform& t, int target_width,
                                    int target_height);

struct AlignStats {
  int sweeps = 0;
  std::size_t pixel_moves = 0;
  std::size_t run_moves = 0;
  bool reverted = false;
  std::vector<double> energy;  // J before the first sweep, then after every kept sweep
};

/// Discrete region competition. Each sweep relabels boundary pixels, one at a
/// time in raster order and then as straight runs along the four axis
/// directions, whenever the move lowers J at the current region parameters
/// (likelihood change plus epsilon times the boundary-length change). Moves
/// that would disconnect or empty a region, or create or remove a region
/// adjacency, are rejected. Parameters are refit after every sweep; a sweep
/// that raised J is undone and ends the descent.
AlignStats align_boundaries_in_place(Segmentation& seg, IntraModalEnergy& energy, int max_sweeps);

Segmentation align_boundaries(const Segmentation& seg, ImageRef image, const SymmetryGroup& group,
                              const ModelConfig& config, int max_sweeps, AlignStats* stats = nullptr);

struct EnergyRecord {
  int half_iteration = 0;  // 0 = initial state
  Modality updated = Modality::second;
  double j1 = 0.0;
  double j2 = 0.0;
  int d = 0;
  double u = 0.0;
};

using EnergyTrace = std::vector<EnergyRecord>;

struct SplitEvent {
  int half_iteration = 0;
  Modality modality = Modality::second;
  RegionId parent = -1;
  RegionId child = -1;
  double log_glr = 0.0;
  double size_ratio = 0.0;
  double threshold_eta = 0.0;
  double delta_u = 0.0;
};

struct TestSummary {
  std::size_t tested = 0;
  std::size_t keep = 0;
  std::size_t realign = 0;
  std::size_t split = 0;
  std::size_t applied = 0;
  std::size_t rejected_by_energy = 0;
};

struct PipelineResult {
  Segmentation s1;
  Segmentation s2;
  Segmentation s2_initial;
  CorrespondenceMap corr;
  EnergyTrace trace;
  std::vector<SplitEvent> splits;
  std::vector<TestSummary> tests;  // one per half-iteration
};

/// Alternating minimization of U = J1 + J2 + lambda D. S2 starts as S1
/// mapped through `transform`. Each half-iteration updates one modality
/// (S2 first): split tests over its regions in decreasing size order, then
/// boundary competition. A split the test accepts is applied only when it
/// does not increase U.
PipelineResult alternate_minimize(ImageRef i1, ImageRef i2, const Segmentation& s1_init,
                                  const AffineTransform& transform, const SymmetryGroup& group,
                                  const ModelConfig& config, int iters);

/// Split verdicts for every region of `seg` with at least two pixels, in
/// decreasing size order. Parallel over regions; results do not depend on the
/// thread count.
std::vector<std::pair<RegionId, SplitVerdict>> test_all_regions(const Segmentation& seg, ImageRef image,
                                                                const SymmetryGroup& group,
                                                                const ModelConfig& config, std::uint64_t stream_key);

/// Same as test_all_regions, one region after another.
std::vector<std::pair<RegionId, SplitVerdict>> test_all_regions_serial(const Segmentation& seg, ImageRef image,
                                                                       const SymmetryGroup& group,
                                                                       const ModelConfig& config,
                                                                       std::uint64_t stream_key);

}  // namespace coreg
