#pragma once

#include "coreg/fields.hpp"
#include "coreg/rng.hpp"
#include "coreg/segmentation.hpp"
#include "coreg/vmf.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace coreg {

/// Synthetic microstructure instance parameters. The value ranges are
/// generator defaults, not measured material properties.
struct SynthConfig {
  int width = 256;
  int height = 256;
  int n_grains = 100;
  double displaced_fraction = 0.2;
  double sigma_d = 3.0;
  int merge_pairs = 3;
  /// Merged pairs must differ in scalar mean by at least this many standard
  /// deviations (the larger of the two grains'). 0 disables the filter.
  double min_merge_separation = 4.0;
  double mean_lo = 0.0, mean_hi = 255.0;
  double sigma_lo = 2.0, sigma_hi = 10.0;  // scalar noise standard deviation
  double kappa_lo = 20.0, kappa_hi = 100.0;
  int lloyd_steps = 2;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid values.
  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& config);

/// Lloyd-relaxed Voronoi tessellation of n_grains uniformly placed seeds.
Segmentation generate_ground_truth(const SynthConfig& config, Rng& rng);

/// Generating parameters of one ground-truth grain.
struct GrainParams {
  double mean = 0.0;
  double sigma2 = 0.0;
  VmfParams orientation;
};

struct SampledImages {
  ScalarField scalar;
  QuatField quat;
  std::vector<GrainParams> grains;  // indexed by ground-truth region id
};

/// Uniform draws from the configured mean, noise and concentration ranges;
/// orientation means uniform on S^3. One keyed stream per grain.
std::vector<GrainParams> draw_grain_params(std::size_t n_grains, const SynthConfig& config, Rng& rng);

/// i.i.d. N(mean, sigma2) pixels; `grain_labels` holds indices into `grains`.
ScalarField sample_scalar(const LabelMap& grain_labels, const std::vector<GrainParams>& grains, Rng& rng);

/// i.i.d. symmetric-VMF pixels; `grain_labels` holds indices into `grains`.
QuatField sample_quat(const LabelMap& grain_labels, const std::vector<GrainParams>& grains,
                      const SymmetryGroup& group, Rng& rng);

/// Both modalities on the ground-truth geometry.
SampledImages sample_images(const Segmentation& truth, const SynthConfig& config, const SymmetryGroup& group,
                            Rng& rng);

struct PlantedBoundary {
  RegionId a = -1;  // ground-truth grains whose shared boundary was removed
  RegionId b = -1;
  std::vector<PixelIndex> pixels;  // pixels of either grain with a 4-neighbour in the other
};

struct Displacement {
  RegionId grain = -1;  // ground-truth id (the kept id of a merged pair)
  int dx = 0;
  int dy = 0;
};

struct Corruption {
  LabelMap grain_labels;  // ground-truth grain ids after displacement, before merging
  Segmentation seg;       // displaced and merged
  std::vector<PlantedBoundary> planted;
  std::vector<Displacement> displaced;
};

/// Initial segmentation for registration: merge_pairs adjacent grain pairs
/// are chosen (longest shared boundary first), then displaced_fraction of
/// the segments (a merged pair moves as one) are translated by rounded
/// N(0, sigma_d^2 I) offsets; vacated pixels take the label of the nearest
/// painted pixel. `grains` enables the merge separation filter.
Corruption corrupt_segmentation(const Segmentation& truth, const SynthConfig& config, Rng& rng,
                                const std::vector<GrainParams>* grains = nullptr);

struct SynthInstance {
  Segmentation truth;
  SampledImages images;
  Corruption corruption;
};

/// Full instance from config.seed; each stage draws from its own stream.
/// The scalar image follows the ground truth and the orientation image
/// follows the displaced grains, so the corrupted segmentation fits the
/// orientation image apart from its merges and is misaligned with the
/// scalar image.
SynthInstance generate_instance(const SynthConfig& config, const SymmetryGroup& group);

/// Ground-truth record: per-grain parameters, displacements, planted boundaries.
nlohmann::json sidecar_json(const SynthInstance& instance, const SynthConfig& config);

}  // namespace coreg
