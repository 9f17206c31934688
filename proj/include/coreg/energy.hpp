#pragma once

#include "coreg/config.hpp"
#include "coreg/fields.hpp"
#include "coreg/segmentation.hpp"
#include "coreg/vmf.hpp"

#include <span>
#include <variant>
#include <vector>

namespace coreg {

struct GaussianParams {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// Sample mean and biased (divide-by-n) variance. Throws EstimationError on empty input.
GaussianParams gaussian_mle(std::span<const double> values);

/// -log N(v; mu, max(sigma2, floor)).
double gaussian_nll(double v, const GaussianParams& params, double variance_floor);

/// Non-owning view of either modality's pixel data.
class ImageRef {
 public:
  ImageRef(const ScalarField& f) : field_(&f) {}  // NOLINT(google-explicit-constructor)
  ImageRef(const QuatField& f) : field_(&f) {}    // NOLINT(google-explicit-constructor)

  bool is_scalar() const { return std::holds_alternative<const ScalarField*>(field_); }
  const ScalarField& scalar() const { return *std::get<const ScalarField*>(field_); }
  const QuatField& quat() const { return *std::get<const QuatField*>(field_); }
  int width() const { return is_scalar() ? scalar().width : quat().width; }
  int height() const { return is_scalar() ? scalar().height : quat().height; }

 private:
  std::variant<const ScalarField*, const QuatField*> field_;
};

/// ML model of one region's pixel values and its negative log-likelihood.
///
/// Scalar regions: Gaussian with floored variance. Orientation regions: the
/// mixture-EM mean direction, refined by alternating symmetry reduction and
/// single-VMF refits; the likelihood is the single VMF of the reduced samples.
struct RegionModel {
  bool scalar = true;
  GaussianParams gaussian;  // sigma2 already floored
  VmfParams vmf;
  double log_cp = 0.0;         // cached log c_4(kappa)
  std::vector<Quat> orbit;     // E^T mu for every effective operator E
  double nll = 0.0;
  std::size_t count = 0;
};

RegionModel fit_region_model(ImageRef image, std::span<const PixelIndex> pixels, const ModelConfig& config,
                             const SymmetryGroup& group);

/// -log f of one pixel under a fitted region model.
double pixel_nll(const RegionModel& model, ImageRef image, PixelIndex p, const SymmetryGroup& group);

/// Intra-modal energy J(S, I) = sum_j [ NLL_j + epsilon * boundary_share_j ]
/// (every boundary edge of the partition paid once, image border included),
/// with per-region fits cached by region revision.
class IntraModalEnergy {
 public:
  IntraModalEnergy(ImageRef image, ModelConfig config, SymmetryGroup group);

  /// Refits stale regions (in parallel) and returns J.
  double total(const Segmentation& seg);
  /// nll + epsilon * boundary_share for one region.
  double region_term(const Segmentation& seg, RegionId id);
  const RegionModel& model(const Segmentation& seg, RegionId id);
  /// Brings every region's cached fit up to date.
  void refresh(const Segmentation& seg);

  ImageRef image() const { return image_; }
  const ModelConfig& config() const { return config_; }
  const SymmetryGroup& group() const { return group_; }

 private:
  struct Entry {
    std::uint64_t revision = 0;
    RegionModel model;
  };
  void check_dims(const Segmentation& seg) const;

  ImageRef image_;
  ModelConfig config_;
  SymmetryGroup group_;
  std::vector<Entry> cache_;
};

/// J(S, I) computed from scratch, one region after another. Reference for IntraModalEnergy.
double intra_modal_energy(const Segmentation& seg, ImageRef image, const ModelConfig& config,
                          const SymmetryGroup& group);

}  // namespace coreg
