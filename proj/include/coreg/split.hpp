#pragma once

#include "coreg/config.hpp"
#include "coreg/energy.hpp"
#include "coreg/rng.hpp"
#include "coreg/segmentation.hpp"
#include "coreg/vmf.hpp"

#include <span>
#include <vector>

namespace coreg {

// ---------------------------------------------------------------------------
// Multi-modality test statistics (equal variance / equal concentration).

/// log GLR for a mean shift between two Gaussian samples:
/// (n/2) log( s0^2 / ((n+/n) s+^2 + (n-/n) s-^2) ), ML variances floored.
/// Throws DomainError if either side is empty.
double glr_gaussian(std::span<const double> plus, std::span<const double> minus,
                    double variance_floor = 1e-6);

/// log GLR for a mean-direction change between two VMF samples on S^3:
/// n log c(k1) - n log c(k0) + k1 (|r+| + |r-|) - k0 |r0|.
/// Samples must already be symmetry reduced.
double glr_vmf(std::span<const Quat> plus, std::span<const Quat> minus, double kappa_max = kDefaultKappaMax);

// ---------------------------------------------------------------------------
// Boundary search by two-seed region growing.

enum class SplitModel { gaussian, vmf };

/// Values of one region's pixels, aligned with the pixel list.
struct RegionSamples {
  std::span<const PixelIndex> pixels;  // sorted
  int width = 0;
  int height = 0;
  std::span<const double> scalars;  // gaussian model
  std::span<const Quat> quats;      // vmf model, symmetry reduced
};

/// Sum of squared deviations from each side's mean (Gaussian boundary objective, minimized).
double gaussian_split_objective(std::span<const double> plus, std::span<const double> minus);
/// |sum plus| + |sum minus| (VMF boundary objective, maximized).
double vmf_split_objective(std::span<const Quat> plus, std::span<const Quat> minus);

/// Grows a partition from the seed pair. Each step assigns the frontier pixel
/// whose addition changes the objective least (Gaussian) or most (VMF); both
/// sides stay 4-connected. Ties go to the lowest pixel index, then to the
/// first side. Returns local indices of the `plus` side.
std::vector<std::uint8_t> grow_from_seeds(const RegionSamples& region, SplitModel model, std::size_t seed_plus,
                                          std::size_t seed_minus);

/// Best partition over `restarts` seed pairs: the most dissimilar pair plus
/// random far-apart pairs. Throws NoSplitError for a region of fewer than 2 pixels.
Partition region_growing_psi(const RegionSamples& region, SplitModel model, int restarts, Rng& rng);

// ---------------------------------------------------------------------------
// Misalignment test.

/// Fraction of a radius-r disc not covered by a copy displaced by d:
/// 1 - (2/pi) acos(d/2r) + d/(pi r^2) sqrt(r^2 - d^2/4). Domain 0 <= d <= 2r.
double f_r(double d, double r);
/// Inverse of f_r by bisection to 1e-10. Domain 0 <= t <= 1.
double f_r_inv(double t, double r);

struct DisplacementModel {
  double sigma_d = 3.0;
};

/// Rayleigh(sigma) upper-tail inverse: sigma sqrt(2 ln(1/alpha)).
double rayleigh_tail_inverse(double alpha, double sigma);

/// eta = f_r(min(Q^{-1}(alpha), 2r)).
double misalignment_threshold(double r, const DisplacementModel& model, double alpha);

// ---------------------------------------------------------------------------

enum class SplitDecision { keep, realign, split };

const char* to_string(SplitDecision d);

struct SplitVerdict {
  double log_glr = 0.0;
  double glr_threshold = 0.0;  // lambda, plus the boundary penalty when enabled
  Partition psi;
  double size_ratio = 0.0;     // min(|R+|, |R-|) / |R|
  double threshold_eta = 0.0;
  std::int64_t psi_edges = 0;  // 4-adjacent pixel pairs across psi
  SplitDecision decision = SplitDecision::keep;
};

/// Two-stage test on one region: GLR multi-modality test against lambda,
/// then the size-ratio misalignment test against the adaptive threshold.
/// Orientation samples are reduced around the region's mixture-EM mean first.
SplitVerdict test_region_split(const Segmentation& seg, RegionId region, ImageRef image, const SymmetryGroup& group,
                               const ModelConfig& config, Rng& rng);

}  // namespace coreg
