#pragma once

#include "coreg/fields.hpp"
#include "coreg/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace coreg {

/// Hamilton product a * b, quaternions stored as (w, x, y, z).
Quat quat_multiply(const Quat& a, const Quat& b);

/// 4x4 matrix of q -> s * q.
Eigen::Matrix4d left_multiplication_matrix(const Quat& s);

/// Symmetry operators mapping an orientation quaternion to its equivalents.
///
/// When `antipodal` is set, q and -q denote the same orientation and every
/// operator is applied with both signs; the operator list is then closed
/// under composition up to sign. The cubic rotation group is of this kind,
/// since no 24-element set of quaternion matrices is closed exactly.
class SymmetryGroup {
 public:
  /// Identity only, no sign identification.
  static SymmetryGroup trivial();
  /// The 24 proper rotations of the cube, generated by closure from a
  /// 4-fold axis and a 3-fold axis. Antipodal.
  static SymmetryGroup cubic();
  /// Closure of the given generators under multiplication (modulo sign when antipodal).
  static SymmetryGroup generated(std::span<const Quat> generators, bool antipodal);

  std::size_t size() const { return operators_.size(); }
  bool antipodal() const { return antipodal_; }
  const std::vector<Eigen::Matrix4d>& operators() const { return operators_; }
  /// Operators applied to samples: the list itself, plus negatives when antipodal.
  const std::vector<Eigen::Matrix4d>& effective_operators() const { return effective_; }

  /// Identity present, every operator orthogonal, products closed (up to sign when antipodal), all within `tol`.
  bool verify(double tol = 1e-9) const;

 private:
  SymmetryGroup(std::vector<Eigen::Matrix4d> ops, bool antipodal);
  std::vector<Eigen::Matrix4d> operators_;
  std::vector<Eigen::Matrix4d> effective_;
  bool antipodal_ = false;
};

struct VmfParams {
  Quat mu = Quat(1, 0, 0, 0);
  double kappa = 0.0;
};

/// Largest concentration used anywhere; keeps constant regions finite.
inline constexpr double kDefaultKappaMax = 1e4;

/// log phi(x; mu, kappa) for the pure VMF on S^3.
double vmf_logpdf(const Quat& x, const Quat& mu, double kappa);

/// Log density of the symmetric VMF mixture (1/M) sum_m phi(x; Q_m mu, kappa),
/// evaluated with log-sum-exp over the effective operators.
double vmf_mixture_logpdf(const Quat& x, const VmfParams& params, const SymmetryGroup& group);

/// Mixture log-likelihood of a sample set.
double vmf_mixture_loglik(std::span<const Quat> samples, const VmfParams& params, const SymmetryGroup& group);

struct EmOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double kappa_max = kDefaultKappaMax;
  int random_restarts = 3;
};

struct EmResult {
  VmfParams params;
  std::vector<double> log_likelihood;  // one entry per iteration of the winning start, initial value first
  int iterations = 0;
};

/// EM for the symmetric VMF mixture with equal component weights. Starts from
/// the fundamental-zone resultant plus `random_restarts` deterministic
/// restarts and keeps the best likelihood. Throws EstimationError for fewer
/// than two samples or when no start has a non-zero resultant.
EmResult vmf_mixture_em_detailed(std::span<const Quat> samples, const SymmetryGroup& group, const EmOptions& options);

VmfParams vmf_mixture_em(std::span<const Quat> samples, const SymmetryGroup& group, double tol, int max_iter);

/// The symmetric copy e*x (e an effective operator) maximizing mu . (e*x).
Quat reduce_towards(const Quat& x, const Quat& mu, const SymmetryGroup& group);

/// Each sample replaced by its symmetric copy closest to mu.
std::vector<Quat> symmetry_reduce(std::span<const Quat> samples, const Quat& mu, const SymmetryGroup& group);

/// Single-VMF ML fit of already reduced samples: mean direction of the
/// resultant and capped concentration. Throws EstimationError on a zero resultant.
VmfParams vmf_fit(std::span<const Quat> samples, double kappa_max = kDefaultKappaMax);

/// Uniformly distributed unit quaternion.
Quat random_unit_quat(Rng& rng);

/// One draw from VMF(mu, kappa) on S^3 (Wood's rejection sampler).
Quat sample_vmf(const Quat& mu, double kappa, Rng& rng);

/// One draw from the symmetric mixture: a VMF draw moved by a uniformly chosen operator.
Quat sample_vmf_mixture(const VmfParams& params, const SymmetryGroup& group, Rng& rng);

}  // namespace coreg
