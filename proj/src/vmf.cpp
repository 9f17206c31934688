#include "coreg/vmf.hpp"

#include "coreg/bessel.hpp"
#include "coreg/error.hpp"
#include "coreg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coreg {

namespace {

constexpr int kDim = 4;
// Mixture terms more than this many nats below the largest are dropped.
constexpr double kNegligible = 40.0;

Quat canonical_sign(Quat q) {
  for (int i = 0; i < 4; ++i) {
    if (std::abs(q[i]) > 1e-12) {
      if (q[i] < 0) q = -q;
      break;
    }
  }
  return q;
}

}  // namespace

Quat quat_multiply(const Quat& a, const Quat& b) {
  return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Eigen::Matrix4d left_multiplication_matrix(const Quat& s) {
  Eigen::Matrix4d m;
  m << s[0], -s[1], -s[2], -s[3],
       s[1],  s[0], -s[3],  s[2],
       s[2],  s[3],  s[0], -s[1],
       s[3], -s[2],  s[1],  s[0];
  return m;
}

SymmetryGroup::SymmetryGroup(std::vector<Eigen::Matrix4d> ops, bool antipodal)
    : operators_(std::move(ops)), antipodal_(antipodal) {
  effective_ = operators_;
  if (antipodal_)
    for (const auto& q : operators_) effective_.push_back(-q);
}

SymmetryGroup SymmetryGroup::trivial() { return SymmetryGroup({Eigen::Matrix4d::Identity()}, false); }

SymmetryGroup SymmetryGroup::generated(std::span<const Quat> generators, bool antipodal) {
  std::vector<Quat> elements{Quat(1, 0, 0, 0)};
  auto known = [&](const Quat& q) {
    for (const auto& e : elements) {
      if ((e - q).norm() < 1e-9) return true;
      if (antipodal && (e + q).norm() < 1e-9) return true;
    }
    return false;
  };
  for (std::size_t i = 0; i < elements.size(); ++i) {
    for (const auto& g : generators) {
      Quat next = quat_multiply(g, elements[i]);
      next.normalize();
      if (antipodal) next = canonical_sign(next);
      if (!known(next)) elements.push_back(next);
      if (elements.size() > 4096) throw DomainError("symmetry generators do not close to a finite group");
    }
  }
  std::vector<Eigen::Matrix4d> ops;
  ops.reserve(elements.size());
  for (const auto& e : elements) ops.push_back(left_multiplication_matrix(e));
  return SymmetryGroup(std::move(ops), antipodal);
}

SymmetryGroup SymmetryGroup::cubic() {
  const double h = std::sqrt(0.5);
  const Quat four_fold_z(h, 0, 0, h);
  const Quat three_fold_111(0.5, 0.5, 0.5, 0.5);
  const Quat generators[] = {four_fold_z, three_fold_111};
  return generated(generators, true);
}

bool SymmetryGroup::verify(double tol) const {
  bool has_identity = false;
  for (const auto& q : operators_) {
    if ((q - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <= tol) has_identity = true;
    if ((q.transpose() * q - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  }
  if (!has_identity) return false;
  for (const auto& a : operators_) {
    for (const auto& b : operators_) {
      const Eigen::Matrix4d prod = a * b;
      bool found = false;
      for (const auto& c : operators_) {
        if ((prod - c).cwiseAbs().maxCoeff() <= tol || (antipodal_ && (prod + c).cwiseAbs().maxCoeff() <= tol)) {
          found = true;
          break;
        }
      }
      if (!found) return false;
    }
  }
  return true;
}

double vmf_logpdf(const Quat& x, const Quat& mu, double kappa) { return log_cp(kappa, kDim) + kappa * mu.dot(x); }

double vmf_mixture_logpdf(const Quat& x, const VmfParams& params, const SymmetryGroup& group) {
  const auto& ops = group.effective_operators();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents(ops.size());
  for (std::size_t e = 0; e < ops.size(); ++e) {
    exponents[e] = params.kappa * (ops[e] * params.mu).dot(x);
    best = std::max(best, exponents[e]);
  }
  double sum = 0.0;
  for (double v : exponents) sum += std::exp(v - best);
  return log_cp(params.kappa, kDim) + best + std::log(sum) - std::log(static_cast<double>(ops.size()));
}

double vmf_mixture_loglik(std::span<const Quat> samples, const VmfParams& params, const SymmetryGroup& group) {
  double total = 0.0;
  for (const auto& x : samples) total += vmf_mixture_logpdf(x, params, group);
  return total;
}

Quat reduce_towards(const Quat& x, const Quat& mu, const SymmetryGroup& group) {
  const auto& ops = group.effective_operators();
  std::size_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < ops.size(); ++e) {
    // mu . (E x) = (E^T mu) . x
    const double d = (ops[e].transpose() * mu).dot(x);
    if (d > best_dot) {
      best_dot = d;
      best = e;
    }
  }
  return ops[best] * x;
}

std::vector<Quat> symmetry_reduce(std::span<const Quat> samples, const Quat& mu, const SymmetryGroup& group) {
  std::vector<Quat> out;
  out.reserve(samples.size());
  for (const auto& x : samples) out.push_back(reduce_towards(x, mu, group));
  return out;
}

VmfParams vmf_fit(std::span<const Quat> samples, double kappa_max) {
  Quat r = Quat::Zero();
  for (const auto& x : samples) r += x;
  const double norm = r.norm();
  if (samples.empty() || norm < 1e-12 * static_cast<double>(samples.size()))
    throw EstimationError("zero resultant: mean direction undefined");
  VmfParams p;
  p.mu = r / norm;
  p.kappa = concentration_mle(norm / static_cast<double>(samples.size()), kDim, kappa_max);
  return p;
}

namespace {

struct EStep {
  double log_likelihood = 0.0;
  Quat resultant = Quat::Zero();  // sum_i sum_e r_ie E_e^T x_i
};

EStep expectation(std::span<const Quat> samples, const VmfParams& params, const SymmetryGroup& group) {
  const auto& ops = group.effective_operators();
  const std::size_t m = ops.size();
  std::vector<Quat> rotated_means(m);
  for (std::size_t e = 0; e < m; ++e) rotated_means[e] = ops[e] * params.mu;
  std::vector<Quat> weighted(m, Quat::Zero());
  std::vector<double> exponents(m);
  EStep out;
  const double log_norm = log_cp(params.kappa, kDim) - std::log(static_cast<double>(m));
  for (const auto& x : samples) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < m; ++e) {
      exponents[e] = params.kappa * rotated_means[e].dot(x);
      best = std::max(best, exponents[e]);
    }
    double sum = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const double shifted = exponents[e] - best;
      exponents[e] = shifted < -kNegligible ? 0.0 : std::exp(shifted);
      sum += exponents[e];
    }
    out.log_likelihood += log_norm + best + std::log(sum);
    for (std::size_t e = 0; e < m; ++e)
      if (exponents[e] != 0.0) weighted[e] += (exponents[e] / sum) * x;
  }
  for (std::size_t e = 0; e < m; ++e) out.resultant += ops[e].transpose() * weighted[e];
  return out;
}

// Reduce every sample towards `reference`, fit a single VMF; nullopt when the resultant vanishes.
bool hard_start(std::span<const Quat> samples, const Quat& reference, const SymmetryGroup& group,
                double kappa_max, VmfParams& out) {
  Quat r = Quat::Zero();
  for (const auto& x : samples) r += reduce_towards(x, reference, group);
  const double norm = r.norm();
  if (norm < 1e-9 * static_cast<double>(samples.size())) return false;
  out.mu = r / norm;
  out.kappa = concentration_mle(norm / static_cast<double>(samples.size()), kDim, kappa_max);
  return true;
}

EmResult run_em(std::span<const Quat> samples, const SymmetryGroup& group, VmfParams params, const EmOptions& options) {
  EmResult result;
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0;; ++iter) {
    const EStep step = expectation(samples, params, group);
    result.log_likelihood.push_back(step.log_likelihood);
    if (iter > 0 && step.log_likelihood - previous < options.tol) break;
    if (iter >= options.max_iter) break;
    previous = step.log_likelihood;
    const double norm = step.resultant.norm();
    if (norm < 1e-12) break;
    params.mu = step.resultant / norm;
    params.kappa = concentration_mle(norm / static_cast<double>(samples.size()), kDim, options.kappa_max);
    result.iterations = iter + 1;
  }
  // Last likelihood entry belongs to these parameters.
  result.params = params;
  return result;
}

}  // namespace

EmResult vmf_mixture_em_detailed(std::span<const Quat> samples, const SymmetryGroup& group, const EmOptions& options) {
  if (samples.size() < 2) throw EstimationError("EM needs at least two samples");
  std::vector<Quat> references{Quat(1, 0, 0, 0)};
  Rng rng = Rng::stream(0x5eedULL, {static_cast<std::uint64_t>(samples.size())});
  for (int r = 0; r < options.random_restarts; ++r)
    references.push_back(samples[rng.uniform_index(samples.size())]);

  bool have = false;
  EmResult best;
  for (const auto& ref : references) {
    VmfParams start;
    if (!hard_start(samples, ref, group, options.kappa_max, start)) continue;
    EmResult candidate = run_em(samples, group, start, options);
    if (!have || candidate.log_likelihood.back() > best.log_likelihood.back()) {
      best = std::move(candidate);
      have = true;
    }
  }
  if (!have) throw EstimationError("degenerate samples: every start has a zero resultant");
  return best;
}

VmfParams vmf_mixture_em(std::span<const Quat> samples, const SymmetryGroup& group, double tol, int max_iter) {
  EmOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return vmf_mixture_em_detailed(samples, group, options).params;
}

Quat random_unit_quat(Rng& rng) {
  for (;;) {
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const double n = q.norm();
    if (n > 1e-12) return q / n;
  }
}

Quat sample_vmf(const Quat& mu, double kappa, Rng& rng) {
  if (kappa < 0.0) throw DomainError("negative concentration");
  if (kappa == 0.0) return random_unit_quat(rng);
  constexpr double m = kDim - 1;
  const double b = m / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m * m));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m * std::log(1.0 - x0 * x0);
  double w = 0.0;
  for (;;) {
    // Beta(3/2, 3/2) as a ratio of chi-square(3) variates.
    double g1 = 0.0, g2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double a = rng.normal(), e = rng.normal();
      g1 += a * a;
      g2 += e * e;
    }
    const double z = g1 / (g1 + g2);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform();
    if (u > 0.0 && kappa * w + m * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }
  Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
  v.normalize();
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  Quat x(w, s * v.x(), s * v.y(), s * v.z());

  // Householder reflection taking e1 to mu.
  Quat u = Quat(1, 0, 0, 0) - mu;
  const double un = u.squaredNorm();
  if (un > 1e-24) x -= (2.0 * u.dot(x) / un) * u;
  return x.normalized();
}

Quat sample_vmf_mixture(const VmfParams& params, const SymmetryGroup& group, Rng& rng) {
  const Quat x = sample_vmf(params.mu, params.kappa, rng);
  const auto& ops = group.operators();
  return (ops[rng.uniform_index(ops.size())] * x).normalized();
}

}  // namespace coreg
