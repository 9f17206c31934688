#pragma once

namespace coreg {

/// log I_nu(x) for nu >= 0, x >= 0. Power series below x = 25, large-argument
/// asymptotic expansion above; both evaluated in the log domain so x up to
/// 1e4 and beyond does not overflow. Returns -inf for x = 0, nu > 0.
double log_bessel_i(double nu, double x);

/// A_p(kappa) = I_{p/2}(kappa) / I_{p/2-1}(kappa), the mean resultant length of a VMF on S^{p-1}.
double mean_resultant_length(double kappa, int p);

/// d/dkappa of A_p.
double mean_resultant_length_derivative(double kappa, int p);

/// log c_p(kappa), the VMF normalizer kappa^{p/2-1} / ((2 pi)^{p/2} I_{p/2-1}(kappa)).
/// kappa = 0 returns the uniform-density limit. Throws DomainError for kappa < 0.
double log_cp(double kappa, int p);

/// Inverse of A_p: the kappa with |A_p(kappa) - rbar| <= 1e-8. Banerjee initial
/// guess refined by safeguarded Newton steps. Throws DomainError unless 0 <= rbar < 1.
double ap_inv(double rbar, int p);

/// ML concentration for mean resultant length `rbar`, clamped to [0, kappa_max].
/// rbar >= A_p(kappa_max) (including rbar >= 1) returns kappa_max.
double concentration_mle(double rbar, int p, double kappa_max);

}  // namespace coreg
