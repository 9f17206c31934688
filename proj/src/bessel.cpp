#include "coreg/bessel.hpp"

#include "coreg/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace coreg {

namespace {

constexpr double kSeriesLimit = 25.0;

double log_bessel_series(double nu, double x) {
  // sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)), factored as t0 * (1 + r1 + r1 r2 + ...)
  const double log_t0 = nu * std::log(0.5 * x) - std::lgamma(nu + 1.0);
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (k * (k + nu));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return log_t0 + std::log(sum);
}

double log_bessel_asymptotic(double nu, double x) {
  // I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double previous = std::numeric_limits<double>::max();
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(term) >= previous) break;  // series starts diverging
    sum += term;
    previous = std::abs(term);
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

}  // namespace

double log_bessel_i(double nu, double x) {
  if (x < 0.0 || nu < 0.0) throw DomainError("log_bessel_i requires nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return x < kSeriesLimit ? log_bessel_series(nu, x) : log_bessel_asymptotic(nu, x);
}

double mean_resultant_length(double kappa, int p) {
  if (kappa < 0.0) throw DomainError("concentration must be non-negative");
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * p - 1.0;
  return std::exp(log_bessel_i(nu + 1.0, kappa) - log_bessel_i(nu, kappa));
}

double mean_resultant_length_derivative(double kappa, int p) {
  if (kappa == 0.0) return 1.0 / p;
  const double a = mean_resultant_length(kappa, p);
  return 1.0 - a * a - (p - 1.0) * a / kappa;
}

double log_cp(double kappa, int p) {
  if (kappa < 0.0) throw DomainError("log_cp: negative concentration");
  const double nu = 0.5 * p - 1.0;
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  if (kappa == 0.0) {
    // kappa^nu / I_nu(kappa) -> 2^nu Gamma(nu + 1)
    return nu * std::log(2.0) + std::lgamma(nu + 1.0) - 0.5 * p * log_two_pi;
  }
  return nu * std::log(kappa) - 0.5 * p * log_two_pi - log_bessel_i(nu, kappa);
}

double ap_inv(double rbar, int p) {
  if (!(rbar >= 0.0) || rbar >= 1.0) throw DomainError("ap_inv requires 0 <= rbar < 1");
  if (rbar == 0.0) return 0.0;

  double kappa = rbar * (p - rbar * rbar) / (1.0 - rbar * rbar);
  double lo = 0.0;
  double hi = std::max(2.0 * kappa, 1.0);
  while (mean_resultant_length(hi, p) < rbar) {
    lo = hi;
    hi *= 2.0;
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double f = mean_resultant_length(kappa, p) - rbar;
    if (std::abs(f) <= 1e-13) break;
    if (f < 0.0)
      lo = std::max(lo, kappa);
    else
      hi = std::min(hi, kappa);
    double next = kappa - f / mean_resultant_length_derivative(kappa, p);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - kappa) <= 1e-15 * std::max(1.0, kappa)) {
      kappa = next;
      break;
    }
    kappa = next;
  }
  return kappa;
}

double concentration_mle(double rbar, int p, double kappa_max) {
  if (rbar <= 0.0) return 0.0;
  if (rbar >= 1.0 || rbar >= mean_resultant_length(kappa_max, p)) return kappa_max;
  return std::min(ap_inv(rbar, p), kappa_max);
}

}  // namespace coreg
