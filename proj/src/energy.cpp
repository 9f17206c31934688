#include "coreg/energy.hpp"

#include "coreg/bessel.hpp"
#include "coreg/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace coreg {

namespace {

constexpr int kPolishIterations = 20;

// max_E mu . (E x), with orbit[e] = E^T mu.
double max_orbit_dot(const std::vector<Quat>& orbit, const Quat& x) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& o : orbit) best = std::max(best, o.dot(x));
  return best;
}

RegionModel fit_gaussian(const ScalarField& f, std::span<const PixelIndex> pixels, double floor) {
  RegionModel m;
  m.scalar = true;
  m.count = pixels.size();
  std::vector<double> values;
  values.reserve(pixels.size());
  for (PixelIndex p : pixels) values.push_back(f.values[static_cast<std::size_t>(p)]);
  m.gaussian = gaussian_mle(values);
  const double s2 = std::max(m.gaussian.sigma2, floor);
  double sse = 0.0;
  for (double v : values) sse += (v - m.gaussian.mu) * (v - m.gaussian.mu);
  m.gaussian.sigma2 = s2;
  const double n = static_cast<double>(values.size());
  m.nll = 0.5 * n * std::log(2.0 * std::numbers::pi * s2) + sse / (2.0 * s2);
  return m;
}

RegionModel fit_vmf(const QuatField& f, std::span<const PixelIndex> pixels, const ModelConfig& config,
                    const SymmetryGroup& group) {
  RegionModel m;
  m.scalar = false;
  m.count = pixels.size();
  std::vector<Quat> samples;
  samples.reserve(pixels.size());
  for (PixelIndex p : pixels) samples.push_back(f.values[static_cast<std::size_t>(p)]);

  VmfParams params;
  if (samples.size() == 1) {
    params.mu = samples.front();
    params.kappa = config.kappa_max;
  } else {
    try {
      EmOptions options;
      options.tol = config.em_tol;
      options.max_iter = config.em_max_iter;
      options.kappa_max = config.kappa_max;
      params = vmf_mixture_em_detailed(samples, group, options).params;
      for (int it = 0; it < kPolishIterations; ++it) {
        const auto reduced = symmetry_reduce(samples, params.mu, group);
        const VmfParams next = vmf_fit(reduced, config.kappa_max);
        const bool settled = (next.mu - params.mu).norm() < 1e-13 && std::abs(next.kappa - params.kappa) < 1e-10;
        params = next;
        if (settled) break;
      }
    } catch (const EstimationError&) {
      params.mu = samples.front();
      params.kappa = 0.0;
    }
  }
  m.vmf = params;
  m.log_cp = log_cp(params.kappa, 4);
  for (const auto& e : group.effective_operators()) m.orbit.push_back(e.transpose() * params.mu);
  double nll = 0.0;
  for (const auto& x : samples) nll -= m.log_cp + params.kappa * max_orbit_dot(m.orbit, x);
  m.nll = nll;
  return m;
}

}  // namespace

GaussianParams gaussian_mle(std::span<const double> values) {
  if (values.empty()) throw EstimationError("gaussian_mle needs at least one value");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, ss / n};
}

double gaussian_nll(double v, const GaussianParams& params, double variance_floor) {
  const double s2 = std::max(params.sigma2, variance_floor);
  const double d = v - params.mu;
  return 0.5 * std::log(2.0 * std::numbers::pi * s2) + d * d / (2.0 * s2);
}

RegionModel fit_region_model(ImageRef image, std::span<const PixelIndex> pixels, const ModelConfig& config,
                             const SymmetryGroup& group) {
  if (pixels.empty()) throw EstimationError("cannot fit an empty region");
  if (image.is_scalar()) return fit_gaussian(image.scalar(), pixels, config.variance_floor);
  return fit_vmf(image.quat(), pixels, config, group);
}

double pixel_nll(const RegionModel& model, ImageRef image, PixelIndex p, const SymmetryGroup& group) {
  if (model.scalar) {
    const double d = image.scalar().values[static_cast<std::size_t>(p)] - model.gaussian.mu;
    return 0.5 * std::log(2.0 * std::numbers::pi * model.gaussian.sigma2) + d * d / (2.0 * model.gaussian.sigma2);
  }
  (void)group;
  return -(model.log_cp + model.vmf.kappa * max_orbit_dot(model.orbit, image.quat().values[static_cast<std::size_t>(p)]));
}

IntraModalEnergy::IntraModalEnergy(ImageRef image, ModelConfig config, SymmetryGroup group)
    : image_(image), config_(std::move(config)), group_(std::move(group)) {}

void IntraModalEnergy::check_dims(const Segmentation& seg) const {
  if (seg.width() != image_.width() || seg.height() != image_.height())
    throw DimensionError("segmentation and image dimensions differ");
}

void IntraModalEnergy::refresh(const Segmentation& seg) {
  check_dims(seg);
  const auto& regions = seg.regions();
  if (cache_.size() < regions.size()) cache_.resize(regions.size());
  std::vector<std::size_t> stale;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (cache_[i].revision != regions[i].revision) stale.push_back(i);
  const auto n_stale = static_cast<long>(stale.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n_stale; ++k) {
    const std::size_t i = stale[static_cast<std::size_t>(k)];
    cache_[i].model = fit_region_model(image_, regions[i].pixels, config_, group_);
    cache_[i].revision = regions[i].revision;
  }
}

const RegionModel& IntraModalEnergy::model(const Segmentation& seg, RegionId id) {
  const Region& r = seg.region(id);
  const auto i = static_cast<std::size_t>(id);
  if (cache_.size() <= i) cache_.resize(seg.region_count());
  if (cache_[i].revision != r.revision) {
    cache_[i].model = fit_region_model(image_, r.pixels, config_, group_);
    cache_[i].revision = r.revision;
  }
  return cache_[i].model;
}

double IntraModalEnergy::region_term(const Segmentation& seg, RegionId id) {
  return model(seg, id).nll + config_.epsilon * seg.region(id).boundary_share();
}

double IntraModalEnergy::total(const Segmentation& seg) {
  refresh(seg);
  double j = 0.0;
  for (const auto& r : seg.regions())
    j += cache_[static_cast<std::size_t>(r.id)].model.nll + config_.epsilon * r.boundary_share();
  return j;
}

double intra_modal_energy(const Segmentation& seg, ImageRef image, const ModelConfig& config,
                          const SymmetryGroup& group) {
  if (seg.width() != image.width() || seg.height() != image.height())
    throw DimensionError("segmentation and image dimensions differ");
  double j = 0.0;
  for (const auto& r : seg.regions())
    j += fit_region_model(image, r.pixels, config, group).nll + config.epsilon * r.boundary_share();
  return j;
}

}  // namespace coreg
