#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>

namespace coreg {

/// Weights and test parameters shared by the statistics, split and
/// registration stages. Defaults are lambda = 0.15, epsilon = 25,
/// alpha = 0.05, sigma_d = 3.
struct ModelConfig {
  double lambda = 0.15;   // inter-modal weight; also the GLR split threshold
  double epsilon = 25.0;  // boundary-length weight
  double alpha = 0.05;    // misalignment test false-positive rate
  double sigma_d = 3.0;   // boundary displacement scale, pixels
  std::uint64_t seed = 0;

  double variance_floor = 1e-6;
  double kappa_max = 1e4;
  /// Adds the boundary-length increase of a split (epsilon * |psi|) to the GLR threshold.
  bool split_boundary_penalty = false;
  int restarts = 5;      // region-growing seed pairs
  int max_sweeps = 60;   // boundary competition sweeps per call
  int iters = 3;         // alternating-minimization iterations
  double em_tol = 1e-8;
  int em_max_iter = 200;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are ignored.
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig load_model_config(const std::filesystem::path& path);

}  // namespace coreg
