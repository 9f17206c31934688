#include "coreg/config.hpp"

#include "coreg/error.hpp"

#include <cmath>
#include <fstream>

namespace coreg {

void ModelConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(lambda) || lambda < 0) throw ConfigError("lambda must be a finite value >= 0");
  if (!finite(epsilon) || epsilon < 0) throw ConfigError("epsilon must be a finite value >= 0");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (!finite(sigma_d) || sigma_d <= 0) throw ConfigError("sigma_d must be > 0");
  if (!(variance_floor > 0)) throw ConfigError("variance_floor must be > 0");
  if (!(kappa_max > 0)) throw ConfigError("kappa_max must be > 0");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (max_sweeps < 0) throw ConfigError("max_sweeps must be >= 0");
  if (iters < 0) throw ConfigError("iters must be >= 0");
  if (em_max_iter < 1) throw ConfigError("em_max_iter must be >= 1");
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c;
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.alpha = j.value("alpha", c.alpha);
    c.sigma_d = j.value("sigma_d", c.sigma_d);
    c.seed = j.value("seed", c.seed);
    c.variance_floor = j.value("variance_floor", c.variance_floor);
    c.kappa_max = j.value("kappa_max", c.kappa_max);
    c.split_boundary_penalty = j.value("split_boundary_penalty", c.split_boundary_penalty);
    c.restarts = j.value("restarts", c.restarts);
    c.max_sweeps = j.value("max_sweeps", c.max_sweeps);
    c.iters = j.value("iters", c.iters);
    c.em_tol = j.value("em_tol", c.em_tol);
    c.em_max_iter = j.value("em_max_iter", c.em_max_iter);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"lambda", c.lambda},
          {"epsilon", c.epsilon},
          {"alpha", c.alpha},
          {"sigma_d", c.sigma_d},
          {"seed", c.seed},
          {"variance_floor", c.variance_floor},
          {"kappa_max", c.kappa_max},
          {"split_boundary_penalty", c.split_boundary_penalty},
          {"restarts", c.restarts},
          {"max_sweeps", c.max_sweeps},
          {"iters", c.iters},
          {"em_tol", c.em_tol},
          {"em_max_iter", c.em_max_iter}};
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  return model_config_from_json(j);
}

}  // namespace coreg
