#include "protohead/config.hpp"

#include <cmath>

#include "protohead/errors.hpp"

namespace protohead {

const char* to_string(SimActivation a) {
  return a == SimActivation::kLogRatio ? "log-ratio" : "reciprocal";
}

SimActivation sim_activation_from_string(const std::string& s) {
  if (s == "log-ratio") return SimActivation::kLogRatio;
  if (s == "reciprocal") return SimActivation::kReciprocal;
  fail(ErrorKind::kConfig, "sim_activation must be 'log-ratio' or 'reciprocal', got '" + s + "'");
}

const char* to_string(TaskMode m) { return m == TaskMode::kClassification ? "classification" : "regression"; }

TaskMode task_mode_from_string(const std::string& s) {
  if (s == "classification") return TaskMode::kClassification;
  if (s == "regression") return TaskMode::kRegression;
  fail(ErrorKind::kConfig, "mode must be 'classification' or 'regression', got '" + s + "'");
}

void validate_config(const TrainConfig& c) {
  require(c.num_prototypes >= 1, ErrorKind::kConfig, "N must be >= 1");
  require(c.top_k >= 1, ErrorKind::kConfig, "K must be >= 1");
  require(c.batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(c.lambda0 >= 0 && c.lambda1 >= 0 && c.lambda2 >= 0, ErrorKind::kConfig, "lambdas must be nonnegative");
  const double sum = c.lambda0 + c.lambda1 + c.lambda2;
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kConfig,
          "lambda0 + lambda1 + lambda2 must equal 1 (simplex), got " + std::to_string(sum));
  require(std::isfinite(c.lr) && c.lr > 0, ErrorKind::kConfig, "lr must be positive");
  require(c.adam_beta1 >= 0 && c.adam_beta1 < 1 && c.adam_beta2 >= 0 && c.adam_beta2 < 1, ErrorKind::kConfig,
          "adam betas must lie in [0, 1)");
  require(c.adam_eps > 0, ErrorKind::kConfig, "adam_eps must be positive");
  require(c.eps_sim > 0 && c.eps_sim < 1, ErrorKind::kConfig, "eps_sim must lie in (0, 1)");
  require(c.threads >= 1, ErrorKind::kConfig, "threads must be >= 1");
}

void validate_config(const TrainConfig& c, std::size_t dim, std::size_t num_classes) {
  validate_config(c);
  require(dim >= 1, ErrorKind::kConfig, "D must be >= 1");
  require(num_classes >= 1, ErrorKind::kConfig, "|C| must be >= 1");
  if (c.mode == TaskMode::kRegression) {
    require(num_classes == 1, ErrorKind::kConfig, "regression mode requires |C| = 1");
    require(c.top_k <= c.num_prototypes, ErrorKind::kConfig, "K must be <= n");
    return;
  }
  require(c.num_prototypes % num_classes == 0, ErrorKind::kConfig,
          "N = " + std::to_string(c.num_prototypes) + " is not divisible by |C| = " + std::to_string(num_classes));
  const std::size_t n = c.per_class(num_classes);
  require(c.top_k <= n, ErrorKind::kConfig,
          "K = " + std::to_string(c.top_k) + " exceeds prototypes per class n = " + std::to_string(n));
  if (num_classes > 1) {
    require(c.top_k <= c.num_prototypes - n, ErrorKind::kConfig, "K exceeds other-class prototype count N - n");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"N", c.num_prototypes},
      {"K", c.top_k},
      {"lambda0", c.lambda0},
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"lr", c.lr},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"mode", to_string(c.mode)},
      {"sim_activation", to_string(c.sim_activation)},
      {"eps_sim", c.eps_sim},
      {"attention_dim", c.attention_dim},
      {"shuffle", c.shuffle},
      {"threads", c.threads},
      {"keep_best_eval", c.keep_best_eval},
  };
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  require(j.is_object(), ErrorKind::kConfig, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "N") c.num_prototypes = value.get<std::size_t>();
      else if (key == "K") c.top_k = value.get<std::size_t>();
      else if (key == "lambda0") c.lambda0 = value.get<double>();
      else if (key == "lambda1") c.lambda1 = value.get<double>();
      else if (key == "lambda2") c.lambda2 = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "mode") c.mode = task_mode_from_string(value.get<std::string>());
      else if (key == "sim_activation") c.sim_activation = sim_activation_from_string(value.get<std::string>());
      else if (key == "eps_sim") c.eps_sim = value.get<double>();
      else if (key == "attention_dim") c.attention_dim = value.get<std::size_t>();
      else if (key == "shuffle") c.shuffle = value.get<bool>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "keep_best_eval") c.keep_best_eval = value.get<bool>();
      else fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

}  // namespace protohead
