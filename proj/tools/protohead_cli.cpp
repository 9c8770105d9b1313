// protohead: command-line front end for training and inspecting a
// prototypical classification head over precomputed token embeddings.
//
// Exit codes: 0 success, 1 validation/config error, 2 I/O or format error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protohead/config.hpp"
#include "protohead/datastore.hpp"
#include "protohead/errors.hpp"
#include "protohead/faithfulness.hpp"
#include "protohead/interpret.hpp"
#include "protohead/kernels.hpp"
#include "protohead/loss.hpp"
#include "protohead/provenance.hpp"
#include "protohead/rng.hpp"
#include "protohead/synth.hpp"
#include "protohead/trainer.hpp"

namespace ph = protohead;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::string checkpoint;
  std::string data;
  std::optional<double> lambda0, lambda1, lambda2, lr;
  std::optional<std::size_t> n_protos, top_k, epochs, batch_size;
  std::optional<std::string> sim_activation;
  std::vector<std::string> overrides;
};

// Defaults, then --config file, then dedicated flags, then key=value pairs.
nlohmann::json merged_config_json(const CommonFlags& f) {
  nlohmann::json j = ph::to_json(ph::TrainConfig{});
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    ph::require(in.is_open(), ph::ErrorKind::kIo, "cannot open config " + f.config_path);
    nlohmann::json file;
    try {
      in >> file;
    } catch (const nlohmann::json::exception& e) {
      ph::fail(ph::ErrorKind::kFormat, "config " + f.config_path + " is not valid JSON: " + e.what());
    }
    ph::require(file.is_object(), ph::ErrorKind::kConfig, "config file must hold a JSON object");
    for (const auto& [k, v] : file.items()) j[k] = v;
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.threads) j["threads"] = *f.threads;
  if (f.lambda0) j["lambda0"] = *f.lambda0;
  if (f.lambda1) j["lambda1"] = *f.lambda1;
  if (f.lambda2) j["lambda2"] = *f.lambda2;
  if (f.lr) j["lr"] = *f.lr;
  if (f.n_protos) j["N"] = *f.n_protos;
  if (f.top_k) j["K"] = *f.top_k;
  if (f.epochs) j["epochs"] = *f.epochs;
  if (f.batch_size) j["batch_size"] = *f.batch_size;
  if (f.sim_activation) j["sim_activation"] = *f.sim_activation;
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    ph::require(eq != std::string::npos && eq > 0, ph::ErrorKind::kConfig, "override '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
  ph::config_from_json(j);  // rejects unknown keys and bad types
  return j;
}

void add_config_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--lambda0", f.lambda0, "cross-entropy weight");
  cmd->add_option("--lambda1", f.lambda1, "cohesion weight");
  cmd->add_option("--lambda2", f.lambda2, "separation weight");
  cmd->add_option("--N", f.n_protos, "number of prototypes");
  cmd->add_option("--K", f.top_k, "prototypes per cohesion/separation term");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--sim-activation", f.sim_activation, "log-ratio | reciprocal");
  cmd->add_option("overrides", f.overrides, "extra key=value config overrides");
}

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--threads", f.threads, "OpenMP threads (default 1)");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  ph::require(os.is_open(), ph::ErrorKind::kIo, "cannot open " + path + " for writing");
  return os;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  auto os = open_out(path);
  os << text;
  ph::require(os.good(), ph::ErrorKind::kIo, "write failed on " + path);
}

std::vector<double> parse_k_list(const std::string& s) {
  std::vector<double> ks;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      ks.push_back(std::stod(item, &used));
      ph::require(used == item.size(), ph::ErrorKind::kConfig, "bad k value '" + item + "'");
    } catch (const std::logic_error&) {
      ph::fail(ph::ErrorKind::kConfig, "bad k value '" + item + "'");
    }
  }
  ph::require(!ks.empty(), ph::ErrorKind::kConfig, "--k-list is empty");
  return ks;
}

nlohmann::json checkpoint_provenance(const std::string& command, const ph::TrainerState& st) {
  return ph::make_provenance(command, ph::to_json(st.config), st.config.seed);
}

int run_train(const CommonFlags& f, const std::string& eval_path, const std::string& metrics_path) {
  const auto merged = merged_config_json(f);
  const auto config = ph::config_from_json(merged);
  ph::validate_config(config);
  ph::require(!f.data.empty(), ph::ErrorKind::kConfig, "--data is required");
  const auto train_set = ph::read_dataset(f.data);
  const auto eval_set = eval_path.empty() ? train_set : ph::read_dataset(eval_path);
  ph::validate_config(config, train_set.dim, train_set.num_classes);

  ph::TrainOptions opts;
  const std::string ckpt = f.checkpoint.empty() ? (f.out.empty() ? "model.plmc" : f.out) : f.checkpoint;
  opts.checkpoint_path = ckpt;
  opts.provenance = ph::make_provenance("train", merged, config.seed);
  opts.metrics_path = metrics_path.empty() ? fs::path(ckpt + ".metrics.jsonl") : fs::path(metrics_path);
  if (config.keep_best_eval) opts.best_checkpoint_path = ckpt + ".best.plmc";
  const auto result = ph::train(config, train_set, eval_set, opts);

  nlohmann::json summary{{"provenance", opts.provenance},
                         {"checkpoint", ckpt},
                         {"epochs", result.history.epochs.size()}};
  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    summary["final"] = {{"total", last.total}, {"ce", last.ce}, {"coh", last.coh}, {"sep", last.sep},
                        {"eval_metric", last.eval_metric}};
  }
  if (result.best) {
    summary["best"] = {{"checkpoint", opts.best_checkpoint_path->string()},
                       {"epoch", result.best->epoch},
                       {"eval_metric", result.best_eval_metric}};
  }
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int run_eval(const CommonFlags& f) {
  ph::require(!f.checkpoint.empty() && !f.data.empty(), ph::ErrorKind::kConfig, "--checkpoint and --data are required");
  const auto st = ph::load_checkpoint(f.checkpoint);
  const auto ds = ph::read_dataset(f.data);
  ph::set_num_threads(f.threads.value_or(1));
  const auto m = ph::evaluate(st.params, ds);
  nlohmann::json j{{"provenance", checkpoint_provenance("eval", st)}, {"count", m.count}};
  if (st.params.mode == ph::TaskMode::kClassification) {
    j["accuracy"] = m.accuracy;
    j["mean_ce"] = m.mean_ce;
    j["class_total"] = m.class_total;
    j["class_correct"] = m.class_correct;
  } else {
    j["mse"] = m.mse;
  }
  write_text(f.out, j.dump(2) + "\n");
  return kExitOk;
}

int run_project(const CommonFlags& f, const std::string& dist_path, bool class_restricted) {
  ph::require(!f.checkpoint.empty() && !f.data.empty(), ph::ErrorKind::kConfig, "--checkpoint and --data are required");
  const auto st = ph::load_checkpoint(f.checkpoint);
  const auto ds = ph::read_dataset(f.data);
  ph::set_num_threads(f.threads.value_or(1));
  const auto proj = ph::project_prototypes(st.params, ds);
  const double uniq = ph::uniqueness(proj);
  const double mnd = ph::mean_normalized_projection_distance(st.params, ds, proj, st.config.seed);
  const auto prov = checkpoint_provenance("project", st);

  std::ostringstream csv;
  csv << ph::provenance_comment(prov);
  csv << "# uniqueness: " << uniq << "\n# mean_normalized_projection_distance: " << mnd << '\n';
  ph::write_projection_csv(csv, proj, st.params);
  write_text(f.out, csv.str());

  if (!dist_path.empty()) {
    const auto enc = ph::pooled_encodings(ds, st.params, ph::ExecPolicy::kParallel);
    std::ostringstream d;
    d << ph::provenance_comment(prov);
    d << "# class_restricted: " << (class_restricted ? "true" : "false") << '\n';
    for (std::size_t j = 0; j < st.params.num_prototypes(); ++j) {
      std::ostringstream one;
      ph::write_distribution_csv(one, ph::cluster_distribution(st.params, ds, enc, j, class_restricted), ds);
      std::string text = one.str();
      if (j > 0) text = text.substr(text.find('\n', text.find('\n') + 1) + 1);  // header once
      d << text;
    }
    write_text(dist_path, d.str());
  }
  if (!f.out.empty() && f.out != "-") {
    std::cout << nlohmann::json{{"uniqueness", uniq}, {"mean_normalized_projection_distance", mnd}}.dump() << '\n';
  }
  return kExitOk;
}

int run_faithfulness(const CommonFlags& f, const std::string& k_list, const std::string& summary_path) {
  ph::require(!f.checkpoint.empty() && !f.data.empty(), ph::ErrorKind::kConfig, "--checkpoint and --data are required");
  const auto ks = parse_k_list(k_list);
  const auto st = ph::load_checkpoint(f.checkpoint);
  const auto ds = ph::read_dataset(f.data);
  ph::set_num_threads(f.threads.value_or(1));
  const auto report = ph::faithfulness_report(st.params, ds, ks);
  const auto prov = checkpoint_provenance("faithfulness", st);

  std::ostringstream csv;
  csv << ph::provenance_comment(prov);
  ph::write_faithfulness_csv(csv, report);
  write_text(f.out, csv.str());

  std::ostringstream summary;
  summary << ph::provenance_comment(prov);
  ph::write_faithfulness_summary_csv(summary, report);
  if (!summary_path.empty()) {
    write_text(summary_path, summary.str());
  } else if (!f.out.empty() && f.out != "-") {
    ph::write_faithfulness_summary_csv(std::cout, report);
  }
  return kExitOk;
}

int run_export_space(const CommonFlags& f, std::size_t a, std::size_t b) {
  ph::require(!f.checkpoint.empty() && !f.data.empty(), ph::ErrorKind::kConfig, "--checkpoint and --data are required");
  const auto st = ph::load_checkpoint(f.checkpoint);
  const auto ds = ph::read_dataset(f.data);
  ph::set_num_threads(f.threads.value_or(1));
  const auto rows = ph::export_space(st.params, ds, a, b);
  std::ostringstream csv;
  auto prov = checkpoint_provenance("export-space", st);
  prov["proto_a"] = a;
  prov["proto_b"] = b;
  csv << ph::provenance_comment(prov);
  ph::write_space_csv(csv, rows);
  write_text(f.out, csv.str());
  return kExitOk;
}

// Random small instances: tokens ~ N(0,1), D=8, T in [1,6], N=6, |C|=2, K=2.
int run_gradcheck(const CommonFlags& f, std::size_t instances, double step, double tol) {
  const std::uint64_t seed = f.seed.value_or(0);
  ph::Rng rng(seed);
  nlohmann::json out{{"provenance", ph::make_provenance("gradcheck", nlohmann::json{{"instances", instances},
                                                                                    {"step", step},
                                                                                    {"tolerance", tol}},
                                                         seed)},
                     {"instances", nlohmann::json::array()}};
  bool all_pass = true;
  for (std::size_t k = 0; k < instances; ++k) {
    ph::TrainConfig c;
    c.num_prototypes = 6;
    c.top_k = 2;
    c.sim_activation = (k % 2 == 0) ? ph::SimActivation::kLogRatio : ph::SimActivation::kReciprocal;
    c.mode = (k % 4 < 2) ? ph::TaskMode::kClassification : ph::TaskMode::kRegression;
    const std::size_t classes = c.mode == ph::TaskMode::kClassification ? 2 : 1;
    const std::size_t dim = 8;
    auto params = ph::init_params(c, dim, classes, rng);
    for (double& x : params.w_h.flat()) x += rng.uniform(-0.5, 0.5);
    std::vector<ph::TokenEmbeddingSample> batch(4);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t t_count = 1 + rng.index(6);
      batch[i].tokens = ph::Matrix(t_count, dim);
      for (double& x : batch[i].tokens.flat()) x = rng.normal();
      batch[i].label = static_cast<std::uint32_t>(rng.index(classes));
      batch[i].target = rng.normal();
    }
    std::vector<const ph::TokenEmbeddingSample*> refs;
    for (const auto& s : batch) refs.push_back(&s);
    const auto report = ph::grad_check(params, refs, c, step, tol);
    all_pass = all_pass && report.passed;
    nlohmann::json tensors;
    for (const auto& t : report.tensors) tensors[t.name] = t.max_rel_error;
    out["instances"].push_back({{"mode", ph::to_string(c.mode)},
                                {"sim_activation", ph::to_string(c.sim_activation)},
                                {"max_rel_error", tensors},
                                {"passed", report.passed},
                                {"truncation_dominated", report.truncation_dominated}});
  }
  out["passed"] = all_pass;
  write_text(f.out, out.dump(2) + "\n");
  return all_pass ? kExitOk : kExitValidation;
}

int run_synth(const CommonFlags& f, ph::SynthSpec spec) {
  ph::require(!f.out.empty(), ph::ErrorKind::kConfig, "--out is required");
  spec.seed = f.seed.value_or(0);
  const auto ds = ph::synth(spec);
  ph::write_dataset(ds, f.out);
  const nlohmann::json cfg{{"classes", spec.classes},       {"samples_per_class", spec.samples_per_class},
                           {"min_tokens", spec.min_tokens}, {"max_tokens", spec.max_tokens},
                           {"dim", spec.dim},               {"separation", spec.separation},
                           {"noise_std", spec.noise_std},   {"texts", spec.with_texts}};
  // PLM1 has no metadata slot, so provenance goes to a sidecar file.
  write_text(f.out + ".provenance.json", ph::make_provenance("synth", cfg, spec.seed).dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototypical classification head over token embeddings"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string eval_path, metrics_path, k_list = "1,5,10,20,50", summary_path, dist_path;
  std::size_t proto_a = 0, proto_b = 1;
  std::size_t gc_instances = 20;
  double gc_step = 1e-5, gc_tol = 1e-4;
  bool class_restricted = false;
  ph::SynthSpec spec;

  auto* train = app.add_subcommand("train", "train a head on a PLM1 dataset");
  add_common_flags(train, f);
  add_config_flags(train, f);
  train->add_option("--data", f.data, "training PLM1 file")->required();
  train->add_option("--eval", eval_path, "evaluation PLM1 file (default: training data)");
  train->add_option("--checkpoint", f.checkpoint, "output PLMC checkpoint");
  train->add_option("--out", f.out, "alias for --checkpoint");
  train->add_option("--metrics", metrics_path, "JSON-lines metrics log");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_flags(eval, f);
  eval->add_option("--checkpoint", f.checkpoint)->required();
  eval->add_option("--data", f.data)->required();
  eval->add_option("--out", f.out, "JSON output (default stdout)");

  auto* project = app.add_subcommand("project", "project prototypes onto training samples");
  add_common_flags(project, f);
  project->add_option("--checkpoint", f.checkpoint)->required();
  project->add_option("--data", f.data, "training PLM1 file")->required();
  project->add_option("--out", f.out, "projection CSV (default stdout)");
  project->add_option("--distributions", dist_path, "soft-clustering distribution CSV");
  project->add_flag("--class-restricted", class_restricted, "restrict distributions to the prototype's class");

  auto* faith = app.add_subcommand("faithfulness", "comprehensiveness/sufficiency report");
  add_common_flags(faith, f);
  faith->add_option("--checkpoint", f.checkpoint)->required();
  faith->add_option("--data", f.data)->required();
  faith->add_option("--k-list", k_list, "comma-separated k percentages");
  faith->add_option("--out", f.out, "per-sample CSV (default stdout)");
  faith->add_option("--summary", summary_path, "mean table CSV");

  auto* space = app.add_subcommand("export-space", "two-prototype similarity table");
  add_common_flags(space, f);
  space->add_option("--checkpoint", f.checkpoint)->required();
  space->add_option("--data", f.data)->required();
  space->add_option("--proto-a", proto_a)->required();
  space->add_option("--proto-b", proto_b)->required();
  space->add_option("--out", f.out, "CSV output (default stdout)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check on random instances");
  add_common_flags(gc, f);
  gc->add_option("--instances", gc_instances);
  gc->add_option("--step", gc_step);
  gc->add_option("--tol", gc_tol);
  gc->add_option("--out", f.out, "JSON report (default stdout)");

  auto* sy = app.add_subcommand("synth", "generate a synthetic PLM1 dataset");
  add_common_flags(sy, f);
  sy->add_option("--classes", spec.classes);
  sy->add_option("--samples", spec.samples_per_class, "samples per class");
  sy->add_option("--min-tokens", spec.min_tokens);
  sy->add_option("--max-tokens", spec.max_tokens);
  sy->add_option("--dim", spec.dim);
  sy->add_option("--separation", spec.separation);
  sy->add_option("--noise", spec.noise_std);
  sy->add_flag("--texts", spec.with_texts, "attach synthetic token strings");
  sy->add_option("--out", f.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*train) return run_train(f, eval_path, metrics_path);
    if (*eval) return run_eval(f);
    if (*project) return run_project(f, dist_path, class_restricted);
    if (*faith) return run_faithfulness(f, k_list, summary_path);
    if (*space) return run_export_space(f, proto_a, proto_b);
    if (*gc) return run_gradcheck(f, gc_instances, gc_step, gc_tol);
    if (*sy) return run_synth(f, spec);
  } catch (const ph::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool io = e.kind() == ph::ErrorKind::kIo || e.kind() == ph::ErrorKind::kFormat;
    return io ? kExitIo : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
