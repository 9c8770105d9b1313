#include "protohead/trainer.hpp"

#include <fstream>
#include <iostream>

#include "bytes.hpp"
#include "protohead/errors.hpp"
#include "protohead/loss.hpp"
#include "protohead/provenance.hpp"
#include "protohead/rng.hpp"

namespace protohead {

namespace {

std::array<std::span<double>, 5> param_views(HeadParameters& p) {
  return {p.w_psi.flat(), std::span<double>(p.b_psi), std::span<double>(p.w_nu), p.prototypes.flat(),
          p.w_h.flat()};
}

std::array<std::span<const double>, 5> grad_views(const Gradients& g) {
  return {g.w_psi.flat(), std::span<const double>(g.b_psi), std::span<const double>(g.w_nu), g.prototypes.flat(),
          g.w_h.flat()};
}

std::vector<const TokenEmbeddingSample*> refs_of(const Dataset& ds, const Batch& batch) {
  std::vector<const TokenEmbeddingSample*> out;
  out.reserve(batch.size());
  for (auto i : batch) out.push_back(&ds.samples[i]);
  return out;
}

std::vector<const TokenEmbeddingSample*> refs_of(const Dataset& ds) {
  std::vector<const TokenEmbeddingSample*> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(&s);
  return out;
}

void check_compatible(const TrainConfig& config, const Dataset& train_set, const Dataset& eval_set) {
  require(train_set.dim == eval_set.dim && train_set.num_classes == eval_set.num_classes, ErrorKind::kConfig,
          "train and eval datasets disagree on D or |C|");
  require(train_set.mode == config.mode && eval_set.mode == config.mode, ErrorKind::kConfig,
          "dataset mode does not match config mode");
  require(!train_set.samples.empty() && !eval_set.samples.empty(), ErrorKind::kConfig, "empty dataset");
  validate_config(config, train_set.dim, train_set.num_classes);
}

}  // namespace

TrainerState initial_state(const TrainConfig& config, std::size_t dim, std::size_t num_classes) {
  Rng rng(config.seed);
  TrainerState st;
  st.config = config;
  st.params = init_params(config, dim, num_classes, rng);
  auto views = param_views(st.params);
  for (std::size_t k = 0; k < st.adam.size(); ++k) {
    st.adam[k] = AdamState(views[k].size(), config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  }
  st.rng_state = rng.state();
  st.epoch = 0;
  return st;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& eval_set,
                  const TrainOptions& options) {
  check_compatible(config, train_set, eval_set);
  return resume(initial_state(config, train_set.dim, train_set.num_classes), train_set, eval_set, options);
}

TrainResult resume(TrainerState state, const Dataset& train_set, const Dataset& eval_set,
                   const TrainOptions& options) {
  const TrainConfig& config = state.config;
  check_compatible(config, train_set, eval_set);
  validate_params(state.params);
  require(state.params.dim() == train_set.dim && state.params.num_classes() == train_set.num_classes,
          ErrorKind::kConfig, "checkpoint shapes do not match the dataset");
  set_num_threads(config.threads);
  if (config.mode == TaskMode::kRegression && config.lambda2 > 0) {
    std::cerr << "warning: regression mode has a single class; the separation term is identically 0\n";
  }

  std::ofstream metrics;
  if (options.metrics_path) {
    metrics.open(*options.metrics_path, std::ios::trunc);
    require(metrics.is_open(), ErrorKind::kIo, "cannot open metrics log " + options.metrics_path->string());
    if (!options.provenance.is_null()) metrics << nlohmann::json{{"provenance", options.provenance}}.dump() << '\n';
  }

  Rng rng(0);
  rng.set_state(state.rng_state);
  const auto all_refs = refs_of(train_set);
  TrainResult result;
  const bool higher_is_better = config.mode == TaskMode::kClassification;

  while (state.epoch < config.epochs) {
    const auto batches = make_batches(train_set.size(), config.batch_size, rng, config.shuffle);
    for (const auto& batch : batches) {
      const auto refs = refs_of(train_set, batch);
      const auto traces = forward_batch(refs, state.params, options.policy);
      const auto loss = total_loss(refs, traces, state.params, config);
      const auto grads = backward_batch(refs, traces, loss, state.params, config, options.policy);
      auto pv = param_views(state.params);
      const auto gv = grad_views(grads);
      for (std::size_t k = 0; k < pv.size(); ++k) adam_step(pv[k], gv[k], state.adam[k]);
    }
    ++state.epoch;
    state.rng_state = rng.state();

    const auto traces = forward_batch(all_refs, state.params, options.policy);
    const auto loss = total_loss(all_refs, traces, state.params, config);
    const auto eval = evaluate(state.params, eval_set, options.policy);
    EpochRecord rec{state.epoch, loss.ce, loss.coh, loss.sep, loss.total, eval.primary()};
    result.history.epochs.push_back(rec);

    if (metrics.is_open()) {
      nlohmann::json j{{"epoch", rec.epoch}, {"ce", rec.ce},       {"coh", rec.coh},
                       {"sep", rec.sep},     {"total", rec.total}, {"eval_metric", rec.eval_metric},
                       {"eval_name", config.mode == TaskMode::kClassification ? "accuracy" : "mse"}};
      metrics << j.dump() << '\n';
    }
    if (options.checkpoint_path) save_checkpoint(state, *options.checkpoint_path);

    if (config.keep_best_eval) {
      const double prev = result.best_eval_metric;
      if (!result.best || (higher_is_better ? rec.eval_metric > prev : rec.eval_metric < prev)) {
        result.best = state;
        result.best_eval_metric = rec.eval_metric;
        if (options.best_checkpoint_path) save_checkpoint(state, *options.best_checkpoint_path);
      }
    }
  }
  if (options.checkpoint_path) save_checkpoint(state, *options.checkpoint_path);
  result.state = std::move(state);
  return result;
}

EvalMetrics evaluate(const HeadParameters& params, const Dataset& dataset, ExecPolicy policy) {
  require(dataset.mode == params.mode, ErrorKind::kConfig, "dataset mode does not match model mode");
  require(dataset.dim == params.dim(), ErrorKind::kConfig, "dataset D does not match model D");
  require(!dataset.samples.empty(), ErrorKind::kConfig, "cannot evaluate an empty dataset");
  const auto refs = refs_of(dataset);
  const auto traces = forward_batch(refs, params, policy);

  EvalMetrics m;
  m.count = dataset.size();
  if (params.mode == TaskMode::kRegression) {
    for (std::size_t i = 0; i < refs.size(); ++i) m.mse += loss_mse(traces[i].logits[0], refs[i]->target);
    m.mse /= static_cast<double>(m.count);
    return m;
  }
  require(dataset.num_classes == params.num_classes(), ErrorKind::kConfig, "dataset |C| does not match model");
  m.class_total.assign(params.num_classes(), 0);
  m.class_correct.assign(params.num_classes(), 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto label = refs[i]->label;
    const bool hit = argmax(traces[i].logits) == label;
    ++m.class_total[label];
    if (hit) {
      ++m.class_correct[label];
      ++correct;
    }
    m.mean_ce += loss_ce(traces[i].probs, label);
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.count);
  m.mean_ce /= static_cast<double>(m.count);
  return m;
}

// PLMC checkpoint layout (little-endian):
//   "PLMC" | version u32 | metadata length u64 | metadata JSON (UTF-8)
//   | f64 tensors: w_psi, b_psi, w_nu, prototypes, w_h
//   | for each of those five tensors: Adam m, then Adam v
std::vector<std::uint8_t> encode_checkpoint(const TrainerState& st) {
  const auto& p = st.params;
  nlohmann::json adam = nlohmann::json::array();
  for (std::size_t k = 0; k < st.adam.size(); ++k) {
    const auto& a = st.adam[k];
    adam.push_back({{"tensor", kTensorOrder[k]},
                    {"step", a.step},
                    {"beta1", a.beta1},
                    {"beta2", a.beta2},
                    {"eps", a.eps},
                    {"lr", a.lr},
                    {"size", a.m.size()}});
  }
  nlohmann::json meta{
      {"provenance", make_provenance("train", to_json(st.config), st.config.seed)},
      {"config", to_json(st.config)},
      {"seed", st.config.seed},
      {"epoch", st.epoch},
      {"rng_state", st.rng_state},
      {"mode", to_string(p.mode)},
      {"sim_activation", to_string(p.activation)},
      {"eps_sim", p.eps_sim},
      {"D", p.dim()},
      {"D_a", p.attention_dim()},
      {"N", p.num_prototypes()},
      {"C", p.num_classes()},
      {"proto_class", p.proto_class},
      {"tensor_order", kTensorOrder},
      {"adam", adam},
  };
  const std::string text = meta.dump();

  detail::ByteWriter w;
  w.put_bytes("PLMC");
  w.put_u32(kPlmcVersion);
  w.put_u64(text.size());
  w.put_bytes(text);
  w.put_f64s(p.w_psi.flat());
  w.put_f64s(p.b_psi);
  w.put_f64s(p.w_nu);
  w.put_f64s(p.prototypes.flat());
  w.put_f64s(p.w_h.flat());
  for (const auto& a : st.adam) {
    w.put_f64s(a.m);
    w.put_f64s(a.v);
  }
  return std::move(w.buffer());
}

TrainerState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  require(r.remaining() >= 4 && r.get_bytes(4, "magic") == "PLMC", ErrorKind::kFormat, "bad magic");
  const auto version = r.get_u32("version");
  require(version == kPlmcVersion, ErrorKind::kFormat, "unsupported PLMC version " + std::to_string(version));
  const auto len = r.get_u64("metadata length");
  const std::string text = r.get_bytes(len, "metadata");

  TrainerState st;
  try {
    const auto meta = nlohmann::json::parse(text);
    st.config = config_from_json(meta.at("config"));
    st.epoch = meta.at("epoch").get<std::size_t>();
    st.rng_state = meta.at("rng_state").get<std::string>();
    auto& p = st.params;
    p.mode = task_mode_from_string(meta.at("mode").get<std::string>());
    p.activation = sim_activation_from_string(meta.at("sim_activation").get<std::string>());
    p.eps_sim = meta.at("eps_sim").get<double>();
    const auto dim = meta.at("D").get<std::size_t>();
    const auto da = meta.at("D_a").get<std::size_t>();
    const auto n_proto = meta.at("N").get<std::size_t>();
    const auto classes = meta.at("C").get<std::size_t>();
    p.proto_class = meta.at("proto_class").get<std::vector<std::uint32_t>>();

    auto read_vec = [&](std::size_t n, const char* what) {
      r.need(n * 8, what);
      std::vector<double> v(n);
      for (auto& x : v) x = r.get_f64(what);
      return v;
    };
    p.w_psi = Matrix::from_data(da, dim, read_vec(da * dim, "w_psi"));
    p.b_psi = read_vec(da, "b_psi");
    p.w_nu = read_vec(da, "w_nu");
    p.prototypes = Matrix::from_data(n_proto, dim, read_vec(n_proto * dim, "prototypes"));
    p.w_h = Matrix::from_data(n_proto, classes, read_vec(n_proto * classes, "w_h"));

    const auto& adam = meta.at("adam");
    require(adam.size() == st.adam.size(), ErrorKind::kFormat, "checkpoint must hold 5 Adam states");
    const std::array<std::size_t, 5> sizes = {da * dim, da, da, n_proto * dim, n_proto * classes};
    for (std::size_t k = 0; k < st.adam.size(); ++k) {
      const auto& a = adam[k];
      require(a.at("size").get<std::size_t>() == sizes[k], ErrorKind::kFormat, "Adam state size mismatch");
      AdamState s;
      s.step = a.at("step").get<std::uint64_t>();
      s.beta1 = a.at("beta1").get<double>();
      s.beta2 = a.at("beta2").get<double>();
      s.eps = a.at("eps").get<double>();
      s.lr = a.at("lr").get<double>();
      s.m = read_vec(sizes[k], "adam m");
      s.v = read_vec(sizes[k], "adam v");
      st.adam[k] = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint metadata: ") + e.what());
  }
  require(r.remaining() == 0, ErrorKind::kFormat, "trailing bytes in checkpoint at offset " + std::to_string(r.offset()));
  validate_params(st.params);
  return st;
}

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_checkpoint(state));
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace protohead
