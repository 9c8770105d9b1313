// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `acceptance 3 8` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "protohead/datastore.hpp"
#include "protohead/faithfulness.hpp"
#include "protohead/interpret.hpp"
#include "protohead/loss.hpp"
#include "protohead/rng.hpp"
#include "protohead/synth.hpp"
#include "protohead/trainer.hpp"
#include "test_support.hpp"

using namespace protohead;

namespace {

constexpr std::uint64_t kSeeds[] = {0, 1, 2, 3, 4};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string join(const std::vector<double>& v, int prec = 3) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i], prec);
  return s + "]";
}

// 2-class token task: 200 train / 100 test samples, D = 16.
std::pair<Dataset, Dataset> two_class_task(double separation, std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = 2;
  spec.samples_per_class = 150;
  spec.dim = 16;
  spec.separation = separation;
  spec.seed = seed;
  return split_dataset(synth(spec), 200);
}

TrainConfig learning_config(std::uint64_t seed) {
  TrainConfig c;
  c.num_prototypes = 10;
  c.top_k = 2;
  c.lambda0 = 0.3;
  c.lambda1 = 0.35;
  c.lambda2 = 0.35;
  c.epochs = 200;
  c.seed = seed;
  return c;
}

TrainOptions quiet() {
  TrainOptions o;
  o.policy = ExecPolicy::kParallel;
  return o;
}

double test_accuracy(const TrainConfig& c, const Dataset& tr, const Dataset& te) {
  return evaluate(train(c, tr, te, quiet()).state.params, te).accuracy;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_correctness() {
  Rng rng(2024);
  double worst = 0.0;
  std::string worst_at;
  for (int i = 0; i < 20; ++i) {
    const auto mode = i % 2 ? TaskMode::kRegression : TaskMode::kClassification;
    const auto act = (i / 2) % 2 ? SimActivation::kReciprocal : SimActivation::kLogRatio;
    auto c = testing::small_config(mode, act);
    const std::size_t classes = mode == TaskMode::kRegression ? 1 : 2;
    const auto p = testing::random_params(c, 8, classes, rng);
    std::vector<TokenEmbeddingSample> batch;
    for (std::size_t s = 0; s < 4; ++s) {
      batch.push_back(testing::random_sample(rng, 8, 1 + rng.index(6), static_cast<std::uint32_t>(classes), s));
    }
    const auto report = grad_check(p, testing::refs(batch), c, 1e-5, 1e-4);
    for (const auto& t : report.tensors) {
      if (t.max_rel_error > worst) {
        worst = t.max_rel_error;
        worst_at = "instance " + std::to_string(i) + " " + t.name;
      }
    }
  }
  return {worst < 1e-4, "max rel error " + fmt(worst, 3) + " (" + worst_at + "), tol 1e-4"};
}

// --- 2 ---------------------------------------------------------------------

Outcome learning() {
  std::vector<double> acc;
  for (auto seed : kSeeds) {
    auto [tr, te] = two_class_task(6.0, seed);
    acc.push_back(test_accuracy(learning_config(seed), tr, te));
  }
  const bool pass = std::all_of(acc.begin(), acc.end(), [](double a) { return a >= 0.95; });
  return {pass, "test accuracy per seed " + join(acc) + ", need >= 0.95 on 5/5"};
}

// --- 3 ---------------------------------------------------------------------

Outcome lambda_behavior() {
  auto config_for = [](double l0, std::uint64_t seed) {
    auto c = learning_config(seed);
    c.lambda0 = l0;
    c.lambda1 = c.lambda2 = (1.0 - l0) / 2.0;
    return c;
  };
  std::vector<double> a0, a3, a10;
  for (auto seed : kSeeds) {
    auto [tr, te] = two_class_task(2.0, seed);
    a0.push_back(test_accuracy(config_for(0.0, seed), tr, te));
    a3.push_back(test_accuracy(config_for(0.3, seed), tr, te));
    a10.push_back(test_accuracy(config_for(1.0, seed), tr, te));
  }
  bool near_chance = true;
  int beats_zero = 0, beats_one = 0;
  for (std::size_t i = 0; i < a0.size(); ++i) {
    near_chance = near_chance && std::abs(a0[i] - 0.5) <= 0.1;
    beats_zero += a3[i] > a0[i];
    beats_one += a3[i] > a10[i];
  }
  const bool pass = near_chance && beats_zero == 5 && beats_one >= 3;
  return {pass, "acc(l0=0) " + join(a0) + " acc(l0=0.3) " + join(a3) + " acc(l0=1) " + join(a10) +
                    "; l0=0 within 0.1 of chance: " + (near_chance ? "yes" : "no") +
                    ", 0.3 > 0 on " + std::to_string(beats_zero) + "/5 (need 5), 0.3 > 1 on " +
                    std::to_string(beats_one) + "/5 (need 3)"};
}

// --- 4 ---------------------------------------------------------------------

bool monotone_with_slack(const std::vector<double>& v, bool increasing) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = increasing ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (step < 0.0) {
      if (-step > 0.02) return false;
      ++inversions;
    }
  }
  return inversions <= 1;
}

Outcome faithfulness_trends() {
  auto [tr, te] = two_class_task(6.0, kSeeds[0]);
  const auto model = train(learning_config(kSeeds[0]), tr, te, quiet()).state.params;
  const auto report = faithfulness_report(model, te, kDefaultKValues);
  std::vector<double> comp_top, suff_top;
  for (double k : kDefaultKValues) {
    comp_top.push_back(report.cell(k, Direction::kTop).mean_comp);
    suff_top.push_back(report.cell(k, Direction::kTop).mean_suff);
  }
  double worst_identity = 0.0;
  for (const auto& r : report.rows) worst_identity = std::max(worst_identity, std::abs(r.comp + r.suff - 1.0));
  const bool comp_ok = monotone_with_slack(comp_top, true);
  const bool suff_ok = monotone_with_slack(suff_top, false);
  const bool identity_ok = !report.rows.empty() && worst_identity <= 1e-12;
  return {comp_ok && suff_ok && identity_ok,
          "top-k Comp " + join(comp_top) + (comp_ok ? " nondecreasing" : " NOT nondecreasing") + ", Suff " +
              join(suff_top) + (suff_ok ? " nonincreasing" : " NOT nonincreasing") + ", max |Comp+Suff-1| " +
              fmt(worst_identity, 3) + " over " + std::to_string(report.rows.size()) + " rows (skipped " +
              std::to_string(report.skipped_zero_confidence) + ")"};
}

// --- 5 ---------------------------------------------------------------------

Outcome uniqueness_vs_k() {
  std::vector<double> u1, u10;
  for (auto seed : kSeeds) {
    auto [tr, te] = two_class_task(6.0, seed);
    for (std::size_t k : {std::size_t{1}, std::size_t{10}}) {
      auto c = learning_config(seed);
      c.num_prototypes = 20;
      c.top_k = k;
      const auto params = train(c, tr, te, quiet()).state.params;
      (k == 1 ? u1 : u10).push_back(uniqueness(project_prototypes(params, tr)));
    }
  }
  int holds = 0;
  for (std::size_t i = 0; i < u1.size(); ++i) holds += u1[i] >= u10[i];
  return {holds == 5, "uniqueness K=1 " + join(u1) + " vs K=10 " + join(u10) + ", holds on " +
                          std::to_string(holds) + "/5 (need 5)"};
}

// --- 6 ---------------------------------------------------------------------

Outcome projection_oracle() {
  auto [tr, te] = two_class_task(6.0, 7);
  Dataset set = tr;
  set.samples.resize(100);
  // Duplicates with shuffled ids exercise the tie rule.
  Rng rng(7);
  for (std::size_t i = 0; i < 10; ++i) set.samples[90 + i].tokens = set.samples[i * 2].tokens;
  for (std::size_t i = 0; i < 10; ++i) set.samples[90 + i].label = set.samples[i * 2].label;
  std::vector<std::uint64_t> ids(100);
  for (std::size_t i = 0; i < 100; ++i) ids[i] = i;
  rng.shuffle(std::span<std::uint64_t>(ids));
  for (std::size_t i = 0; i < 100; ++i) set.samples[i].sample_id = ids[i];

  auto c = learning_config(7);
  c.epochs = 20;
  const auto params = train(c, set, set, quiet()).state.params;
  const auto proj = project_prototypes(params, set);

  std::size_t matches = 0;
  for (std::size_t j = 0; j < params.num_prototypes(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const auto& s = set.samples[i];
      if (s.label != params.proto_class[j]) continue;
      const auto pooled = attend(s.tokens, params).pooled;
      double d = 0.0;
      for (std::size_t k = 0; k < pooled.size(); ++k) {
        const double diff = pooled[k] - params.prototypes(j, k);
        d += diff * diff;
      }
      if (d < best || (d == best && s.sample_id < set.samples[arg].sample_id)) {
        best = d;
        arg = i;
      }
    }
    const auto& got = proj.prototypes[j];
    matches += got.sample_index == arg && got.dist_sq == best && got.sample_id == set.samples[arg].sample_id;
  }
  return {matches == params.num_prototypes(),
          std::to_string(matches) + "/" + std::to_string(params.num_prototypes()) +
              " prototypes match the brute-force argmin exactly on 100 samples"};
}

// --- 7 ---------------------------------------------------------------------

Outcome distribution_laws() {
  auto [tr, te] = two_class_task(6.0, 11);
  auto c = learning_config(11);
  c.epochs = 20;
  const auto params = train(c, tr, te, quiet()).state.params;
  const auto enc = pooled_encodings(tr, params, ExecPolicy::kParallel);

  double worst_sum = 0.0, worst_ratio = 0.0;
  std::vector<ClusterDistribution> dists;
  for (std::size_t j = 0; j < params.num_prototypes(); ++j) {
    dists.push_back(cluster_distribution(params, tr, enc, j));
    double s = 0.0;
    for (double p : dists.back().pi) s += p;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  Rng rng(11);
  for (int pair = 0; pair < 1000; ++pair) {
    const auto& d = dists[rng.index(dists.size())];
    const std::size_t a = rng.index(d.pi.size()), b = rng.index(d.pi.size());
    const double lhs = d.pi[a] / d.pi[b];
    const double rhs = d.distance[b] / d.distance[a];
    worst_ratio = std::max(worst_ratio, std::abs(lhs - rhs) / std::abs(rhs));
  }
  return {worst_sum <= 1e-12 && worst_ratio <= 1e-9,
          "max |sum pi - 1| " + fmt(worst_sum, 3) + " (tol 1e-12), max ratio-law rel error " + fmt(worst_ratio, 3) +
              " over 1000 pairs (tol 1e-9)"};
}

// --- 8 ---------------------------------------------------------------------

Outcome balanced_auxiliary_weights() {
  auto final_loss = [](double l1, double l2, std::uint64_t seed) {
    auto [tr, te] = two_class_task(2.0, seed);
    auto c = learning_config(seed);
    c.lambda0 = 0.3;
    c.lambda1 = l1;
    c.lambda2 = l2;
    return train(c, tr, te, quiet()).history.epochs.back().total;
  };
  std::vector<double> equal, pull, push;
  int holds = 0;
  for (auto seed : kSeeds) {
    equal.push_back(final_loss(0.35, 0.35, seed));
    pull.push_back(final_loss(0.6, 0.1, seed));
    push.push_back(final_loss(0.1, 0.6, seed));
    holds += equal.back() <= pull.back() && equal.back() <= push.back();
  }
  return {holds >= 3, "final training loss (0.35,0.35) " + join(equal) + " (0.6,0.1) " + join(pull) + " (0.1,0.6) " +
                          join(push) + "; equal lowest on " + std::to_string(holds) + "/5 (need 3)"};
}

// --- 9 ---------------------------------------------------------------------

Outcome formats_and_resume() {
  SynthSpec spec;
  spec.samples_per_class = 40;
  spec.classes = 3;
  spec.with_texts = true;
  spec.seed = 13;
  const auto ds = synth(spec);
  const auto bytes = encode_dataset(ds);
  const bool plm1 = decode_dataset(bytes) == ds && encode_dataset(decode_dataset(bytes)) == bytes;

  auto [tr, te] = split_dataset(ds, 90);
  auto c = learning_config(13);
  c.num_prototypes = 6;
  c.epochs = 10;
  const auto full = train(c, tr, te, quiet());
  const auto ckpt = encode_checkpoint(full.state);
  const bool plmc = decode_checkpoint(ckpt) == full.state && encode_checkpoint(decode_checkpoint(ckpt)) == ckpt;

  auto half = c;
  half.epochs = 4;
  auto mid = decode_checkpoint(encode_checkpoint(train(half, tr, te, quiet()).state));
  mid.config.epochs = 10;
  const auto resumed = resume(mid, tr, te, quiet());
  bool same_history = resumed.history.epochs.size() == 6;
  for (std::size_t i = 0; same_history && i < 6; ++i) {
    same_history = resumed.history.epochs[i] == full.history.epochs[i + 4];
  }
  const bool resume_ok = resumed.state == full.state && same_history;
  return {plm1 && plmc && resume_ok, std::string("PLM1 round trip ") + (plm1 ? "exact" : "MISMATCH") +
                                         ", PLMC round trip " + (plmc ? "exact" : "MISMATCH") +
                                         ", resume after 4/10 epochs " + (resume_ok ? "identical" : "DIVERGED")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"gradient correctness", gradient_correctness}},
      {2, {"learning on a separable task", learning}},
      {3, {"accuracy vs classification weight", lambda_behavior}},
      {4, {"faithfulness trends", faithfulness_trends}},
      {5, {"uniqueness vs K", uniqueness_vs_k}},
      {6, {"projection brute-force oracle", projection_oracle}},
      {7, {"soft-clustering distribution laws", distribution_laws}},
      {8, {"balanced cohesion/separation weights", balanced_auxiliary_weights}},
      {9, {"format round trips and resume", formats_and_resume}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  set_num_threads(1);
  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = entry.second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Runtime budgets: 30 s for the gradient check, 2 min for learning.
    if (id == 1 && secs >= 30.0) out = {false, out.detail + "; runtime over 30 s"};
    if (id == 2 && secs >= 120.0) out = {false, out.detail + "; runtime over 2 min"};
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", id, entry.first,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !out.pass;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
