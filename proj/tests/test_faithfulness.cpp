#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "protohead/errors.hpp"
#include "protohead/faithfulness.hpp"
#include "protohead/rng.hpp"
#include "protohead/synth.hpp"
#include "test_support.hpp"

using namespace protohead;
using namespace protohead::testing;

namespace {

// Two prototypes, two classes, with a trace built directly from `sim`.
std::pair<HeadParameters, ForwardTrace> two_prototype_case(Vector sim, Matrix w_h) {
  TrainConfig c;
  c.num_prototypes = 2;
  c.top_k = 1;
  auto p = init_params(c, 1, 2, 0);
  p.w_h = std::move(w_h);
  ForwardTrace t;
  t.sim = std::move(sim);
  t.logits = logits(t.sim, p);
  return {p, t};
}

}  // namespace

TEST_CASE("k% set sizes") {
  CHECK(k_percent_count(1, 10) == 1);
  CHECK(k_percent_count(5, 10) == 1);
  CHECK(k_percent_count(20, 10) == 2);
  CHECK(k_percent_count(50, 10) == 5);
  CHECK(k_percent_count(100, 10) == 10);
  CHECK(k_percent_count(10, 200) == 20);
  CHECK_THROWS_AS(k_percent_count(0, 10), Error);
  CHECK_THROWS_AS(k_percent_count(101, 10), Error);
}

TEST_CASE("top and bottom prototype sets") {
  const Vector sim{0.5, 3.0, 1.0, 3.0, 0.1, 2.0, 0.1, 0.7, 0.9, 1.5};
  CHECK(top_k_prototypes(sim, 20, Direction::kTop) == IndexSet{1, 3});
  CHECK(top_k_prototypes(sim, 30, Direction::kTop) == IndexSet{1, 3, 5});
  CHECK(top_k_prototypes(sim, 20, Direction::kBottom) == IndexSet{4, 6});
  CHECK(top_k_prototypes(sim, 1, Direction::kTop) == IndexSet{1});
}

TEST_CASE("comprehensiveness and sufficiency examples") {
  {
    auto [p, t] = two_prototype_case({1, 1}, Matrix::from_data(2, 2, {1, 0, 1, 0}));
    const IndexSet first{0};
    CHECK(comp(t, p, first) == 0.5);
    CHECK(suff(t, p, first) == 0.5);
  }
  {
    auto [p, t] = two_prototype_case({1, 3}, Matrix::from_data(2, 2, {1, 0, 1, 0}));
    const IndexSet second{1};
    CHECK(suff(t, p, second) == 0.25);
    CHECK(comp(t, p, second) == 0.75);
    const IndexSet both{0, 1};
    CHECK(comp(t, p, both) == 1.0);
    CHECK(suff(t, p, both) == 0.0);
  }
  {
    auto [p, t] = two_prototype_case({1, 1}, Matrix::from_data(2, 2, {0, 0, 0, 0}));
    try {
      comp(t, p, IndexSet{0});
      FAIL("expected undefined confidence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUndefinedConfidence);
    }
  }
}

TEST_CASE("comp + suff = 1 for arbitrary sets") {
  Rng rng(61);
  TrainConfig c;
  c.num_prototypes = 12;
  c.top_k = 2;
  const auto p = random_params(c, 6, 3, rng);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_sample(rng, 6, 1 + rng.index(8), 3);
    const auto t = forward(s, p);
    if (std::abs(confidence(t).logit) < 1e-3) continue;
    IndexSet set;
    for (std::size_t j = 0; j < 12; ++j) {
      if (rng.index(3) == 0) set.push_back(j);
    }
    const double total = comp(t, p, set) + suff(t, p, set);
    REQUIRE(std::abs(total - 1.0) <= 1e-9);
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("faithfulness report layout") {
  SynthSpec spec;
  spec.samples_per_class = 15;
  spec.dim = 6;
  const auto ds = synth(spec);
  TrainConfig c;
  const auto p = init_params(c, ds.dim, ds.num_classes, 3);
  const auto report = faithfulness_report(p, ds);
  CHECK(report.k_values == kDefaultKValues);
  REQUIRE(report.cells.size() == 10);
  CHECK(report.cells[0].direction == Direction::kTop);
  CHECK(report.cells[1].direction == Direction::kBottom);
  CHECK(report.cells[2].k_percent == 5);
  CHECK(report.rows.size() == 10 * (ds.samples.size() - report.skipped_zero_confidence));
  for (const auto& cell : report.cells) {
    CHECK(cell.mean_comp + cell.mean_suff == doctest::Approx(1.0));
  }
  CHECK(&report.cell(50, Direction::kBottom) == &report.cells[9]);

  std::ostringstream rows, summary;
  write_faithfulness_csv(rows, report);
  write_faithfulness_summary_csv(summary, report);
  CHECK(rows.str().find("sample_id,k,direction,comp,suff,pr,pred,label") != std::string::npos);
}

TEST_CASE("zero-confidence samples are skipped, not averaged") {
  SynthSpec spec;
  spec.samples_per_class = 4;
  spec.dim = 4;
  const auto ds = synth(spec);
  TrainConfig c;
  auto p = init_params(c, ds.dim, ds.num_classes, 3);
  for (double& w : p.w_h.flat()) w = 0.0;
  const auto report = faithfulness_report(p, ds);
  CHECK(report.skipped_zero_confidence == 8);
  CHECK(report.rows.empty());
  for (const auto& cell : report.cells) CHECK(cell.count == 0);
}
