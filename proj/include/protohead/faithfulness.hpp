#pragma once

// Prototype-level comprehensiveness and sufficiency.
//
// Model confidence is the raw logit of the predicted class. Removing a set of
// prototypes zeroes their rows of W_h; since the classifier has no bias, the
// logit decomposes over prototypes and Comp(A) + Suff(A) = 1 for every set A.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "protohead/datastore.hpp"
#include "protohead/kernels.hpp"
#include "protohead/loss.hpp"
#include "protohead/model.hpp"

namespace protohead {

enum class Direction { kTop, kBottom };

const char* to_string(Direction d);

/// Number of prototypes in a k% set: max(1, floor(k * N / 100)).
std::size_t k_percent_count(double k_percent, std::size_t num_prototypes);

/// The k% most (top) or least (bottom) similar prototypes, ties to the lower index.
IndexSet top_k_prototypes(std::span<const double> sim, double k_percent, Direction which);

struct Confidence {
  std::size_t predicted = 0;
  double logit = 0.0;  // pr, the predicted-class logit
};

Confidence confidence(const ForwardTrace& trace);

/// (pr - pr with `proto_set` removed) / pr.
double comp(const ForwardTrace& trace, const HeadParameters& params, std::span<const std::size_t> proto_set);
/// (pr - pr with only `proto_set` retained) / pr.
double suff(const ForwardTrace& trace, const HeadParameters& params, std::span<const std::size_t> proto_set);

struct FaithfulnessRow {
  std::uint64_t sample_id = 0;
  double k_percent = 0.0;
  Direction direction = Direction::kTop;
  double comp = 0.0;
  double suff = 0.0;
  double pr = 0.0;
  std::size_t pred = 0;
  double label = 0.0;
};

struct FaithfulnessCell {
  double k_percent = 0.0;
  Direction direction = Direction::kTop;
  double mean_comp = 0.0;
  double mean_suff = 0.0;
  std::size_t count = 0;
};

struct FaithfulnessReport {
  std::vector<double> k_values;
  std::vector<FaithfulnessCell> cells;  // k-major, top before bottom
  std::vector<FaithfulnessRow> rows;
  std::size_t skipped_zero_confidence = 0;

  const FaithfulnessCell& cell(double k_percent, Direction direction) const;
};

inline const std::vector<double> kDefaultKValues = {1, 5, 10, 20, 50};

FaithfulnessReport faithfulness_report(const HeadParameters& params, const Dataset& dataset,
                                       const std::vector<double>& k_values = kDefaultKValues,
                                       ExecPolicy policy = ExecPolicy::kParallel);

void write_faithfulness_csv(std::ostream& os, const FaithfulnessReport& report);
void write_faithfulness_summary_csv(std::ostream& os, const FaithfulnessReport& report);

}  // namespace protohead
