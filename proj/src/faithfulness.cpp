#include "protohead/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "protohead/errors.hpp"

namespace protohead {

const char* to_string(Direction d) { return d == Direction::kTop ? "top" : "bottom"; }

std::size_t k_percent_count(double k_percent, std::size_t num_prototypes) {
  require(k_percent > 0.0 && k_percent <= 100.0, ErrorKind::kConfig,
          "k_percent must lie in (0, 100], got " + std::to_string(k_percent));
  const auto raw = static_cast<std::size_t>(std::floor(k_percent * static_cast<double>(num_prototypes) / 100.0));
  return std::min(num_prototypes, std::max<std::size_t>(1, raw));
}

IndexSet top_k_prototypes(std::span<const double> sim, double k_percent, Direction which) {
  const std::size_t count = k_percent_count(k_percent, sim.size());
  IndexSet idx(sim.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sim[a] != sim[b]) return which == Direction::kTop ? sim[a] > sim[b] : sim[a] < sim[b];
                      return a < b;
                    });
  idx.resize(count);
  return idx;
}

Confidence confidence(const ForwardTrace& trace) {
  Confidence c;
  c.predicted = argmax(trace.logits);
  c.logit = trace.logits[c.predicted];
  return c;
}

namespace {

double confidence_drop(const ForwardTrace& trace, const HeadParameters& params, std::span<const std::size_t> mask) {
  const auto conf = confidence(trace);
  require(conf.logit != 0.0, ErrorKind::kUndefinedConfidence, "predicted-class logit is 0");
  const double masked = logits(trace.sim, params, mask)[conf.predicted];
  return (conf.logit - masked) / conf.logit;
}

IndexSet complement(std::span<const std::size_t> set, std::size_t n) {
  std::vector<char> in(n, 0);
  for (auto j : set) {
    require(j < n, ErrorKind::kIndex, "prototype index out of range");
    in[j] = 1;
  }
  IndexSet out;
  for (std::size_t j = 0; j < n; ++j) {
    if (!in[j]) out.push_back(j);
  }
  return out;
}

}  // namespace

double comp(const ForwardTrace& trace, const HeadParameters& params, std::span<const std::size_t> proto_set) {
  return confidence_drop(trace, params, proto_set);
}

double suff(const ForwardTrace& trace, const HeadParameters& params, std::span<const std::size_t> proto_set) {
  const auto rest = complement(proto_set, params.num_prototypes());
  return confidence_drop(trace, params, rest);
}

const FaithfulnessCell& FaithfulnessReport::cell(double k_percent, Direction direction) const {
  for (const auto& c : cells) {
    if (c.k_percent == k_percent && c.direction == direction) return c;
  }
  fail(ErrorKind::kIndex, "no faithfulness cell for k = " + std::to_string(k_percent));
}

FaithfulnessReport faithfulness_report(const HeadParameters& params, const Dataset& dataset,
                                       const std::vector<double>& k_values, ExecPolicy policy) {
  require(!dataset.samples.empty(), ErrorKind::kConfig, "faithfulness needs a nonempty dataset");
  for (double k : k_values) k_percent_count(k, params.num_prototypes());

  std::vector<const TokenEmbeddingSample*> refs;
  for (const auto& s : dataset.samples) refs.push_back(&s);
  const auto traces = forward_batch(refs, params, policy);

  FaithfulnessReport report;
  report.k_values = k_values;
  const Direction dirs[] = {Direction::kTop, Direction::kBottom};
  for (double k : k_values) {
    for (auto dir : dirs) report.cells.push_back({k, dir, 0.0, 0.0, 0});
  }

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[i];
    const auto& tr = traces[i];
    const auto conf = confidence(tr);
    if (conf.logit == 0.0) {
      ++report.skipped_zero_confidence;
      continue;
    }
    std::size_t cell = 0;
    for (double k : k_values) {
      for (auto dir : dirs) {
        const auto set = top_k_prototypes(tr.sim, k, dir);
        FaithfulnessRow row;
        row.sample_id = s.sample_id;
        row.k_percent = k;
        row.direction = dir;
        row.comp = comp(tr, params, set);
        row.suff = suff(tr, params, set);
        row.pr = conf.logit;
        row.pred = conf.predicted;
        row.label = params.mode == TaskMode::kClassification ? static_cast<double>(s.label) : s.target;
        auto& c = report.cells[cell++];
        c.mean_comp += row.comp;
        c.mean_suff += row.suff;
        ++c.count;
        report.rows.push_back(row);
      }
    }
  }
  for (auto& c : report.cells) {
    if (c.count > 0) {
      c.mean_comp /= static_cast<double>(c.count);
      c.mean_suff /= static_cast<double>(c.count);
    }
  }
  return report;
}

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_faithfulness_csv(std::ostream& os, const FaithfulnessReport& report) {
  os << "# confidence = predicted-class logit; removal zeroes W_h rows; k% count = max(1, floor(kN/100))\n";
  os << "# samples skipped for zero confidence: " << report.skipped_zero_confidence << '\n';
  os << "sample_id,k,direction,comp,suff,pr,pred,label\n";
  for (const auto& r : report.rows) {
    os << r.sample_id << ',' << g17(r.k_percent) << ',' << to_string(r.direction) << ',' << g17(r.comp) << ','
       << g17(r.suff) << ',' << g17(r.pr) << ',' << r.pred << ',' << g17(r.label) << '\n';
  }
}

void write_faithfulness_summary_csv(std::ostream& os, const FaithfulnessReport& report) {
  os << "k,direction,mean_comp,mean_suff,count\n";
  for (const auto& c : report.cells) {
    os << g17(c.k_percent) << ',' << to_string(c.direction) << ',' << g17(c.mean_comp) << ',' << g17(c.mean_suff)
       << ',' << c.count << '\n';
  }
}

}  // namespace protohead
