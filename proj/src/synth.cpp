#include "protohead/synth.hpp"

#include <cmath>

#include "protohead/errors.hpp"
#include "protohead/rng.hpp"

namespace protohead {

Dataset synth(const SynthSpec& spec) {
  require(spec.dim >= 1, ErrorKind::kConfig, "synth: D must be >= 1");
  require(spec.classes >= 1, ErrorKind::kConfig, "synth: need at least one class");
  require(spec.classes <= spec.dim, ErrorKind::kConfig, "synth: class count cannot exceed D");
  require(spec.samples_per_class >= 1, ErrorKind::kConfig, "synth: need at least one sample");
  require(spec.min_tokens >= 1 && spec.min_tokens <= spec.max_tokens, ErrorKind::kConfig,
          "synth: token range must satisfy 1 <= min <= max");
  require(std::isfinite(spec.separation) && spec.separation >= 0.0, ErrorKind::kConfig,
          "synth: separation must be >= 0");
  require(spec.noise_std >= 0.0, ErrorKind::kConfig, "synth: noise_std must be >= 0");

  Rng rng(spec.seed);
  const double offset = spec.separation / std::sqrt(2.0);
  Dataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.classes;
  ds.mode = TaskMode::kClassification;
  const std::size_t total = spec.samples_per_class * spec.classes;
  ds.samples.reserve(total);
  const std::size_t span = spec.max_tokens - spec.min_tokens + 1;
  for (std::size_t i = 0; i < total; ++i) {
    TokenEmbeddingSample s;
    s.sample_id = i;
    s.label = static_cast<std::uint32_t>(i % spec.classes);
    const std::size_t t_count = spec.min_tokens + static_cast<std::size_t>(rng.index(span));
    s.tokens = Matrix(t_count, spec.dim);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::uint32_t d = 0; d < spec.dim; ++d) {
        const double mean = (spec.classes > 1 && d == s.label) ? offset : 0.0;
        // Stored as float on disk; keep the in-memory copy identical.
        s.tokens(t, d) = static_cast<float>(mean + spec.noise_std * rng.normal());
      }
    }
    if (spec.with_texts) {
      std::vector<std::string> texts;
      for (std::size_t t = 0; t < t_count; ++t) {
        texts.push_back("c" + std::to_string(s.label) + "_t" + std::to_string(t));
      }
      s.token_texts = std::move(texts);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::size_t count) {
  require(count <= dataset.size(), ErrorKind::kConfig, "split point beyond dataset size");
  Dataset a, b;
  a.dim = b.dim = dataset.dim;
  a.num_classes = b.num_classes = dataset.num_classes;
  a.mode = b.mode = dataset.mode;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto s = dataset.samples[i];
    auto& dst = i < count ? a : b;
    s.sample_id = dst.samples.size();
    dst.samples.push_back(std::move(s));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace protohead
