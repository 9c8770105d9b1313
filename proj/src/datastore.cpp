#include "protohead/datastore.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "bytes.hpp"
#include "protohead/errors.hpp"
#include "protohead/rng.hpp"

namespace protohead {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorKind::kIo, "cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::kIo, "read failed on " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.is_open(), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), ErrorKind::kIo, "write failed on " + path.string());
}

}  // namespace detail

namespace {

constexpr std::uint32_t kFlagRegression = 1u << 0;
constexpr std::uint32_t kFlagTexts = 1u << 1;

}  // namespace

bool Dataset::has_texts() const noexcept {
  return !samples.empty() && samples.front().token_texts.has_value();
}

void validate_dataset(const Dataset& dataset) {
  require(!dataset.samples.empty(), ErrorKind::kFormat, "dataset has no samples");
  require(dataset.dim >= 1, ErrorKind::kValidation, "dataset dimension D must be >= 1");
  if (dataset.mode == TaskMode::kRegression) {
    require(dataset.num_classes == 1, ErrorKind::kValidation, "regression datasets must declare |C| = 1");
  } else {
    require(dataset.num_classes >= 1, ErrorKind::kValidation, "class count must be >= 1");
  }
  const bool texts = dataset.has_texts();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    const std::string where = "sample " + std::to_string(i);
    require(s.num_tokens() >= 1, ErrorKind::kValidation, where + ": T must be >= 1");
    require(s.tokens.cols() == dataset.dim, ErrorKind::kValidation,
            where + ": embedding width " + std::to_string(s.tokens.cols()) + " != D " + std::to_string(dataset.dim));
    require(all_finite(s.tokens.flat()), ErrorKind::kNumeric, where + ": non-finite embedding");
    if (dataset.mode == TaskMode::kClassification) {
      require(s.label < dataset.num_classes, ErrorKind::kValidation,
              where + ": label " + std::to_string(s.label) + " >= |C| " + std::to_string(dataset.num_classes));
    } else {
      require(std::isfinite(s.target), ErrorKind::kNumeric, where + ": non-finite regression target");
    }
    require(s.token_texts.has_value() == texts, ErrorKind::kValidation,
            where + ": token texts must be present on all samples or none");
    if (s.token_texts) {
      require(s.token_texts->size() == s.num_tokens(), ErrorKind::kValidation,
              where + ": token text count != T");
    }
  }
}

std::size_t plm1_sample_bytes(const TokenEmbeddingSample& sample, std::uint32_t dim, bool with_texts) {
  std::size_t n = 4 + 4 + sample.num_tokens() * dim * 4;
  if (with_texts && sample.token_texts) {
    for (const auto& t : *sample.token_texts) n += 4 + t.size();
  }
  return n;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  validate_dataset(dataset);
  const bool texts = dataset.has_texts();
  std::uint32_t flags = 0;
  if (dataset.mode == TaskMode::kRegression) flags |= kFlagRegression;
  if (texts) flags |= kFlagTexts;

  detail::ByteWriter w;
  w.put_bytes("PLM1");
  w.put_u32(kPlm1Version);
  w.put_u32(flags);
  w.put_u32(dataset.dim);
  w.put_u32(dataset.num_classes);
  w.put_u64(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    if (dataset.mode == TaskMode::kRegression) {
      w.put_f32(static_cast<float>(s.target));
    } else {
      w.put_u32(s.label);
    }
    w.put_u32(static_cast<std::uint32_t>(s.num_tokens()));
    for (double v : s.tokens.flat()) {
      const float f = static_cast<float>(v);
      require(std::isfinite(f), ErrorKind::kNumeric, "embedding overflows float32");
      w.put_f32(f);
    }
    if (texts) {
      for (const auto& t : *s.token_texts) {
        w.put_u32(static_cast<std::uint32_t>(t.size()));
        w.put_bytes(t);
      }
    }
  }
  return std::move(w.buffer());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  require(r.remaining() >= 4 && r.get_bytes(4, "magic") == "PLM1", ErrorKind::kFormat, "bad magic");
  const std::uint32_t version = r.get_u32("version");
  require(version == kPlm1Version, ErrorKind::kFormat, "unsupported PLM1 version " + std::to_string(version));
  const std::uint32_t flags = r.get_u32("flags");
  require((flags & ~(kFlagRegression | kFlagTexts)) == 0, ErrorKind::kFormat, "unknown flag bits set");

  Dataset ds;
  ds.mode = (flags & kFlagRegression) ? TaskMode::kRegression : TaskMode::kClassification;
  const bool texts = (flags & kFlagTexts) != 0;
  ds.dim = r.get_u32("D");
  ds.num_classes = r.get_u32("|C|");
  const std::uint64_t n = r.get_u64("num_samples");
  require(ds.dim >= 1, ErrorKind::kFormat, "header declares D = 0");

  for (std::uint64_t i = 0; i < n; ++i) {
    TokenEmbeddingSample s;
    s.sample_id = i;
    if (ds.mode == TaskMode::kRegression) {
      s.target = r.get_f32("regression target");
    } else {
      s.label = r.get_u32("label");
    }
    const std::uint32_t t = r.get_u32("token count");
    require(t >= 1, ErrorKind::kFormat, "sample " + std::to_string(i) + " declares T = 0");
    const std::size_t count = static_cast<std::size_t>(t) * ds.dim;
    r.need(count * 4, "embeddings");
    std::vector<double> data(count);
    for (auto& v : data) v = r.get_f32("embeddings");
    s.tokens = Matrix::from_data(t, ds.dim, std::move(data));
    if (texts) {
      std::vector<std::string> tt;
      tt.reserve(t);
      for (std::uint32_t k = 0; k < t; ++k) {
        const std::uint32_t len = r.get_u32("token text length");
        tt.push_back(r.get_bytes(len, "token text"));
      }
      s.token_texts = std::move(tt);
    }
    ds.samples.push_back(std::move(s));
  }
  require(r.remaining() == 0, ErrorKind::kFormat,
          "trailing bytes after last sample at offset " + std::to_string(r.offset()));
  validate_dataset(ds);
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  const auto bytes = encode_dataset(dataset);
  detail::write_file_bytes(path, bytes);
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(detail::read_file_bytes(path)); }

std::vector<Batch> make_batches(std::size_t num_samples, std::size_t batch_size, Rng& rng, bool shuffle) {
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) rng.shuffle(std::span<std::size_t>(order));
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t end = std::min(num_samples, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
  Rng rng(seed);
  return make_batches(dataset.size(), batch_size, rng, shuffle);
}

}  // namespace protohead
