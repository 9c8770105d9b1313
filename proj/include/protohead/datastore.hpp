#pragma once

// PLM1 token-embedding dataset files.
//
// Layout (little-endian throughout):
//
//   offset  size  field
//   0       4     magic "PLM1"
//   4       4     version (u32) = 1
//   8       4     flags (u32): bit 0 regression mode, bit 1 token texts present
//   12      4     D (u32), embedding dimension
//   16      4     |C| (u32), class count (1 in regression mode)
//   20      8     num_samples (u64)
//   28      ...   samples
//
// Each sample record:
//   label   u32 (classification) or f32 target (regression)
//   T       u32, token count
//   T*D     f32 row-major embeddings
//   texts   only when flag bit 1 is set: T strings, each a u32 byte length
//           followed by UTF-8 bytes
//
// Embeddings are widened to double on read and narrowed to float on write, so
// a dataset read from disk always round-trips bit-exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protohead/numerics.hpp"

namespace protohead {

class Rng;

enum class TaskMode : std::uint8_t { kClassification, kRegression };

inline constexpr std::size_t kPlm1HeaderBytes = 28;
inline constexpr std::uint32_t kPlm1Version = 1;

struct TokenEmbeddingSample {
  std::uint64_t sample_id = 0;
  Matrix tokens;  // T x D
  std::uint32_t label = 0;
  double target = 0.0;  // regression target; unused in classification mode
  std::optional<std::vector<std::string>> token_texts;

  std::size_t num_tokens() const noexcept { return tokens.rows(); }
  bool operator==(const TokenEmbeddingSample&) const = default;
};

struct Dataset {
  std::vector<TokenEmbeddingSample> samples;
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 0;
  TaskMode mode = TaskMode::kClassification;

  std::size_t size() const noexcept { return samples.size(); }
  bool has_texts() const noexcept;
  bool operator==(const Dataset&) const = default;
};

/// Checks every dataset invariant; throws Error on the first violation.
void validate_dataset(const Dataset& dataset);

/// Serialized byte count of one sample record.
std::size_t plm1_sample_bytes(const TokenEmbeddingSample& sample, std::uint32_t dim, bool with_texts);

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

using Batch = std::vector<std::size_t>;

std::vector<Batch> make_batches(std::size_t num_samples, std::size_t batch_size, Rng& rng, bool shuffle);
std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle);

}  // namespace protohead
