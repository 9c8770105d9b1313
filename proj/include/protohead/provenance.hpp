#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace protohead {

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Modeling choices that shape every output file.
nlohmann::json decisions_in_force();

/// Provenance record: command, merged config, its hash, seed, and decisions.
nlohmann::json make_provenance(std::string_view command, const nlohmann::json& merged_config, std::uint64_t seed);

/// The same record as "# key: value" comment lines for CSV outputs.
std::string provenance_comment(const nlohmann::json& provenance);

}  // namespace protohead
