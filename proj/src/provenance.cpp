#include "protohead/provenance.hpp"

#include <cstdio>

namespace protohead {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json decisions_in_force() {
  return nlohmann::json::array({
      "float64 training math; float32 embeddings on disk",
      "similarity log((d2+1)/(d2+eps_sim)) or 1/(1+d2)",
      "classifier W_h has no bias",
      "top-K selections frozen in backward; ties to lower prototype index",
      "losses averaged over the batch",
      "regression mode: separation term fixed at 0",
      "confidence = predicted-class logit",
      "k% set size = max(1, floor(kN/100))",
      "space view nsim = 1/(1+L2)",
      "projection-distance normalizer = mean pairwise L2 over <=1000 seeded encodings",
      "soft clustering over the full training set; zero distances share mass uniformly",
  });
}

nlohmann::json make_provenance(std::string_view command, const nlohmann::json& merged_config, std::uint64_t seed) {
  return nlohmann::json{
      {"command", command},
      {"config", merged_config},
      {"config_hash", fnv1a_hex(merged_config.dump())},
      {"seed", seed},
      {"decisions", decisions_in_force()},
  };
}

std::string provenance_comment(const nlohmann::json& provenance) {
  std::string out;
  for (const auto& [key, value] : provenance.items()) {
    out += "# " + key + ": " + value.dump() + "\n";
  }
  return out;
}

}  // namespace protohead
