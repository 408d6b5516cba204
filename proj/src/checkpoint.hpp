#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace advblur {

/// Versioned, self-describing parameter container (JSON on disk).
struct Checkpoint {
  static constexpr const char* kFormat = "advblur-checkpoint";
  static constexpr int kVersion = 1;

  std::string kind;             // "detector" | "generator"
  nlohmann::json arch;          // architecture spec of `kind`
  std::uint64_t seed = 0;
  long long step = 0;           // optimizer steps taken
  int epoch = 0;                // completed epochs
  std::vector<double> params;
  nlohmann::json optimizer = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::ordered_json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// Writes `text` to `file` through a temporary and rename, so readers never see partial files.
void write_text_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace advblur
