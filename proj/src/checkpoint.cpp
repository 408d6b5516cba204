#include "checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace advblur {

namespace fs = std::filesystem;

nlohmann::ordered_json Checkpoint::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = kind;
  j["arch"] = arch;
  j["seed"] = seed;
  j["step"] = step;
  j["epoch"] = epoch;
  j["num_params"] = params.size();
  j["params"] = params;
  j["optimizer"] = optimizer;
  j["extra"] = extra;
  return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  require(j.is_object() && j.value("format", std::string()) == kFormat, ErrorKind::validation,
          "not an advblur checkpoint");
  const int version = j.at("version").get<int>();
  require(version == kVersion, ErrorKind::validation, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.kind = j.at("kind").get<std::string>();
  ck.arch = j.at("arch");
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.step = j.at("step").get<long long>();
  ck.epoch = j.at("epoch").get<int>();
  ck.params = j.at("params").get<std::vector<double>>();
  require(ck.params.size() == j.at("num_params").get<std::size_t>(), ErrorKind::validation,
          "checkpoint parameter count mismatch");
  ck.optimizer = j.value("optimizer", nlohmann::json::object());
  ck.extra = j.value("extra", nlohmann::json::object());
  return ck;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(bool(out), ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out << text;
    require(bool(out), ErrorKind::io, "failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, file);
}

void save_checkpoint(const fs::path& file, const Checkpoint& ck) {
  // max_digits10 output keeps doubles exact across a save/load round trip.
  write_text_atomic(file, ck.to_json().dump() + "\n");
}

Checkpoint load_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open checkpoint '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, "malformed checkpoint '" + file.string() + "': " + e.what());
  }
  return Checkpoint::from_json(j);
}

}  // namespace advblur
