// SPDX-License-Identifier: Apache-2.0
#include "run_manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "hnsa/error.hpp"
#include "hnsa/hashing.hpp"

namespace hnsa::cli {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), started_(utc_timestamp()) {}

void RunManifest::add_seed(const std::string& purpose, std::uint64_t seed) { seeds_[purpose] = seed; }

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_.push_back({{"role", role}, {"path", path.string()}, {"fnv1a64", hash_file(path)}});
}

void RunManifest::add_artifact(const std::string& role, const std::filesystem::path& path) {
  artifacts_.push_back({{"role", role}, {"path", path.string()}});
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command_}, {"config", config_},   {"seeds", seeds_},
          {"inputs", inputs_},   {"artifacts", artifacts_}, {"result", result_},
          {"started", started_}, {"finished", finished_}};
}

void RunManifest::write(const std::filesystem::path& path) {
  finished_ = utc_timestamp();
  std::ofstream out(path);
  if (!out) throw Error("cannot write run manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace hnsa::cli
