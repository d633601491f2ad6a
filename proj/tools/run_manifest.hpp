// SPDX-License-Identifier: Apache-2.0
//
// Per-invocation record of what a subcommand read, wrote and with which
// settings. Everything except the timestamps is a function of the inputs.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace hnsa::cli {

class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_seed(const std::string& purpose, std::uint64_t seed);
  /// Records the file's FNV-1a hash under `role`.
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_artifact(const std::string& role, const std::filesystem::path& path);
  void set_result(nlohmann::json result) { result_ = std::move(result); }

  nlohmann::json to_json() const;
  /// Stamps the finish time and writes pretty JSON.
  void write(const std::filesystem::path& path);

 private:
  std::string command_;
  std::string started_;
  std::string finished_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json artifacts_ = nlohmann::json::array();
  nlohmann::json result_ = nlohmann::json::object();
};

std::string utc_timestamp();

}  // namespace hnsa::cli
