#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace treeseq {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Record of one CLI run: enough to repeat it and check its inputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; has_seed_ = true; }
  // Hashes the file contents; unreadable inputs are recorded as such.
  void add_input(const std::string& role, const std::string& path);
  void add_output(const std::string& role, const std::string& path);
  void add_timing(const std::string& phase, double seconds);
  void set_status(int exit_code, std::string message);

  double elapsed_seconds() const;
  nlohmann::json to_json() const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  bool has_seed_ = false;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json timings_ = nlohmann::json::object();
  int exit_code_ = 0;
  std::string message_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace treeseq
