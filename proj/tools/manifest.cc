#include "manifest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace treeseq {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::string& role, const std::string& path) {
  json entry{{"role", role}, {"path", path}};
  std::ifstream in(path, std::ios::binary);
  if (in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    entry["fnv1a64"] = hex64(fnv1a64(bytes));
    entry["bytes"] = bytes.size();
  } else {
    entry["fnv1a64"] = nullptr;
  }
  inputs_.push_back(std::move(entry));
}

void RunManifest::add_output(const std::string& role, const std::string& path) {
  outputs_.push_back(json{{"role", role}, {"path", path}});
}

void RunManifest::add_timing(const std::string& phase, double seconds) {
  timings_[phase] = seconds;
}

void RunManifest::set_status(int exit_code, std::string message) {
  exit_code_ = exit_code;
  message_ = std::move(message);
}

double RunManifest::elapsed_seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
      .count();
}

json RunManifest::to_json() const {
  json timings = timings_;
  timings["total"] = elapsed_seconds();
  json j{{"command", command_},   {"config", config_},
         {"inputs", inputs_},     {"outputs", outputs_},
         {"timings_seconds", timings}, {"exit_code", exit_code_}};
  j["seed"] = has_seed_ ? json(seed_) : json(nullptr);
  if (!message_.empty()) j["message"] = message_;
  return j;
}

}  // namespace treeseq
