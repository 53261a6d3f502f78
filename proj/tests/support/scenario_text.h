#pragma once

#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hns::testing {

// Bundled scenario file as text. HNS_SCENARIO_DIR comes from the test target.
inline std::string BundledText(const std::string& name) {
  std::ifstream in(std::string(HNS_SCENARIO_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing bundled scenario " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Replaces the value of a top-level `key: value` line.
inline std::string WithKey(const std::string& text, const std::string& key,
                           const std::string& value) {
  const std::regex line("^" + key + ":.*$", std::regex::multiline);
  if (!std::regex_search(text, line)) {
    throw std::runtime_error("no top-level key " + key);
  }
  return std::regex_replace(text, line, key + ": " + value);
}

}  // namespace hns::testing
