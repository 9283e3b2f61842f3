#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "cplan/scenario.hpp"

namespace testutil {

inline std::string config_text(const std::string& name) {
  std::ifstream in(std::string(CPLAN_SOURCE_DIR) + "/configs/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline cplan::Scenario load_config(const std::string& name) {
  return cplan::load_scenario(config_text(name));
}

}  // namespace testutil
