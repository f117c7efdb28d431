#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef SPAIS_TEST_DATA_DIR
#error "SPAIS_TEST_DATA_DIR must be defined by the build"
#endif

namespace fixtures {

/// Disturbance sequence stored as `t,x_0,...` rows, one per timestep.
inline std::vector<std::vector<double>> load_disturbances(const std::string& name) {
  const std::string path = std::string(SPAIS_TEST_DATA_DIR) + "/" + name;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> x;
    while (std::getline(ss, cell, ',')) x.push_back(std::stod(cell));
    rows.push_back(std::move(x));
  }
  return rows;
}

}  // namespace fixtures
