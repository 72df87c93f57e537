#pragma once

#include <optional>
#include <string>
#include <vector>

#include "envspec.hpp"
#include "netlist.hpp"
#include "simulator.hpp"

namespace ampsize {

struct BenchmarkDef {
  std::string name;
  std::string description;
  std::string netlist_text;
  DesignSpec spec;
  SimConfig sim;
  // Normalized design whose metrics anchor the relative score in tables.
  std::optional<std::vector<double>> reference;
};

const std::vector<BenchmarkDef>& benchmark_registry();
std::vector<std::string> benchmark_names();
// Throws ConfigError listing the registered names.
const BenchmarkDef& find_benchmark(const std::string& name);

}  // namespace ampsize
