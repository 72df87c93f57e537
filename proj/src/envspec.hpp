#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simulator.hpp"

namespace ampsize {

enum class Direction { AtLeast, AtMost };
enum class SpecClass { HardConstraint, OptimizationTarget };

struct SpecItem {
  std::string metric_key;  // a MetricSet field name, see metric_keys()
  double threshold = 1.0;
  Direction direction = Direction::AtLeast;
  SpecClass spec_class = SpecClass::HardConstraint;
};

struct RewardConfig {
  double alpha = 0.1;
  double e0 = 0.0;
  double e1 = 0.0;
  double failure_floor = -1.0;

  // alpha = 0.1, e0 = -(hard + alpha * targets), e1 = 0, failure_floor = e0 - 1.
  static RewardConfig defaults_for(std::size_t hard, std::size_t targets, double alpha = 0.1);
};

struct DesignSpec {
  std::vector<SpecItem> items;
  RewardConfig reward;

  std::size_t hard_count() const;
  std::size_t target_count() const;
  // Throws ConfigError if keys are unknown/duplicated, thresholds non-positive,
  // or either class is missing.
  void validate() const;
};

struct Score {
  double d = 0.0;
  bool satisfied = false;
  bool failed = false;
  std::vector<double> q;  // raw ratio per spec item, NaN for a failed simulation
};

const std::vector<std::string>& metric_keys();
std::optional<double> metric_value(const MetricSet& m, std::string_view key);

// f/y for at_least, y/f for at_most. Requires a positive, finite metric.
double q_ratio(const SpecItem& item, double metric_value);

Score score(const DesignSpec& spec, const MetricSet& metrics);

// Sum over targets of (q - q_ref); zero for the reference itself.
double relative_score(const DesignSpec& spec, const MetricSet& metrics, const MetricSet& reference);

const char* to_string(Direction d);
const char* to_string(SpecClass c);

}  // namespace ampsize
