#include "envspec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "errors.hpp"

namespace ampsize {

RewardConfig RewardConfig::defaults_for(std::size_t hard, std::size_t targets, double alpha) {
  RewardConfig r;
  r.alpha = alpha;
  r.e0 = -(static_cast<double>(hard) + alpha * static_cast<double>(targets));
  r.e1 = 0.0;
  r.failure_floor = r.e0 - 1.0;
  return r;
}

std::size_t DesignSpec::hard_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const SpecItem& s) {
    return s.spec_class == SpecClass::HardConstraint;
  }));
}

std::size_t DesignSpec::target_count() const { return items.size() - hard_count(); }

void DesignSpec::validate() const {
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (!metric_value(MetricSet{}, item.metric_key)) {
      throw ConfigError("unknown metric key '" + item.metric_key + "'");
    }
    if (!seen.insert(item.metric_key).second) {
      throw ConfigError("metric key '" + item.metric_key + "' appears twice in the design spec");
    }
    if (!(item.threshold > 0.0) || !std::isfinite(item.threshold)) {
      throw ConfigError("threshold for '" + item.metric_key + "' must be positive");
    }
  }
  if (hard_count() == 0) throw ConfigError("design spec needs at least one hard constraint");
  if (target_count() == 0) throw ConfigError("design spec needs at least one optimization target");
}

const std::vector<std::string>& metric_keys() {
  static const std::vector<std::string> keys = {"gain",  "gain_db_ohm", "bandwidth",          "peaking",
                                                "power", "gate_area",   "input_noise_density"};
  return keys;
}

std::optional<double> metric_value(const MetricSet& m, std::string_view key) {
  if (key == "gain") return m.gain;
  if (key == "gain_db_ohm") return m.gain_db_ohm;
  if (key == "bandwidth") return m.bandwidth;
  if (key == "peaking") return m.peaking;
  if (key == "power") return m.power;
  if (key == "gate_area") return m.gate_area;
  if (key == "input_noise_density") return m.input_noise_density;
  return std::nullopt;
}

double q_ratio(const SpecItem& item, double value) {
  return item.direction == Direction::AtLeast ? value / item.threshold : item.threshold / value;
}

Score score(const DesignSpec& spec, const MetricSet& metrics) {
  Score s;
  const auto fail = [&] {
    s.d = spec.reward.failure_floor;
    s.satisfied = false;
    s.failed = true;
    s.q.assign(spec.items.size(), std::numeric_limits<double>::quiet_NaN());
    return s;
  };
  if (!metrics.valid) return fail();

  double k1 = 0.0, k2 = 0.0, k2_clipped = 0.0;
  bool all_hard = true;
  for (const auto& item : spec.items) {
    const double v = *metric_value(metrics, item.metric_key);
    if (!std::isfinite(v)) return fail();
    const bool hard = item.spec_class == SpecClass::HardConstraint;
    double q;
    if (v > 0.0) {
      q = q_ratio(item, v);
    } else if (hard && item.direction == Direction::AtMost) {
      // A zero "at most" metric (e.g. no peaking) meets any positive threshold.
      q = std::numeric_limits<double>::infinity();
    } else {
      return fail();
    }
    s.q.push_back(q);
    if (hard) {
      k1 += std::min(q, 1.0);
      all_hard = all_hard && q >= 1.0;
    } else {
      k2 += q;
      k2_clipped += std::min(q, 1.0);
    }
  }
  s.satisfied = all_hard;
  s.d = all_hard ? k2 + spec.reward.e1 : k1 + spec.reward.alpha * k2_clipped + spec.reward.e0;
  return s;
}

double relative_score(const DesignSpec& spec, const MetricSet& metrics, const MetricSet& reference) {
  double total = 0.0;
  for (const auto& item : spec.items) {
    if (item.spec_class != SpecClass::OptimizationTarget) continue;
    total += q_ratio(item, *metric_value(metrics, item.metric_key)) -
             q_ratio(item, *metric_value(reference, item.metric_key));
  }
  return total;
}

const char* to_string(Direction d) { return d == Direction::AtLeast ? "at_least" : "at_most"; }

const char* to_string(SpecClass c) {
  return c == SpecClass::HardConstraint ? "hard_constraint" : "optimization_target";
}

}  // namespace ampsize
