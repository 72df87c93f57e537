#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "envspec.hpp"
#include "netlist.hpp"
#include "simulator.hpp"

namespace ampsize {

// Fixed divisors per feature family. Entries stay O(1) for sane circuits.
struct ObservationScales {
  double current = 1e-3;       // A
  double log_magnitude = 6.0;  // decades
  double vth = 1.0;
  double gm = 1e-2;
  double vdsat = 1.0;
  double id = 1e-3;
  double gds = 1e-3;
  double cgs = 1e-12;
  double cgd = 1e-12;
  double gamma = 1.0;
};

struct EnvConfig {
  int steps_per_episode = 5;
  int ac_feature_count = 16;
  ObservationScales scales;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kLocalFeatures = 8;

// Shape of the flat observation vector: global block, then one local block per
// sequence position. group_params[h] lists the action indices emitted at position h.
struct ObservationLayout {
  std::size_t global_dim = 0;
  std::size_t positions = 0;
  std::size_t local_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::vector<std::size_t>> group_params;

  std::size_t total() const { return global_dim + positions * local_dim; }
};

using Observation = std::vector<double>;

struct Transition {
  Observation observation;
  std::vector<double> action;  // normalized
  double reward = 0.0;
  Observation next_observation;
  bool done = false;
};

double scale_param(const ParamDef& p, double normalized);
double normalize_param(const ParamDef& p, double value);

// Clamps out-of-range components; the number clamped is added to *clamped.
ParamVector scale_action(std::span<const double> normalized, const std::vector<ParamDef>& params,
                         std::size_t* clamped = nullptr);

struct Evaluation {
  std::vector<double> normalized;
  ParamVector x;
  SimResult sim;
  Score score;
};

// The shared objective behind every optimizer: normalized action -> simulated score.
class CircuitObjective {
 public:
  CircuitObjective(Netlist netlist, DesignSpec spec, SimConfig config);

  Evaluation evaluate(std::span<const double> normalized) const;

  const Netlist& netlist() const { return netlist_; }
  const DesignSpec& spec() const { return spec_; }
  const SimConfig& sim_config() const { return config_; }
  std::size_t dimension() const { return netlist_.params.size(); }
  std::size_t clamp_count() const { return clamped_; }

 private:
  Netlist netlist_;
  DesignSpec spec_;
  SimConfig config_;
  mutable std::size_t clamped_ = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  double d = 0.0;
  bool satisfied = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const ObservationLayout& layout() const = 0;
  virtual Observation reset() = 0;
  virtual StepResult step(std::span<const double> normalized_action) = 0;
  virtual int steps_per_episode() const = 0;
};

struct StepRecord {
  long step_global = 0;
  long episode = 0;
  int step_in_episode = 0;
  double reward = 0.0;
  const Evaluation* evaluation = nullptr;
};

class CircuitEnv final : public Environment {
 public:
  CircuitEnv(const CircuitObjective& objective, EnvConfig config);

  const ObservationLayout& layout() const override { return layout_; }
  Observation reset() override;
  StepResult step(std::span<const double> normalized_action) override;
  int steps_per_episode() const override { return config_.steps_per_episode; }

  // Builds the normalized observation for a result; step_index is 0-based.
  Observation observe(const SimResult& sim, int step_index) const;

  void set_step_observer(std::function<void(const StepRecord&)> observer) { observer_ = std::move(observer); }
  std::size_t clamp_count() const { return objective_.clamp_count(); }
  long total_steps() const { return step_global_; }

 private:
  const CircuitObjective& objective_;
  EnvConfig config_;
  ObservationLayout layout_;
  std::vector<std::size_t> mos_for_position_;  // index into transistor_ops, or npos for passives
  int step_ = 0;
  bool started_ = false;
  double d_prev_ = 0.0;
  long step_global_ = 0;
  long episode_ = -1;
  std::function<void(const StepRecord&)> observer_;
};

// d = -||a - target||^2 in normalized action space. Global observation is the
// previous action plus the step one-hot; locals are all zero.
class QuadraticEnv final : public Environment {
 public:
  QuadraticEnv(std::vector<double> target, int steps_per_episode);

  const ObservationLayout& layout() const override { return layout_; }
  Observation reset() override;
  StepResult step(std::span<const double> normalized_action) override;
  int steps_per_episode() const override { return steps_; }

  double value(std::span<const double> normalized_action) const;

 private:
  std::vector<double> target_;
  int steps_;
  ObservationLayout layout_;
  int step_ = 0;
  bool started_ = false;
  double d_prev_ = 0.0;
};

}  // namespace ampsize
