#include "rlenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "errors.hpp"

namespace ampsize {

double scale_param(const ParamDef& p, double normalized) {
  const double t = (normalized + 1.0) / 2.0;
  if (p.scale == ParamScale::Linear) return p.pmin + t * (p.pmax - p.pmin);
  return p.pmin * std::pow(p.pmax / p.pmin, t);
}

double normalize_param(const ParamDef& p, double value) {
  const double t = p.scale == ParamScale::Linear ? (value - p.pmin) / (p.pmax - p.pmin)
                                                 : std::log(value / p.pmin) / std::log(p.pmax / p.pmin);
  return 2.0 * t - 1.0;
}

ParamVector scale_action(std::span<const double> normalized, const std::vector<ParamDef>& params,
                         std::size_t* clamped) {
  if (normalized.size() != params.size()) {
    throw CircuitError("action has " + std::to_string(normalized.size()) + " entries, expected " +
                       std::to_string(params.size()));
  }
  ParamVector x;
  x.values.reserve(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    double a = normalized[j];
    if (!(a >= -1.0 && a <= 1.0)) {
      a = std::isnan(a) ? 0.0 : std::clamp(a, -1.0, 1.0);
      if (clamped) ++*clamped;
    }
    // Endpoints map exactly; pow() may land an ulp outside the box otherwise.
    double v = a == -1.0 ? params[j].pmin : a == 1.0 ? params[j].pmax : scale_param(params[j], a);
    x.values.push_back(std::clamp(v, params[j].pmin, params[j].pmax));
  }
  return x;
}

CircuitObjective::CircuitObjective(Netlist netlist, DesignSpec spec, SimConfig config)
    : netlist_(std::move(netlist)), spec_(std::move(spec)), config_(std::move(config)) {}

Evaluation CircuitObjective::evaluate(std::span<const double> normalized) const {
  Evaluation ev;
  ev.normalized.assign(normalized.begin(), normalized.end());
  ev.x = scale_action(normalized, netlist_.params, &clamped_);
  for (auto& a : ev.normalized) a = std::isnan(a) ? 0.0 : std::clamp(a, -1.0, 1.0);
  ev.sim = simulate(netlist_, ev.x, config_);
  ev.score = score(spec_, ev.sim.metrics);
  return ev;
}

CircuitEnv::CircuitEnv(const CircuitObjective& objective, EnvConfig config)
    : objective_(objective), config_(config) {
  if (config_.steps_per_episode < 1) throw ConfigError("steps_per_episode must be >= 1");
  if (config_.ac_feature_count < 1) throw ConfigError("ac_feature_count must be >= 1");
  const Netlist& nl = objective_.netlist();
  layout_.global_dim = nl.nodes.size() + 1 + 2 * static_cast<std::size_t>(config_.ac_feature_count) +
                       static_cast<std::size_t>(config_.steps_per_episode);
  layout_.local_dim = kLocalFeatures;
  layout_.action_dim = nl.params.size();

  std::vector<bool> assigned(nl.params.size(), false);
  for (const auto& name : nl.signal_order) {
    const Element* e = nl.find_element(name);
    std::vector<std::size_t> group;
    for (const auto& v : e->values) {
      if (!v.is_param()) continue;
      const std::size_t idx = *nl.param_index(v.param);
      if (!assigned[idx]) {
        assigned[idx] = true;
        group.push_back(idx);
      }
    }
    if (group.empty()) continue;
    std::size_t mos = std::numeric_limits<std::size_t>::max();
    if (e->is_mos()) {
      std::size_t k = 0;
      for (const auto& other : nl.elements) {
        if (&other == e) break;
        if (other.is_mos()) ++k;
      }
      mos = k;
    }
    layout_.group_params.push_back(std::move(group));
    mos_for_position_.push_back(mos);
  }
  // Parameters not tied to any ordered element get a trailing position of their own.
  for (std::size_t j = 0; j < assigned.size(); ++j) {
    if (!assigned[j]) {
      layout_.group_params.push_back({j});
      mos_for_position_.push_back(std::numeric_limits<std::size_t>::max());
    }
  }
  layout_.positions = layout_.group_params.size();
}

Observation CircuitEnv::reset() {
  step_ = 0;
  d_prev_ = 0.0;
  started_ = true;
  ++episode_;
  return Observation(layout_.total(), 0.0);
}

StepResult CircuitEnv::step(std::span<const double> normalized_action) {
  if (!started_) throw ContractError("step() called before reset()");
  if (step_ >= config_.steps_per_episode) throw ContractError("step() called after the episode finished");
  const Evaluation ev = objective_.evaluate(normalized_action);
  ++step_;
  StepResult r;
  r.d = ev.score.d;
  r.satisfied = ev.score.satisfied;
  r.reward = ev.score.d - d_prev_;
  d_prev_ = ev.score.d;
  r.done = step_ == config_.steps_per_episode;
  r.observation = observe(ev.sim, step_ - 1);
  if (observer_) {
    StepRecord rec;
    rec.step_global = step_global_;
    rec.episode = episode_;
    rec.step_in_episode = step_ - 1;
    rec.reward = r.reward;
    rec.evaluation = &ev;
    observer_(rec);
  }
  ++step_global_;
  return r;
}

Observation CircuitEnv::observe(const SimResult& sim, int step_index) const {
  Observation obs(layout_.total(), 0.0);
  const std::size_t nodes = objective_.netlist().nodes.size();
  const std::size_t f = static_cast<std::size_t>(config_.ac_feature_count);
  const std::size_t onehot = nodes + 1 + 2 * f;
  if (step_index >= 0 && step_index < config_.steps_per_episode) obs[onehot + step_index] = 1.0;
  if (!sim.ok) return obs;

  const auto& s = config_.scales;
  const double vsup = sim.dc.supply_voltage > 0.0 ? sim.dc.supply_voltage : 1.0;
  for (std::size_t i = 0; i < nodes; ++i) obs[i] = sim.dc.node_voltages[i] / vsup;
  obs[nodes] = sim.dc.supply_current / s.current;
  const std::size_t n_ac = sim.ac.values.size();
  for (std::size_t k = 0; k < f && n_ac > 0; ++k) {
    const std::size_t idx = f == 1 ? 0 : (k * (n_ac - 1) + (f - 1) / 2) / (f - 1);
    const auto h = sim.ac.values[idx];
    obs[nodes + 1 + k] = std::log10(std::abs(h) + 1e-18) / s.log_magnitude;
    obs[nodes + 1 + f + k] = std::arg(h) / std::numbers::pi;
  }
  for (std::size_t h = 0; h < layout_.positions; ++h) {
    const std::size_t mos = mos_for_position_[h];
    if (mos >= sim.dc.transistor_ops.size()) continue;
    const auto& op = sim.dc.transistor_ops[mos];
    double* loc = &obs[layout_.global_dim + h * layout_.local_dim];
    loc[0] = op.vth / s.vth;
    loc[1] = op.gm / s.gm;
    loc[2] = op.vdsat / s.vdsat;
    loc[3] = op.id / s.id;
    loc[4] = op.gds / s.gds;
    loc[5] = op.cgs / s.cgs;
    loc[6] = op.cgd / s.cgd;
    loc[7] = op.gamma_eff / s.gamma;
  }
  return obs;
}

QuadraticEnv::QuadraticEnv(std::vector<double> target, int steps_per_episode)
    : target_(std::move(target)), steps_(steps_per_episode) {
  if (steps_ < 1) throw ConfigError("steps_per_episode must be >= 1");
  const std::size_t n = target_.size();
  layout_.global_dim = n + static_cast<std::size_t>(steps_);
  layout_.positions = n;
  layout_.local_dim = 1;
  layout_.action_dim = n;
  for (std::size_t j = 0; j < n; ++j) layout_.group_params.push_back({j});
}

Observation QuadraticEnv::reset() {
  step_ = 0;
  d_prev_ = 0.0;
  started_ = true;
  return Observation(layout_.total(), 0.0);
}

double QuadraticEnv::value(std::span<const double> a) const {
  double d = 0.0;
  for (std::size_t j = 0; j < target_.size(); ++j) {
    const double aj = std::clamp(a[j], -1.0, 1.0);
    d -= (aj - target_[j]) * (aj - target_[j]);
  }
  return d;
}

StepResult QuadraticEnv::step(std::span<const double> a) {
  if (!started_) throw ContractError("step() called before reset()");
  if (step_ >= steps_) throw ContractError("step() called after the episode finished");
  if (a.size() != target_.size()) throw ShapeError("action dimension mismatch");
  StepResult r;
  r.d = value(a);
  r.satisfied = true;
  r.reward = r.d - d_prev_;
  d_prev_ = r.d;
  ++step_;
  r.done = step_ == steps_;
  r.observation.assign(layout_.total(), 0.0);
  for (std::size_t j = 0; j < target_.size(); ++j) r.observation[j] = std::clamp(a[j], -1.0, 1.0);
  r.observation[target_.size() + static_cast<std::size_t>(step_ - 1)] = 1.0;
  return r;
}

}  // namespace ampsize
