#include "harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "errors.hpp"

namespace ampsize {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Ddpg: return "ddpg";
    case OptimizerKind::Random: return "random";
    case OptimizerKind::Grid: return "grid";
    case OptimizerKind::Bo: return "bo";
  }
  return "?";
}

long default_budget(OptimizerKind k) { return k == OptimizerKind::Bo ? 600 : 20000; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int worker_count(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("AMPSIZE_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(std::min(n, 256L));
  }
  return 1;
}

// ---------------------------------------------------------------- config

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad or missing value for '" + std::string(key) + "' in " + where);
  }
}

template <class T>
void read_opt(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

template <class T>
void read_opt(const json& obj, const char* key, const std::string& where, std::optional<T>& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "ddpg") return OptimizerKind::Ddpg;
  if (s == "random") return OptimizerKind::Random;
  if (s == "grid") return OptimizerKind::Grid;
  if (s == "bo") return OptimizerKind::Bo;
  throw ConfigError("unknown optimizer '" + s + "' (expected ddpg, random, grid or bo)");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  const std::string top = "config";
  check_keys(doc, top,
             {"schema_version", "benchmark", "optimizer", "budget", "seeds", "output_dir", "workers", "sim", "env",
              "reward", "agent", "bo", "grid"});
  if (!doc.contains("schema_version") || get_as<int>(doc, "schema_version", top) != kConfigSchemaVersion) {
    throw ConfigError("schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  ExperimentConfig c;
  c.benchmark = get_as<std::string>(doc, "benchmark", top);
  find_benchmark(c.benchmark);
  c.optimizer = parse_optimizer(get_as<std::string>(doc, "optimizer", top));
  c.budget = doc.contains("budget") ? get_as<long>(doc, "budget", top) : default_budget(c.optimizer);
  if (c.budget < 1) throw ConfigError("budget must be >= 1");
  if (doc.contains("seeds")) {
    c.seeds = get_as<std::vector<std::uint64_t>>(doc, "seeds", top);
  } else {
    c.seeds = {0};
  }
  if (c.seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  c.output_dir = doc.contains("output_dir") ? get_as<std::string>(doc, "output_dir", top) : "runs/" + c.benchmark + "_" + to_string(c.optimizer);
  read_opt(doc, "workers", top, c.workers);
  if (c.workers < 0) throw ConfigError("workers must be >= 0");

  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    check_keys(s, "sim", {"fmin", "fmax", "points_per_decade", "noise_ref_hz"});
    read_opt(s, "fmin", "sim", c.fmin);
    read_opt(s, "fmax", "sim", c.fmax);
    read_opt(s, "points_per_decade", "sim", c.points_per_decade);
    read_opt(s, "noise_ref_hz", "sim", c.noise_ref_hz);
  }
  if (doc.contains("env")) {
    const json& e = doc["env"];
    check_keys(e, "env", {"steps_per_episode", "ac_feature_count"});
    read_opt(e, "steps_per_episode", "env", c.env.steps_per_episode);
    read_opt(e, "ac_feature_count", "env", c.env.ac_feature_count);
  }
  if (c.env.steps_per_episode < 1 || c.env.ac_feature_count < 1) {
    throw ConfigError("env.steps_per_episode and env.ac_feature_count must be >= 1");
  }
  if (doc.contains("reward")) {
    const json& r = doc["reward"];
    check_keys(r, "reward", {"alpha"});
    read_opt(r, "alpha", "reward", c.alpha);
    if (c.alpha && !(*c.alpha >= 0.0)) throw ConfigError("reward.alpha must be >= 0");
  }
  if (doc.contains("agent")) {
    const json& a = doc["agent"];
    const std::string w = "agent";
    check_keys(a, w,
               {"gamma", "tau", "actor_lr", "critic_lr", "batch_size", "buffer_capacity", "warmup", "gru_hidden",
                "global_proj", "critic_hidden", "noise"});
    auto& g = c.agent;
    read_opt(a, "gamma", w, g.gamma);
    read_opt(a, "tau", w, g.tau);
    read_opt(a, "actor_lr", w, g.actor_lr);
    read_opt(a, "critic_lr", w, g.critic_lr);
    read_opt(a, "batch_size", w, g.batch_size);
    read_opt(a, "buffer_capacity", w, g.buffer_capacity);
    read_opt(a, "warmup", w, g.warmup);
    read_opt(a, "gru_hidden", w, g.gru_hidden);
    read_opt(a, "global_proj", w, g.global_proj);
    read_opt(a, "critic_hidden", w, g.critic_hidden);
    if (a.contains("noise")) {
      const json& n = a["noise"];
      const std::string nw = "agent.noise";
      check_keys(n, nw,
                 {"sigma_start", "sigma_end", "decay_steps", "decay_fraction", "param_noise", "param_noise_scale",
                  "param_noise_target", "param_noise_factor"});
      read_opt(n, "sigma_start", nw, g.noise.sigma_start);
      read_opt(n, "sigma_end", nw, g.noise.sigma_end);
      if (n.contains("decay_steps")) {
        g.noise.decay_steps = get_as<long>(n, "decay_steps", nw);
        c.decay_steps_given = true;
      }
      read_opt(n, "decay_fraction", nw, c.noise_decay_fraction);
      read_opt(n, "param_noise", nw, g.noise.param_noise);
      read_opt(n, "param_noise_scale", nw, g.noise.param_noise_scale);
      read_opt(n, "param_noise_target", nw, g.noise.param_noise_target);
      read_opt(n, "param_noise_factor", nw, g.noise.param_noise_factor);
    }
    if (!(g.gamma >= 0.0 && g.gamma <= 1.0) || !(g.tau > 0.0 && g.tau <= 1.0) || !(g.actor_lr > 0.0) ||
        !(g.critic_lr > 0.0) || g.batch_size < 1 || g.buffer_capacity < g.batch_size || g.gru_hidden < 1 ||
        g.global_proj < 1 || g.critic_hidden.empty() ||
        std::any_of(g.critic_hidden.begin(), g.critic_hidden.end(), [](Eigen::Index h) { return h < 1; })) {
      throw ConfigError("agent hyperparameters out of range");
    }
    if (!(g.noise.sigma_start >= g.noise.sigma_end && g.noise.sigma_end >= 0.0) ||
        !(c.noise_decay_fraction > 0.0 && c.noise_decay_fraction <= 1.0) ||
        !(g.noise.param_noise_factor > 1.0)) {
      throw ConfigError("agent.noise settings out of range");
    }
  }
  if (!c.decay_steps_given) {
    c.agent.noise.decay_steps = std::max(1L, std::lround(c.noise_decay_fraction * static_cast<double>(c.budget)));
  }
  if (doc.contains("bo")) {
    const json& b = doc["bo"];
    check_keys(b, "bo", {"init_count", "candidates", "hyper_candidates", "refit_every"});
    read_opt(b, "init_count", "bo", c.bo.init_count);
    read_opt(b, "candidates", "bo", c.bo.candidates);
    read_opt(b, "hyper_candidates", "bo", c.bo.hyper_candidates);
    read_opt(b, "refit_every", "bo", c.bo.refit_every);
    if (c.bo.candidates < 1 || c.bo.hyper_candidates < 1 || c.bo.refit_every < 1) {
      throw ConfigError("bo settings must be positive");
    }
  }
  if (c.optimizer == OptimizerKind::Bo && !(c.bo.init_count >= 2 && c.budget > c.bo.init_count)) {
    throw ConfigError("bo needs budget > bo.init_count >= 2");
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    check_keys(g, "grid", {"counts"});
    read_opt(g, "counts", "grid", c.grid_counts);
  }
  if (c.optimizer == OptimizerKind::Grid && !c.grid_counts.empty()) {
    const std::size_t dim = parse_netlist(find_benchmark(c.benchmark).netlist_text).params.size();
    if (c.grid_counts.size() != dim) {
      throw ConfigError("grid.counts needs " + std::to_string(dim) + " entries");
    }
    long product = 1;
    for (int n : c.grid_counts) {
      if (n < 1) throw ConfigError("grid.counts entries must be >= 1");
      product *= n;
    }
    if (product != c.budget) {
      throw ConfigError("grid.counts multiply to " + std::to_string(product) + " but budget is " +
                        std::to_string(c.budget));
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

ResolvedBenchmark resolve_benchmark(const ExperimentConfig& config) {
  const BenchmarkDef& def = find_benchmark(config.benchmark);
  ResolvedBenchmark r{parse_netlist(def.netlist_text), def.spec, def.sim, def.reference};
  if (config.fmin) r.sim.fmin = *config.fmin;
  if (config.fmax) r.sim.fmax = *config.fmax;
  if (config.points_per_decade) r.sim.points_per_decade = *config.points_per_decade;
  if (config.noise_ref_hz) r.sim.noise_ref_hz = *config.noise_ref_hz;
  if (!(r.sim.fmin > 0.0 && r.sim.fmax > r.sim.fmin) || r.sim.points_per_decade < 1) {
    throw ConfigError("sim sweep needs 0 < fmin < fmax and points_per_decade >= 1");
  }
  if (config.alpha) r.spec.reward = RewardConfig::defaults_for(r.spec.hard_count(), r.spec.target_count(), *config.alpha);
  r.spec.validate();
  return r;
}

// ---------------------------------------------------------------- run log

namespace {

json metrics_json(const MetricSet& m) {
  json j = json::object();
  for (const auto& k : metric_keys()) j[k] = *metric_value(m, k);
  j["bandwidth_in_range"] = m.bandwidth_in_range;
  return j;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

MetricSet metrics_from_json(const json& j) {
  MetricSet m;
  m.valid = true;
  m.gain = j.at("gain").get<double>();
  m.gain_db_ohm = j.at("gain_db_ohm").get<double>();
  m.bandwidth = j.at("bandwidth").get<double>();
  m.peaking = j.at("peaking").get<double>();
  m.power = j.at("power").get<double>();
  m.gate_area = j.at("gate_area").get<double>();
  m.input_noise_density = j.at("input_noise_density").get<double>();
  m.bandwidth_in_range = j.value("bandwidth_in_range", true);
  return m;
}

json spec_json(const DesignSpec& spec) {
  json items = json::array();
  for (const auto& it : spec.items) {
    items.push_back({{"metric", it.metric_key},
                     {"threshold", it.threshold},
                     {"direction", to_string(it.direction)},
                     {"class", to_string(it.spec_class)}});
  }
  return {{"items", items},
          {"alpha", spec.reward.alpha},
          {"e0", spec.reward.e0},
          {"e1", spec.reward.e1},
          {"failure_floor", spec.reward.failure_floor}};
}

DesignSpec spec_from_json(const json& j) {
  DesignSpec s;
  for (const auto& it : j.at("items")) {
    SpecItem item;
    item.metric_key = it.at("metric").get<std::string>();
    item.threshold = it.at("threshold").get<double>();
    item.direction = it.at("direction").get<std::string>() == to_string(Direction::AtMost) ? Direction::AtMost
                                                                                          : Direction::AtLeast;
    item.spec_class = it.at("class").get<std::string>() == to_string(SpecClass::OptimizationTarget)
                          ? SpecClass::OptimizationTarget
                          : SpecClass::HardConstraint;
    s.items.push_back(item);
  }
  s.reward.alpha = j.at("alpha").get<double>();
  s.reward.e0 = j.at("e0").get<double>();
  s.reward.e1 = j.at("e1").get<double>();
  s.reward.failure_floor = j.at("failure_floor").get<double>();
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed to write '" + path.string() + "'");
}

// Streams one CSV row per simulation and keeps the running best.
class RunLog {
 public:
  RunLog(const fs::path& dir, const Netlist& netlist, const DesignSpec& spec, std::string optimizer)
      : netlist_(netlist), spec_(spec), optimizer_(std::move(optimizer)) {
    fs::create_directories(dir);
    trace_.open(dir / "trace.csv", std::ios::binary);
    curves_.open(dir / "curves.csv", std::ios::binary);
    if (!trace_ || !curves_) throw std::runtime_error("cannot open run log files in '" + dir.string() + "'");
    trace_ << "optimizer,step_global,episode,step_in_episode";
    for (const auto& p : netlist_.params) trace_ << ",x_" << p.name;
    for (const auto& k : metric_keys()) trace_ << ',' << k;
    for (const auto& it : spec_.items) trace_ << ",q_" << it.metric_key;
    trace_ << ",d,reward,satisfied\n";
    curves_ << "step_global,best_d,best_satisfied";
    for (const auto& k : metric_keys()) curves_ << ",best_" << k;
    curves_ << '\n';
  }

  void record(long step_global, long episode, int step_in_episode, double reward, const Evaluation& ev) {
    trace_ << optimizer_ << ',' << step_global << ',' << episode << ',' << step_in_episode;
    for (double v : ev.x.values) trace_ << ',' << format_number(v);
    const bool valid = ev.sim.ok && ev.sim.metrics.valid;
    for (const auto& k : metric_keys()) {
      trace_ << ',';
      if (valid) trace_ << format_number(*metric_value(ev.sim.metrics, k));
    }
    for (std::size_t i = 0; i < spec_.items.size(); ++i) {
      trace_ << ',';
      if (i < ev.score.q.size() && !std::isnan(ev.score.q[i])) trace_ << format_number(ev.score.q[i]);
    }
    trace_ << ',' << format_number(ev.score.d) << ',' << format_number(reward) << ','
           << (ev.score.satisfied ? 1 : 0) << '\n';

    ++count_;
    if (count_ == 1 || ev.score.d > best_.score.d) best_ = ev;
    if (ev.score.satisfied && first_satisfied_ < 0) first_satisfied_ = count_;
    curves_ << step_global << ',' << format_number(best_.score.d) << ',' << (best_.score.satisfied ? 1 : 0);
    const bool best_valid = best_.sim.ok && best_.sim.metrics.valid;
    for (const auto& k : metric_keys()) {
      curves_ << ',';
      if (best_valid) curves_ << format_number(*metric_value(best_.sim.metrics, k));
    }
    curves_ << '\n';
  }

  void finish() {
    trace_.close();
    curves_.close();
    if (!trace_ || !curves_) throw std::runtime_error("failed writing run log");
  }

  long count() const { return count_; }
  const Evaluation& best() const { return best_; }
  long first_satisfied() const { return first_satisfied_; }

 private:
  const Netlist& netlist_;
  const DesignSpec& spec_;
  std::string optimizer_;
  std::ofstream trace_, curves_;
  long count_ = 0;
  Evaluation best_;
  long first_satisfied_ = -1;
};

void run_ddpg(const ExperimentConfig& config, std::uint64_t seed, const CircuitObjective& objective, RunLog& log) {
  EnvConfig env_cfg = config.env;
  env_cfg.seed = substream_seed(seed, "env");
  CircuitEnv env(objective, env_cfg);
  env.set_step_observer([&](const StepRecord& r) {
    log.record(r.step_global, r.episode, r.step_in_episode, r.reward, *r.evaluation);
  });
  DdpgAgent agent(env.layout(), config.agent, substream_seed(seed, "agent"));
  long sims = 0;
  while (sims < config.budget) {
    Observation obs = env.reset();
    agent.begin_episode();
    for (int t = 0; t < env.steps_per_episode() && sims < config.budget; ++t) {
      std::vector<double> action = agent.act(obs, true);
      StepResult sr = env.step(action);
      ++sims;
      agent.remember({obs, action, sr.reward, sr.observation, sr.done});
      if (agent.ready()) agent.train_step();
      obs = std::move(sr.observation);
    }
    agent.end_episode();
  }
}

}  // namespace

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  const ResolvedBenchmark bench = resolve_benchmark(config);
  CircuitObjective objective(bench.netlist, bench.spec, bench.sim);
  const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
  RunLog log(seed_dir, objective.netlist(), objective.spec(), to_string(config.optimizer));

  if (config.optimizer == OptimizerKind::Ddpg) {
    run_ddpg(config, seed, objective, log);
  } else {
    // Baselines log each evaluation as a one-step episode starting from d = 0.
    long index = 0;
    Objective callback = [&](std::span<const double> a) {
      const Evaluation ev = objective.evaluate(a);
      log.record(index, index, 0, ev.score.d, ev);
      ++index;
      return EvalOutcome{ev.score.d, ev.score.satisfied};
    };
    const std::size_t dim = objective.dimension();
    switch (config.optimizer) {
      case OptimizerKind::Random:
        random_search(callback, dim, config.budget, seed);
        break;
      case OptimizerKind::Grid:
        grid_search(callback, config.grid_counts.empty() ? grid_counts_for_budget(dim, config.budget)
                                                         : config.grid_counts);
        break;
      case OptimizerKind::Bo:
        bo_loop(callback, dim, config.budget, seed, config.bo);
        break;
      case OptimizerKind::Ddpg:
        break;
    }
  }
  log.finish();

  SeedOutcome out;
  out.seed = seed;
  out.evaluations = log.count();
  const Evaluation& best = log.best();
  out.best_d = best.score.d;
  out.satisfied = best.score.satisfied;
  out.first_satisfied = log.first_satisfied();
  out.best_normalized = best.normalized;
  out.best_x = best.x.values;
  out.best_metrics = best.sim.metrics;
  out.best_q = best.score.q;
  out.clamp_count = objective.clamp_count();

  json report;
  report["seed"] = seed;
  report["optimizer"] = to_string(config.optimizer);
  report["benchmark"] = config.benchmark;
  report["evaluations"] = out.evaluations;
  report["d"] = out.best_d;
  report["satisfied"] = out.satisfied;
  report["first_satisfied"] = out.first_satisfied < 0 ? json(nullptr) : json(out.first_satisfied);
  json x = json::object();
  for (std::size_t j = 0; j < objective.netlist().params.size() && j < out.best_x.size(); ++j) {
    x[objective.netlist().params[j].name] = out.best_x[j];
  }
  report["x"] = x;
  report["normalized"] = out.best_normalized;
  report["metrics"] = (best.sim.ok && best.sim.metrics.valid) ? metrics_json(out.best_metrics) : json(nullptr);
  json q = json::object();
  for (std::size_t i = 0; i < bench.spec.items.size() && i < out.best_q.size(); ++i) {
    q[bench.spec.items[i].metric_key] = finite_or_null(out.best_q[i]);
  }
  report["q"] = q;
  report["clamped_components"] = out.clamp_count;
  write_text(seed_dir / "best.json", report.dump(2) + "\n");
  return out;
}

namespace {

json stats_of(std::vector<double> v) {
  if (v.empty()) return {{"median", nullptr}, {"min", nullptr}, {"max", nullptr}};
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {{"median", finite_or_null(median)}, {"min", finite_or_null(v.front())}, {"max", finite_or_null(v.back())}};
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

json run_experiment(const ExperimentConfig& config) {
  const ResolvedBenchmark bench = resolve_benchmark(config);
  fs::create_directories(config.output_dir);
  const std::string started = iso_now();

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  const int workers = std::min<int>(worker_count(config.workers), static_cast<int>(config.seeds.size()));
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= config.seeds.size()) return;
        i = next++;
      }
      try {
        outcomes[i] = run_seed(config, config.seeds[i], config.output_dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json summary;
  summary["benchmark"] = config.benchmark;
  summary["optimizer"] = to_string(config.optimizer);
  summary["budget"] = config.budget;
  summary["seeds"] = config.seeds;
  summary["spec"] = spec_json(bench.spec);
  summary["parameters"] = json::array();
  for (const auto& p : bench.netlist.params) summary["parameters"].push_back(p.name);
  if (bench.reference) {
    const SimResult ref = simulate(bench.netlist, scale_action(*bench.reference, bench.netlist.params), bench.sim);
    summary["reference_metrics"] = ref.ok ? metrics_json(ref.metrics) : json(nullptr);
  } else {
    summary["reference_metrics"] = nullptr;
  }
  std::vector<double> best_d, first;
  long never = 0;
  json per_seed = json::array();
  for (const auto& o : outcomes) {
    best_d.push_back(o.best_d);
    if (o.first_satisfied < 0) {
      ++never;
      first.push_back(std::numeric_limits<double>::infinity());
    } else {
      first.push_back(static_cast<double>(o.first_satisfied));
    }
    json q = json::array();
    for (double v : o.best_q) q.push_back(finite_or_null(v));
    per_seed.push_back({{"seed", o.seed},
                        {"evaluations", o.evaluations},
                        {"best_d", o.best_d},
                        {"satisfied", o.satisfied},
                        {"first_satisfied", o.first_satisfied < 0 ? json(nullptr) : json(o.first_satisfied)},
                        {"best_x", o.best_x},
                        {"best_metrics", o.best_metrics.valid ? metrics_json(o.best_metrics) : json(nullptr)},
                        {"best_q", q}});
  }
  summary["per_seed"] = per_seed;
  summary["best_d"] = stats_of(best_d);
  summary["first_satisfied"] = stats_of(first);
  summary["first_satisfied"]["never"] = never;
  write_text(config.output_dir / "summary.json", summary.dump(2) + "\n");

  json meta = {{"started", started}, {"finished", iso_now()}, {"workers", workers}};
  write_text(config.output_dir / "metadata.json", meta.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------- tables

std::string make_table(const std::vector<json>& summaries, TableFormat format) {
  if (summaries.empty()) throw ConfigError("table needs at least one summary");
  const std::string benchmark = summaries.front().at("benchmark").get<std::string>();
  for (const auto& s : summaries) {
    if (s.at("benchmark").get<std::string>() != benchmark) {
      throw ConfigError("cannot tabulate mixed benchmarks ('" + benchmark + "' and '" +
                        s.at("benchmark").get<std::string>() + "')");
    }
  }
  const DesignSpec spec = spec_from_json(summaries.front().at("spec"));
  const json& ref_json = summaries.front().at("reference_metrics");
  const std::optional<MetricSet> reference =
      ref_json.is_null() ? std::nullopt : std::optional<MetricSet>(metrics_from_json(ref_json));

  std::vector<std::string> header = {"optimizer", "simulations"};
  for (const auto& k : metric_keys()) header.push_back(k);
  for (const auto* h : {"satisfied", "d", "relative_score", "violations"}) header.push_back(h);

  std::vector<std::vector<std::string>> rows;
  auto metric_cells = [&](const MetricSet& m, std::vector<std::string>& row) {
    for (const auto& k : metric_keys()) row.push_back(format_number(*metric_value(m, k)));
  };
  auto violations = [&](const MetricSet& m) {
    std::string v;
    const Score sc = score(spec, m);
    for (std::size_t i = 0; i < spec.items.size(); ++i) {
      if (spec.items[i].spec_class == SpecClass::HardConstraint && !(sc.q[i] >= 1.0)) {
        v += (v.empty() ? "" : ";") + spec.items[i].metric_key;
      }
    }
    return v;
  };

  if (reference) {
    const Score sc = score(spec, *reference);
    std::vector<std::string> row = {"reference", "-"};
    metric_cells(*reference, row);
    row.push_back(sc.satisfied ? "yes" : "no");
    row.push_back(format_number(sc.d));
    row.push_back(format_number(relative_score(spec, *reference, *reference)));
    row.push_back(violations(*reference));
    rows.push_back(row);
  }

  for (const auto& s : summaries) {
    // The seed whose best d is the (lower) median stands in for the run.
    std::vector<const json*> seeds;
    for (const auto& p : s.at("per_seed")) seeds.push_back(&p);
    std::sort(seeds.begin(), seeds.end(), [](const json* a, const json* b) {
      return a->at("best_d").get<double>() < b->at("best_d").get<double>();
    });
    const json& pick = *seeds[(seeds.size() - 1) / 2];
    std::vector<std::string> row = {s.at("optimizer").get<std::string>(), std::to_string(s.at("budget").get<long>())};
    if (pick.at("best_metrics").is_null()) {
      for (std::size_t i = 0; i < metric_keys().size(); ++i) row.push_back("");
      row.push_back("no");
      row.push_back(format_number(pick.at("best_d").get<double>()));
      row.push_back("");
      row.push_back("simulation failed");
    } else {
      const MetricSet m = metrics_from_json(pick.at("best_metrics"));
      metric_cells(m, row);
      row.push_back(pick.at("satisfied").get<bool>() ? "yes" : "no");
      row.push_back(format_number(pick.at("best_d").get<double>()));
      row.push_back(reference ? format_number(relative_score(spec, m, *reference)) : "");
      row.push_back(violations(m));
    }
    rows.push_back(row);
  }

  std::ostringstream os;
  if (format == TableFormat::Csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  } else {
    auto line = [&](const std::vector<std::string>& cells) {
      os << '|';
      for (const auto& c : cells) os << ' ' << c << " |";
      os << '\n';
    };
    os << "Benchmark: " << benchmark << "\n\n";
    line(header);
    os << '|';
    for (std::size_t i = 0; i < header.size(); ++i) os << "---|";
    os << '\n';
    for (auto r : rows) {
      // Violated hard constraints are marked in the markdown view.
      if (!r.back().empty()) r.back() = "**" + r.back() + "**";
      line(r);
    }
  }
  return os.str();
}

// ---------------------------------------------------------------- checks

std::vector<std::string> selfcheck() {
  std::vector<std::string> problems;
  for (const auto& def : benchmark_registry()) {
    try {
      const Netlist n = parse_netlist(def.netlist_text);
      def.spec.validate();
      if (def.spec.reward.failure_floor >= def.spec.reward.e0) {
        problems.push_back(def.name + ": failure floor must sit below e0");
      }
      if (def.sim.ac_input.empty() || !n.find_element(def.sim.ac_input)) {
        problems.push_back(def.name + ": AC input '" + def.sim.ac_input + "' is not an element");
      }
      if (!n.node_index(def.sim.ac_output)) {
        problems.push_back(def.name + ": AC output node '" + def.sim.ac_output + "' does not exist");
      }
      if (def.reference) {
        if (def.reference->size() != n.params.size()) {
          problems.push_back(def.name + ": reference design has the wrong dimension");
        } else {
          const SimResult r = simulate(n, scale_action(*def.reference, n.params), def.sim);
          if (!r.ok) problems.push_back(def.name + ": reference design fails to simulate: " + r.failure);
        }
      }
    } catch (const std::exception& e) {
      problems.push_back(def.name + ": " + e.what());
    }
  }
  return problems;
}

json calibrate(const std::string& benchmark, long samples, std::uint64_t seed, double target_fraction) {
  if (samples < 1) throw ConfigError("calibration needs at least one sample");
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) throw ConfigError("target fraction must lie in (0, 1)");
  const BenchmarkDef& def = find_benchmark(benchmark);
  const Netlist netlist = parse_netlist(def.netlist_text);
  CircuitObjective objective(netlist, def.spec, def.sim);
  Rng rng = make_rng(seed, "optimizer");

  std::vector<MetricSet> valid;
  std::vector<double> a(objective.dimension());
  for (long i = 0; i < samples; ++i) {
    for (auto& v : a) v = uniform(rng, -1.0, 1.0);
    const Evaluation ev = objective.evaluate(a);
    if (ev.sim.ok && ev.sim.metrics.valid) valid.push_back(ev.sim.metrics);
  }
  if (valid.empty()) throw std::runtime_error("no calibration sample simulated successfully");

  const auto& items = def.spec.items;
  std::vector<std::vector<double>> sorted(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    for (const auto& m : valid) sorted[k].push_back(*metric_value(m, items[k].metric_key));
    std::sort(sorted[k].begin(), sorted[k].end());
  }
  // Peaking keeps its fixed limit: most random designs have none, so a quantile would be 0.
  auto calibrated = [&](std::size_t k) {
    return items[k].spec_class == SpecClass::HardConstraint && items[k].metric_key != "peaking";
  };
  // Threshold admitting a marginal fraction p of samples for item k.
  auto marginal = [&](std::size_t k, double p) {
    const auto& v = sorted[k];
    const std::size_t n = v.size();
    const std::size_t idx = std::min(n - 1, static_cast<std::size_t>(std::floor(p * static_cast<double>(n))));
    return items[k].direction == Direction::AtMost ? v[idx] : v[n - 1 - idx];
  };
  // Two significant digits, rounded through decimal text so thresholds print cleanly.
  auto round2 = [](double v) {
    if (!(v > 0.0)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", v);
    return std::strtod(buf, nullptr);
  };
  auto thresholds_for = [&](double p) {
    std::vector<double> t(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) t[k] = calibrated(k) ? round2(marginal(k, p)) : items[k].threshold;
    return t;
  };
  auto meets = [&](const MetricSet& m, const std::vector<double>& t) {
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (items[k].spec_class != SpecClass::HardConstraint) continue;
      const double y = *metric_value(m, items[k].metric_key);
      if (items[k].direction == Direction::AtLeast ? y < t[k] : y > t[k]) return false;
    }
    return true;
  };
  auto joint = [&](const std::vector<double>& t) {
    long n = 0;
    for (const auto& m : valid) n += meets(m, t);
    return static_cast<double>(n) / static_cast<double>(valid.size());
  };

  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (joint(thresholds_for(mid)) < target_fraction ? lo : hi) = mid;
  }
  std::vector<double> chosen = thresholds_for(hi);
  // Optimization targets sit at the median among the jointly satisfying designs.
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].spec_class != SpecClass::OptimizationTarget) continue;
    std::vector<double> v;
    for (const auto& m : valid) {
      if (meets(m, chosen)) v.push_back(*metric_value(m, items[k].metric_key));
    }
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      chosen[k] = round2(v[v.size() / 2]);
    }
  }

  json out;
  out["benchmark"] = benchmark;
  out["samples"] = samples;
  out["seed"] = seed;
  out["valid"] = valid.size();
  out["target_fraction"] = target_fraction;
  out["joint_fraction"] = joint(chosen);
  out["marginal_fraction"] = hi;
  json th = json::array();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& v = sorted[k];
    auto q = [&](double p) { return v[std::min(v.size() - 1, static_cast<std::size_t>(p * static_cast<double>(v.size())))]; };
    th.push_back({{"metric", items[k].metric_key},
                  {"direction", to_string(items[k].direction)},
                  {"class", to_string(items[k].spec_class)},
                  {"threshold", chosen[k]},
                  {"calibrated", calibrated(k) || items[k].spec_class == SpecClass::OptimizationTarget},
                  {"quantiles", {{"p01", q(0.01)}, {"p10", q(0.1)}, {"p50", q(0.5)}, {"p90", q(0.9)}, {"p99", q(0.99)}}}});
  }
  out["thresholds"] = th;
  return out;
}

}  // namespace ampsize
