#include "benchmarks.hpp"

#include "errors.hpp"

namespace ampsize {

namespace {

// Shunt-feedback common-source stage followed by a source follower.
constexpr const char* kTia2 = R"(* two-stage transimpedance amplifier
.param w1 0.5u 100u log
.param l1 0.18u 2u log
.param w2 0.5u 100u log
.param l2 0.18u 2u log
.param rd1 100 100k log
.param rf 100 100k log
.param rs 100 100k log
VDD vdd 0 1.8
IIN 0 in 0
CPD in 0 200f
M1 n1 in 0 W={w1} L={l1} TYPE=nmos
RD1 vdd n1 {rd1}
RF n1 in {rf}
M2 vdd n1 out W={w2} L={l2} TYPE=nmos
RS out 0 {rs}
CL out 0 50f
.order M1 RD1 RF M2 RS
.end
)";

// Three inverting common-source stages closed by one feedback resistor.
constexpr const char* kTia3 = R"(* three-stage transimpedance amplifier
.param w1 0.5u 100u log
.param l1 0.18u 2u log
.param rd1 100 100k log
.param w2 0.5u 100u log
.param l2 0.18u 2u log
.param rd2 100 100k log
.param w3 0.5u 100u log
.param l3 0.18u 2u log
.param rd3 100 100k log
.param rf 100 100k log
VDD vdd 0 1.8
IIN 0 in 0
CPD in 0 200f
M1 n1 in 0 W={w1} L={l1} TYPE=nmos
RD1 vdd n1 {rd1}
M2 n2 n1 0 W={w2} L={l2} TYPE=nmos
RD2 vdd n2 {rd2}
M3 out n2 0 W={w3} L={l3} TYPE=nmos
RD3 vdd out {rd3}
RF out in {rf}
CL out 0 50f
.order M1 RD1 M2 RD2 M3 RD3 RF
.end
)";

SpecItem hard(const char* key, double threshold, Direction dir) {
  return {key, threshold, dir, SpecClass::HardConstraint};
}

SpecItem target(const char* key, double threshold, Direction dir) {
  return {key, threshold, dir, SpecClass::OptimizationTarget};
}

SimConfig tia_sim() {
  SimConfig c;
  c.ac_input = "IIN";
  c.ac_output = "out";
  return c;
}

std::vector<BenchmarkDef> build_registry() {
  std::vector<BenchmarkDef> out;

  // Thresholds come from calibration/<name>.json (random sampling, see README).
  BenchmarkDef tia2;
  tia2.name = "tia2";
  tia2.description = "shunt-feedback stage + source follower, 7 parameters";
  tia2.netlist_text = kTia2;
  tia2.spec.items = {
      hard("input_noise_density", 0.84e-12, Direction::AtMost),
      hard("gain_db_ohm", 82.0, Direction::AtLeast),
      hard("peaking", 1.0, Direction::AtMost),
      hard("power", 86e-6, Direction::AtMost),
      target("bandwidth", 89e6, Direction::AtLeast),
  };
  tia2.spec.reward = RewardConfig::defaults_for(4, 1);
  tia2.sim = tia_sim();
  tia2.reference = std::vector<double>(7, 0.0);
  out.push_back(std::move(tia2));

  BenchmarkDef tia3;
  tia3.name = "tia3";
  tia3.description = "three common-source stages with global feedback, 10 parameters";
  tia3.netlist_text = kTia3;
  tia3.spec.items = {
      hard("bandwidth", 1e9, Direction::AtLeast),
      hard("gain", 4.7e3, Direction::AtLeast),
      hard("power", 1.1e-3, Direction::AtMost),
      target("gate_area", 14e-12, Direction::AtMost),
  };
  tia3.spec.reward = RewardConfig::defaults_for(3, 1);
  tia3.sim = tia_sim();
  tia3.reference = std::vector<double>(10, 0.0);
  out.push_back(std::move(tia3));

  return out;
}

}  // namespace

const std::vector<BenchmarkDef>& benchmark_registry() {
  static const std::vector<BenchmarkDef> registry = build_registry();
  return registry;
}

std::vector<std::string> benchmark_names() {
  std::vector<std::string> names;
  for (const auto& b : benchmark_registry()) names.push_back(b.name);
  return names;
}

const BenchmarkDef& find_benchmark(const std::string& name) {
  for (const auto& b : benchmark_registry()) {
    if (b.name == name) return b;
  }
  std::string known;
  for (const auto& n : benchmark_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown benchmark '" + name + "' (registered: " + known + ")");
}

}  // namespace ampsize
