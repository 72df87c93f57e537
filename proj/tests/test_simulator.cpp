#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

#include "benchmarks.hpp"
#include "errors.hpp"
#include "random.hpp"
#include "rlenv.hpp"
#include "simulator.hpp"

namespace ampsize {
namespace {

constexpr double kB = 1.380649e-23;

ResolvedCircuit circuit(const char* text) { return resolve(parse_netlist(text), ParamVector{}); }

DeviceModels zero_lambda() {
  DeviceModels m;
  m.nmos.lambda_per_um = 0.0;
  m.pmos.lambda_per_um = 0.0;
  return m;
}

double node_v(const ResolvedCircuit& c, const DcResult& dc, const char* name) {
  return dc.node_voltages[static_cast<std::size_t>(c.node_index(name))];
}

TEST(Dc, ResistiveDivider) {
  const auto c = circuit("V1 a 0 1\nR1 a m 1k\nR2 m 0 1k\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  EXPECT_NEAR(node_v(c, dc, "m"), 0.5, 1e-9 * 0.5);
  EXPECT_NEAR(dc.supply_current, 0.5e-3, 1e-9 * 0.5e-3);
  EXPECT_NEAR(dc.power, 0.5e-3, 1e-9 * 0.5e-3);
  EXPECT_LT(dc.residual, 1e-9);
}

TEST(Dc, SaturatedNmosMatchesSquareLaw) {
  const auto c = circuit("VG g 0 0.6\nVD d 0 1.8\nM1 d g 0 W=10u L=1u TYPE=nmos\n");
  const DcResult dc = dc_solve(c, zero_lambda());
  const auto& op = dc.transistor_ops.at(0);
  // Hand square law: 0.5 * 200e-6 * 10 * 0.2^2.
  const double id = 0.5 * 200e-6 * 10.0 * 0.2 * 0.2;
  EXPECT_EQ(op.region, MosRegion::Saturation);
  EXPECT_NEAR(op.id, id, 1e-6 * id);
  EXPECT_NEAR(op.id, 40e-6, 1e-6 * 40e-6);
  EXPECT_NEAR(op.gm, 2.0 * id / 0.2, 1e-6 * 0.4e-3);
  EXPECT_NEAR(op.vdsat, 0.2, 1e-6 * 0.2);
  EXPECT_NEAR(op.vth, 0.4, 1e-12);
  EXPECT_NEAR(op.cgs, 2.0 / 3.0 * 10e-6 * 1e-6 * 5e-3, 1e-24);
  EXPECT_NEAR(op.cgd, 0.1 * 10e-6 * 1e-6 * 5e-3, 1e-24);
  EXPECT_DOUBLE_EQ(op.gamma_eff, 2.0 / 3.0);
  EXPECT_NEAR(dc.source_currents.at(1), id, 1e-6 * id);
}

TEST(Dc, ChannelLengthModulation) {
  const auto c = circuit("VG g 0 0.6\nVD d 0 1.8\nM1 d g 0 W=10u L=0.5u TYPE=nmos\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const double lambda = 0.1 / 0.5;
  const double base = 0.5 * 200e-6 * 20.0 * 0.04;
  const auto& op = dc.transistor_ops.at(0);
  EXPECT_NEAR(op.id, base * (1.0 + lambda * 1.8), 1e-6 * base);
  EXPECT_NEAR(op.gds, base * lambda, 1e-6 * base * lambda);
}

TEST(Dc, TriodeNmos) {
  const auto c = circuit("VG g 0 0.6\nVD d 0 0.1\nM1 d g 0 W=10u L=1u\n");
  const DcResult dc = dc_solve(c, zero_lambda());
  const auto& op = dc.transistor_ops.at(0);
  EXPECT_EQ(op.region, MosRegion::Triode);
  const double id = 200e-6 * 10.0 * (0.2 * 0.1 - 0.1 * 0.1 / 2.0);
  EXPECT_NEAR(op.id, id, 1e-6 * id);
  EXPECT_NEAR(op.gds, 200e-6 * 10.0 * (0.2 - 0.1), 1e-6 * 2e-4);
}

TEST(Dc, CutoffNmos) {
  const auto c = circuit("VG g 0 0.3\nVD d 0 1\nM1 d g 0 W=10u L=1u\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const auto& op = dc.transistor_ops.at(0);
  EXPECT_EQ(op.region, MosRegion::Cutoff);
  EXPECT_EQ(op.id, 0.0);
  EXPECT_EQ(op.gm, 0.0);
  EXPECT_EQ(op.cgs, 0.0);
}

TEST(Dc, PmosMirrorsNmos) {
  const auto c = circuit("VS vdd 0 1.8\nVG g 0 1.2\nVD d 0 0\nM1 d g vdd W=10u L=1u TYPE=pmos\n");
  const DcResult dc = dc_solve(c, zero_lambda());
  const double id = 0.5 * 80e-6 * 10.0 * 0.2 * 0.2;
  EXPECT_EQ(dc.transistor_ops.at(0).region, MosRegion::Saturation);
  EXPECT_NEAR(std::abs(dc.transistor_ops.at(0).id), id, 1e-6 * id);
}

TEST(Dc, DiodeConnectedLoadConverges) {
  const auto c = circuit("VDD vdd 0 1.8\nR1 vdd d 10k\nM1 d d 0 W=10u L=1u\n");
  const DcResult dc = dc_solve(c, zero_lambda());
  // KCL at d: (1.8 - v)/10k = 0.5 k' (W/L) (v - 0.4)^2, solved in closed form.
  const double a = 0.5 * 200e-6 * 10.0 * 10e3;
  const double vov = (-1.0 + std::sqrt(1.0 + 4.0 * a * (1.8 - 0.4))) / (2.0 * a);
  EXPECT_NEAR(node_v(c, dc, "d"), 0.4 + vov, 1e-9);
  EXPECT_LT(dc.residual, 1e-9);
}

TEST(Dc, CapacitorOnlyNodeIsFloating) {
  const auto c = circuit("V1 a 0 1\nR1 a 0 1k\nC1 a x 1p\n");
  try {
    dc_solve(c, DeviceModels{});
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
  }
}

TEST(Ac, RcLowPassCorner) {
  const auto c = circuit("VIN in 0 0\nR1 in out 1k\nC1 out 0 1n\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const double fc = 1.0 / (2.0 * std::numbers::pi * 1e3 * 1e-9);
  const AcResponse ac = ac_solve(c, DeviceModels{}, dc, {1.0, fc}, "VIN", "out");
  EXPECT_NEAR(std::abs(ac.values[0]), 1.0, 1e-6);
  EXPECT_NEAR(std::arg(ac.values[0]), 0.0, 1e-5);
  EXPECT_NEAR(std::abs(ac.values[1]), 1.0 / std::sqrt(2.0), 1e-6 / std::sqrt(2.0));
  EXPECT_NEAR(std::arg(ac.values[1]), -std::numbers::pi / 4.0, 1e-9);
}

TEST(Ac, DividerIsFlat) {
  const auto c = circuit("VIN in 0 0\nR1 in out 1k\nR2 out 0 1k\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const AcResponse ac = ac_solve(c, DeviceModels{}, dc, log_sweep(1.0, 1e9, 5), "VIN", "out");
  for (const auto& v : ac.values) {
    EXPECT_NEAR(std::abs(v), 0.5, 1e-12);
    EXPECT_NEAR(std::arg(v), 0.0, 1e-12);
  }
}

TEST(Ac, LinearInInputMagnitudeAndPassive) {
  const auto c = circuit("VIN in 0 0\nR1 in out 1k\nC1 out 0 1n\nR2 out 0 5k\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const auto freqs = log_sweep(1.0, 1e9, 10);
  const AcResponse a1 = ac_solve(c, DeviceModels{}, dc, freqs, "VIN", "out", 1.0);
  const AcResponse a2 = ac_solve(c, DeviceModels{}, dc, freqs, "VIN", "out", 2.0);
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    EXPECT_NEAR(std::abs(a2.values[i] - 2.0 * a1.values[i]), 0.0, 1e-12);
    EXPECT_LE(std::abs(a1.values[i]), 1.0 + 1e-12);
    if (i) EXPECT_LE(std::abs(a1.values[i]), std::abs(a1.values[i - 1]) + 1e-15);
  }
}

TEST(Ac, MissingDesignationThrows) {
  const auto c = circuit("VIN in 0 0\nR1 in out 1k\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  EXPECT_THROW(ac_solve(c, DeviceModels{}, dc, {1.0}, "VX", "out"), CircuitError);
  EXPECT_THROW(ac_solve(c, DeviceModels{}, dc, {1.0}, "VIN", "nowhere"), CircuitError);
}

TEST(Sweep, LogSpacing) {
  const auto f = log_sweep(1.0, 1e3, 10);
  ASSERT_EQ(f.size(), 31u);
  EXPECT_DOUBLE_EQ(f.front(), 1.0);
  EXPECT_NEAR(f.back(), 1e3, 1e-9);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_GT(f[i], f[i - 1]);
}

TEST(Noise, ResistorThermal) {
  const auto c1 = circuit("IIN 0 out 0\nR1 out 0 1k\n");
  const auto c2 = circuit("IIN 0 out 0\nR1 out 0 2k\n");
  const NoiseResult n1 = noise_analysis(c1, DeviceModels{}, dc_solve(c1, DeviceModels{}), 1e3, "IIN", "out");
  const NoiseResult n2 = noise_analysis(c2, DeviceModels{}, dc_solve(c2, DeviceModels{}), 1e3, "IIN", "out");
  const double expected = 4.0 * kB * 300.0 * 1000.0;
  EXPECT_NEAR(n1.output_psd, expected, 1e-3 * expected);
  EXPECT_NEAR(n1.output_psd, 1.65678e-17, 1e-3 * 1.65678e-17);
  EXPECT_NEAR(n2.output_psd / n1.output_psd, 2.0, 1e-9);
  EXPECT_NEAR(n1.transimpedance, 1000.0, 1e-9);
  EXPECT_NEAR(n1.input_noise_density, std::sqrt(4.0 * kB * 300.0 / 1000.0), 1e-3 * 4e-12);
}

TEST(Noise, NoSourcesGiveZero) {
  const auto c = circuit("VIN in 0 0\nC1 in out 1p\nC2 out 0 1p\nVB out 0 0\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  EXPECT_EQ(noise_analysis(c, DeviceModels{}, dc, 1e3, "VIN", "out").output_psd, 0.0);
}

TEST(Noise, MosChannelThermal) {
  // Transistor noise current 4kT*gamma*gm flows through the 1k load.
  const auto c = circuit("VDD vdd 0 1.8\nVG g 0 0.6\nIIN 0 d 0\nRD vdd d 1k\nM1 d g 0 W=10u L=1u\n");
  const DeviceModels m = zero_lambda();
  const DcResult dc = dc_solve(c, m);
  const NoiseResult n = noise_analysis(c, m, dc, 1e3, "IIN", "d");
  const double gm = 0.4e-3;
  const double expected = 4.0 * kB * 300.0 * (2.0 / 3.0 * gm + 1.0 / 1000.0) * 1000.0 * 1000.0;
  EXPECT_NEAR(n.output_psd, expected, 1e-6 * expected);
}

TEST(Metrics, RcBandwidthAndPeaking) {
  const auto c = circuit("VIN in 0 0\nR1 in out 1k\nC1 out 0 1n\n");
  const DcResult dc = dc_solve(c, DeviceModels{});
  const AcResponse ac = ac_solve(c, DeviceModels{}, dc, log_sweep(1.0, 1e9, 30), "VIN", "out");
  const MetricSet m = extract_metrics(c, ac, dc);
  const double fc = 1.0 / (2.0 * std::numbers::pi * 1e-6);
  EXPECT_NEAR(m.bandwidth, fc, 0.01 * fc);
  EXPECT_TRUE(m.bandwidth_in_range);
  EXPECT_EQ(m.peaking, 0.0);
  EXPECT_NEAR(m.gain, 1.0, 1e-9);
}

TEST(Metrics, GainInDbOhm) {
  const auto c = circuit("V1 a 0 1\nR1 a 0 1k\n");
  AcResponse ac;
  ac.freqs = {1.0, 10.0};
  ac.values = {2e4, 2e4};
  const MetricSet m = extract_metrics(c, ac, DcResult{});
  EXPECT_NEAR(m.gain_db_ohm, 20.0 * std::log10(2e4), 1e-12);
  EXPECT_NEAR(m.gain_db_ohm, 86.021, 1e-3);
  EXPECT_FALSE(m.bandwidth_in_range);
  EXPECT_EQ(m.bandwidth, 10.0);
}

TEST(Metrics, PeakingFromResonance) {
  AcResponse ac;
  ac.freqs = {1.0, 10.0, 100.0, 1000.0};
  ac.values = {1.0, 2.0, 0.5, 0.1};
  const MetricSet m = extract_metrics(circuit("V1 a 0 1\nR1 a 0 1k\n"), ac, DcResult{});
  EXPECT_NEAR(m.peaking, 20.0 * std::log10(2.0), 1e-12);
}

TEST(Metrics, GateArea) {
  const auto c = circuit("V1 a 0 1\nM1 a a 0 W=10u L=1u\nM2 a a 0 W=5u L=2u\n");
  const MetricSet m = extract_metrics(c, AcResponse{}, DcResult{});
  EXPECT_NEAR(m.gate_area, 20e-12, 1e-24);
}

class BenchmarkSim : public ::testing::Test {
 protected:
  const BenchmarkDef& def = find_benchmark("tia2");
  Netlist netlist = parse_netlist(def.netlist_text);
};

TEST_F(BenchmarkSim, MidpointIsFiniteAndKclHolds) {
  const SimResult r = simulate(netlist, scale_action(std::vector<double>(7, 0.0), netlist.params), def.sim);
  ASSERT_TRUE(r.ok) << r.failure;
  for (const auto& k : metric_keys()) EXPECT_TRUE(std::isfinite(*metric_value(r.metrics, k))) << k;
  EXPECT_LT(r.dc.residual, 1e-9);
  EXPECT_GE(r.metrics.peaking, 0.0);
  EXPECT_NEAR(r.metrics.gain_db_ohm, 20.0 * std::log10(r.metrics.gain), 1e-9);
}

TEST_F(BenchmarkSim, MinimumFirstTransistorNeverCrashes) {
  std::vector<double> a(7, 0.0);
  a[0] = -1.0;
  const SimResult r = simulate(netlist, scale_action(a, netlist.params), def.sim);
  if (r.ok) EXPECT_TRUE(std::isfinite(r.metrics.gain));
}

TEST_F(BenchmarkSim, Deterministic) {
  Rng rng = make_rng(5, "test");
  for (int i = 0; i < 20; ++i) {
    std::vector<double> a(7);
    for (auto& v : a) v = uniform(rng, -1.0, 1.0);
    const ParamVector x = scale_action(a, netlist.params);
    const SimResult r1 = simulate(netlist, x, def.sim), r2 = simulate(netlist, x, def.sim);
    ASSERT_EQ(r1.ok, r2.ok);
    for (const auto& k : metric_keys()) {
      const double v1 = *metric_value(r1.metrics, k), v2 = *metric_value(r2.metrics, k);
      EXPECT_EQ(std::memcmp(&v1, &v2, sizeof v1), 0) << k;
    }
    if (r1.ok) EXPECT_GE(r1.metrics.input_noise_density, 0.0);
  }
}

TEST(Simulate, FailureIsEmbedded) {
  const Netlist n = parse_netlist("V1 a 0 1\nR1 a 0 1k\nC1 a x 1p\n");
  SimConfig cfg;
  cfg.ac_input = "V1";
  cfg.ac_output = "a";
  const SimResult r = simulate(n, ParamVector{}, cfg);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.failure.empty());
}

}  // namespace
}  // namespace ampsize
