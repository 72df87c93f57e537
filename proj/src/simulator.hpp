#pragma once

#include <complex>
#include <string>
#include <vector>

#include "netlist.hpp"

namespace ampsize {

// Level-1 square-law transistor constants. lambda_per_um is divided by the
// channel length in µm to get λ for a device.
struct DeviceModel {
  double vth0 = 0.4;             // V
  double kprime = 200e-6;        // A/V^2
  double lambda_per_um = 0.1;    // 1/V · µm
  double cox = 5e-3;             // F/m^2 (5 fF/µm^2)
  double gamma_noise = 2.0 / 3.0;
  double temperature = 300.0;    // K

  static DeviceModel default_nmos() { return {}; }
  static DeviceModel default_pmos() {
    DeviceModel m;
    m.kprime = 80e-6;
    return m;
  }
};

struct DeviceModels {
  DeviceModel nmos = DeviceModel::default_nmos();
  DeviceModel pmos = DeviceModel::default_pmos();

  const DeviceModel& for_kind(ElementKind k) const { return k == ElementKind::Pmos ? pmos : nmos; }
};

enum class MosRegion { Cutoff, Triode, Saturation };

struct TransistorOpPoint {
  std::string name;
  MosRegion region = MosRegion::Cutoff;
  double vth = 0.0;
  double gm = 0.0;
  double vdsat = 0.0;
  double id = 0.0;
  double gds = 0.0;
  double cgs = 0.0;
  double cgd = 0.0;
  double gamma_eff = 0.0;
};

// Linearized drain current (into the drain) w.r.t. the three terminal voltages.
struct MosLinearization {
  double d_vd = 0.0;
  double d_vg = 0.0;
  double d_vs = 0.0;
};

struct DcResult {
  std::vector<double> node_voltages;    // per ResolvedCircuit::nodes
  std::vector<double> source_currents;  // per voltage source, current drawn from its + terminal
  double supply_current = 0.0;          // A, sum over voltage sources
  double power = 0.0;                   // W
  double supply_voltage = 0.0;          // largest |V| among voltage sources
  std::vector<TransistorOpPoint> transistor_ops;  // element order
  std::vector<MosLinearization> linearization;    // parallel to transistor_ops
  double residual = 0.0;                // max KCL residual at the solution
  int iterations = 0;
  bool used_source_stepping = false;
};

struct AcResponse {
  std::vector<double> freqs;
  std::vector<std::complex<double>> values;  // V(output) per unit input
};

struct NoiseResult {
  double output_psd = 0.0;            // V^2/Hz at the output node
  double transimpedance = 0.0;        // |V(out)/I(in)| at the analysis frequency
  double input_noise_density = 0.0;   // A/sqrt(Hz)
};

struct MetricSet {
  bool valid = false;
  double gain = 0.0;                 // Ω (or V/V for a voltage-driven input)
  double gain_db_ohm = 0.0;
  double bandwidth = 0.0;            // Hz
  bool bandwidth_in_range = false;
  double peaking = 0.0;              // dB
  double power = 0.0;                // W
  double gate_area = 0.0;            // m^2
  double input_noise_density = 0.0;  // A/sqrt(Hz)
};

struct SimConfig {
  double fmin = 1.0;
  double fmax = 100e9;
  int points_per_decade = 20;
  double noise_ref_hz = 0.0;  // <= 0: geometric midpoint of the passband
  DeviceModels models;
  std::string ac_input;       // source element name
  std::string ac_output;      // node name
  double ac_magnitude = 1.0;
  double gmin = 1e-12;
  int max_iterations = 200;
  double residual_tol = 1e-9;
};

struct SimResult {
  bool ok = false;
  std::string failure;
  DcResult dc;
  AcResponse ac;
  NoiseResult noise;
  MetricSet metrics;
};

// Computes the drain current into the drain and its partial derivatives.
// Exposed for tests and the transistor op-point report.
struct MosEval {
  double id = 0.0;
  MosLinearization lin;
  MosRegion region = MosRegion::Cutoff;
  double vov = 0.0;
  double gm = 0.0;
  double gds = 0.0;
};
MosEval evaluate_mos(const ResolvedElement& m, const DeviceModel& model, double vd, double vg, double vs);

std::vector<double> log_sweep(double fmin, double fmax, int points_per_decade);

DcResult dc_solve(const ResolvedCircuit& circuit, const DeviceModels& models, const SimConfig& config = {});

AcResponse ac_solve(const ResolvedCircuit& circuit, const DeviceModels& models, const DcResult& dc,
                    const std::vector<double>& freqs, const std::string& ac_input,
                    const std::string& ac_output, double magnitude = 1.0);

NoiseResult noise_analysis(const ResolvedCircuit& circuit, const DeviceModels& models, const DcResult& dc,
                           double freq, const std::string& ac_input, const std::string& ac_output);

// Metrics except input noise, which depends on the passband found here.
MetricSet extract_metrics(const ResolvedCircuit& circuit, const AcResponse& ac, const DcResult& dc,
                          double ac_magnitude = 1.0);

double noise_reference_frequency(const SimConfig& config, const MetricSet& metrics);

// Never throws on circuit failures: they come back as ok = false.
SimResult simulate(const Netlist& netlist, const ParamVector& x, const SimConfig& config);

}  // namespace ampsize
