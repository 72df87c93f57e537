#include "simulator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace ampsize {

namespace {

constexpr double kBoltzmann = 1.380649e-23;

using Complex = std::complex<double>;

// Unknown layout: node voltages first, then one branch current per voltage source.
struct MnaLayout {
  int nodes = 0;
  std::vector<int> vsource_elements;  // element indices
  std::vector<int> mos_elements;

  explicit MnaLayout(const ResolvedCircuit& c) : nodes(static_cast<int>(c.nodes.size())) {
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
      const auto k = c.elements[i].kind;
      if (k == ElementKind::VoltageSource) vsource_elements.push_back(static_cast<int>(i));
      if (k == ElementKind::Nmos || k == ElementKind::Pmos) mos_elements.push_back(static_cast<int>(i));
    }
  }
  int size() const { return nodes + static_cast<int>(vsource_elements.size()); }
};

bool is_mos(ElementKind k) { return k == ElementKind::Nmos || k == ElementKind::Pmos; }

// Every node needs a conductive DC path (R, V, or transistor channel) to ground.
void check_dc_paths(const ResolvedCircuit& c) {
  const int n = static_cast<int>(c.nodes.size());
  std::vector<int> parent(n + 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto slot = [n](int node) { return node < 0 ? n : node; };
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto join = [&](int a, int b) { parent[find(slot(a))] = find(slot(b)); };
  for (const auto& e : c.elements) {
    switch (e.kind) {
      case ElementKind::Resistor:
      case ElementKind::VoltageSource: join(e.nodes[0], e.nodes[1]); break;
      case ElementKind::Nmos:
      case ElementKind::Pmos: join(e.nodes[0], e.nodes[2]); break;
      default: break;
    }
  }
  std::vector<std::string> floating;
  for (int i = 0; i < n; ++i) {
    if (find(i) != find(n)) floating.push_back(c.nodes[i]);
  }
  if (!floating.empty()) {
    std::string names;
    for (const auto& f : floating) names += (names.empty() ? "'" : ", '") + f + "'";
    throw SingularMatrixError("singular MNA matrix: no DC path to ground from node " + names);
  }
}

template <typename Matrix, typename Vector>
Vector solve_checked(const Matrix& a, const Vector& b, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(diag.minCoeff() > 1e-14 * scale)) {
    throw SingularMatrixError(std::string("singular ") + what + " matrix");
  }
  Vector x = lu.solve(b);
  if (!x.allFinite()) throw SingularMatrixError(std::string("non-finite ") + what + " solution");
  return x;
}

// Node shunt used only when the small-signal matrix is singular without it.
constexpr double kGminFallback = 1e-12;

class DcSystem {
 public:
  DcSystem(const ResolvedCircuit& c, const DeviceModels& m, double gmin)
      : circuit_(c), models_(m), layout_(c), gmin_(gmin) {}

  const MnaLayout& layout() const { return layout_; }

  void assemble(const Eigen::VectorXd& x, double source_scale, Eigen::VectorXd& f, Eigen::MatrixXd& j) const {
    const int size = layout_.size();
    f.setZero(size);
    j.setZero(size, size);
    auto v = [&](int node) { return node < 0 ? 0.0 : x[node]; };
    auto add_f = [&](int row, double value) {
      if (row >= 0) f[row] += value;
    };
    auto add_j = [&](int row, int col, double value) {
      if (row >= 0 && col >= 0) j(row, col) += value;
    };
    for (int i = 0; i < layout_.nodes; ++i) {
      f[i] += gmin_ * x[i];
      j(i, i) += gmin_;
    }
    int vsrc = 0;
    for (const auto& e : circuit_.elements) {
      switch (e.kind) {
        case ElementKind::Resistor: {
          const int a = e.nodes[0], b = e.nodes[1];
          const double g = 1.0 / e.value;
          const double i = g * (v(a) - v(b));
          add_f(a, i);
          add_f(b, -i);
          add_j(a, a, g);
          add_j(a, b, -g);
          add_j(b, a, -g);
          add_j(b, b, g);
          break;
        }
        case ElementKind::Capacitor: break;
        case ElementKind::CurrentSource: {
          add_f(e.nodes[0], source_scale * e.value);
          add_f(e.nodes[1], -source_scale * e.value);
          break;
        }
        case ElementKind::VoltageSource: {
          const int row = layout_.nodes + vsrc++;
          const int p = e.nodes[0], n = e.nodes[1];
          const double ik = x[row];
          add_f(p, ik);
          add_f(n, -ik);
          add_j(p, row, 1.0);
          add_j(n, row, -1.0);
          f[row] = v(p) - v(n) - source_scale * e.value;
          add_j(row, p, 1.0);
          add_j(row, n, -1.0);
          break;
        }
        case ElementKind::Nmos:
        case ElementKind::Pmos: {
          const int d = e.nodes[0], g = e.nodes[1], s = e.nodes[2];
          const MosEval ev = evaluate_mos(e, models_.for_kind(e.kind), v(d), v(g), v(s));
          add_f(d, ev.id);
          add_f(s, -ev.id);
          add_j(d, d, ev.lin.d_vd);
          add_j(d, g, ev.lin.d_vg);
          add_j(d, s, ev.lin.d_vs);
          add_j(s, d, -ev.lin.d_vd);
          add_j(s, g, -ev.lin.d_vg);
          add_j(s, s, -ev.lin.d_vs);
          break;
        }
      }
    }
  }

  double residual(const Eigen::VectorXd& x, double source_scale) const {
    Eigen::VectorXd f;
    Eigen::MatrixXd j;
    assemble(x, source_scale, f, j);
    return f.cwiseAbs().maxCoeff();
  }

  // Damped Newton-Raphson. Returns true on convergence; x holds the last iterate.
  bool newton(Eigen::VectorXd& x, double source_scale, int max_iterations, double tol, int& iterations,
              double& final_residual) const {
    Eigen::VectorXd f;
    Eigen::MatrixXd j;
    for (int it = 0; it < max_iterations; ++it) {
      ++iterations;
      assemble(x, source_scale, f, j);
      const double r = f.cwiseAbs().maxCoeff();
      final_residual = r;
      if (r < tol) return true;
      const Eigen::VectorXd dx = solve_checked(j, Eigen::VectorXd(-f), "MNA");
      double alpha = 1.0;
      Eigen::VectorXd trial = x + dx;
      double r_trial = residual(trial, source_scale);
      // Halve the step on overshoot.
      for (int k = 0; k < 12 && !(r_trial < r); ++k) {
        alpha *= 0.5;
        trial = x + alpha * dx;
        r_trial = residual(trial, source_scale);
      }
      if (!trial.allFinite()) return false;
      x = trial;
    }
    assemble(x, source_scale, f, j);
    final_residual = f.cwiseAbs().maxCoeff();
    return final_residual < tol;
  }

  // Full Newton steps with the gmin shunts removed, kept only while the
  // residual does not grow. Linear circuits land on the exact MNA solution.
  void polish(Eigen::VectorXd& x, double& final_residual) {
    const double saved = gmin_;
    gmin_ = 0.0;
    Eigen::VectorXd f;
    Eigen::MatrixXd j;
    for (int it = 0; it < 3; ++it) {
      assemble(x, 1.0, f, j);
      const double r = f.cwiseAbs().maxCoeff();
      if (it == 0) final_residual = r;
      Eigen::VectorXd dx;
      try {
        dx = solve_checked(j, Eigen::VectorXd(-f), "MNA");
      } catch (const SingularMatrixError&) {
        break;
      }
      const Eigen::VectorXd trial = x + dx;
      const double r_trial = residual(trial, 1.0);
      if (!trial.allFinite() || !(r_trial <= r)) break;
      x = trial;
      final_residual = r_trial;
    }
    gmin_ = saved;
  }

 private:
  const ResolvedCircuit& circuit_;
  const DeviceModels& models_;
  MnaLayout layout_;
  double gmin_;
};

Eigen::MatrixXd capacitance_matrix(const ResolvedCircuit& c, const MnaLayout& layout, const DcResult& dc) {
  Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  auto stamp = [&](int a, int b, double cap) {
    if (a >= 0) cm(a, a) += cap;
    if (b >= 0) cm(b, b) += cap;
    if (a >= 0 && b >= 0) {
      cm(a, b) -= cap;
      cm(b, a) -= cap;
    }
  };
  std::size_t mos = 0;
  for (const auto& e : c.elements) {
    if (e.kind == ElementKind::Capacitor) {
      stamp(e.nodes[0], e.nodes[1], e.value);
    } else if (is_mos(e.kind)) {
      const auto& op = dc.transistor_ops[mos++];
      stamp(e.nodes[1], e.nodes[2], op.cgs);
      stamp(e.nodes[1], e.nodes[0], op.cgd);
    }
  }
  return cm;
}

Eigen::MatrixXd conductance_matrix(const ResolvedCircuit& c, const MnaLayout& layout, const DcResult& dc,
                                   double gmin) {
  const int size = layout.size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(size, size);
  auto add = [&](int row, int col, double value) {
    if (row >= 0 && col >= 0) g(row, col) += value;
  };
  for (int i = 0; i < layout.nodes; ++i) g(i, i) += gmin;
  int vsrc = 0;
  std::size_t mos = 0;
  for (const auto& e : c.elements) {
    switch (e.kind) {
      case ElementKind::Resistor: {
        const double y = 1.0 / e.value;
        add(e.nodes[0], e.nodes[0], y);
        add(e.nodes[0], e.nodes[1], -y);
        add(e.nodes[1], e.nodes[0], -y);
        add(e.nodes[1], e.nodes[1], y);
        break;
      }
      case ElementKind::VoltageSource: {
        const int row = layout.nodes + vsrc++;
        add(e.nodes[0], row, 1.0);
        add(e.nodes[1], row, -1.0);
        add(row, e.nodes[0], 1.0);
        add(row, e.nodes[1], -1.0);
        break;
      }
      case ElementKind::Nmos:
      case ElementKind::Pmos: {
        const auto& lin = dc.linearization[mos++];
        const int d = e.nodes[0], gt = e.nodes[1], s = e.nodes[2];
        add(d, d, lin.d_vd);
        add(d, gt, lin.d_vg);
        add(d, s, lin.d_vs);
        add(s, d, -lin.d_vd);
        add(s, gt, -lin.d_vg);
        add(s, s, -lin.d_vs);
        break;
      }
      default: break;
    }
  }
  return g;
}

Eigen::VectorXcd input_excitation(const ResolvedCircuit& c, const MnaLayout& layout, const std::string& ac_input,
                                  double magnitude) {
  if (ac_input.empty()) throw CircuitError("no AC input source designated");
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(layout.size());
  int vsrc = 0;
  for (const auto& e : c.elements) {
    if (e.name == ac_input) {
      if (e.kind == ElementKind::CurrentSource) {
        if (e.nodes[0] >= 0) b[e.nodes[0]] -= magnitude;
        if (e.nodes[1] >= 0) b[e.nodes[1]] += magnitude;
        return b;
      }
      if (e.kind == ElementKind::VoltageSource) {
        b[layout.nodes + vsrc] = magnitude;
        return b;
      }
      throw CircuitError("AC input '" + ac_input + "' is not a source");
    }
    if (e.kind == ElementKind::VoltageSource) ++vsrc;
  }
  throw CircuitError("AC input source '" + ac_input + "' not found");
}

int output_index(const ResolvedCircuit& c, const std::string& ac_output) {
  if (ac_output.empty()) throw CircuitError("no AC output node designated");
  const int idx = c.node_index(ac_output);
  if (idx < 0) throw CircuitError("AC output cannot be ground");
  return idx;
}

}  // namespace

MosEval evaluate_mos(const ResolvedElement& m, const DeviceModel& model, double vd, double vg, double vs) {
  const double sign = m.kind == ElementKind::Pmos ? -1.0 : 1.0;
  const double beta = model.kprime * m.width / m.length;
  const double lambda = model.lambda_per_um / (m.length * 1e6);
  const double vth = model.vth0;

  const double vds = sign * (vd - vs);
  const bool reversed = vds < 0.0;
  const double a = reversed ? sign * (vg - vd) : sign * (vg - vs);
  const double b = reversed ? -vds : vds;

  MosEval ev;
  double f = 0.0, fa = 0.0, fb = 0.0;
  const double vov = a - vth;
  ev.vov = vov;
  if (vov <= 0.0) {
    ev.region = MosRegion::Cutoff;
  } else {
    const double clm = 1.0 + lambda * b;
    if (b < vov) {
      ev.region = MosRegion::Triode;
      const double f0 = beta * (vov * b - 0.5 * b * b);
      f = f0 * clm;
      fa = beta * b * clm;
      fb = beta * (vov - b) * clm + f0 * lambda;
    } else {
      ev.region = MosRegion::Saturation;
      const double f0 = 0.5 * beta * vov * vov;
      f = f0 * clm;
      fa = beta * vov * clm;
      fb = f0 * lambda;
    }
  }
  ev.gm = fa;
  ev.gds = fb;
  if (!reversed) {
    ev.id = sign * f;
    ev.lin = {fb, fa, -(fa + fb)};
  } else {
    ev.id = -sign * f;
    ev.lin = {fa + fb, -fa, -fb};
  }
  return ev;
}

std::vector<double> log_sweep(double fmin, double fmax, int points_per_decade) {
  if (!(fmin > 0.0) || !(fmax > fmin) || points_per_decade < 1) {
    throw CircuitError("invalid sweep: need 0 < fmin < fmax and points_per_decade >= 1");
  }
  const double decades = std::log10(fmax / fmin);
  const int n = std::max(1, static_cast<int>(std::lround(decades * points_per_decade)));
  std::vector<double> freqs(n + 1);
  for (int i = 0; i <= n; ++i) freqs[i] = fmin * std::pow(fmax / fmin, static_cast<double>(i) / n);
  freqs.back() = fmax;
  return freqs;
}

DcResult dc_solve(const ResolvedCircuit& circuit, const DeviceModels& models, const SimConfig& config) {
  const bool has_source = std::any_of(circuit.elements.begin(), circuit.elements.end(), [](const auto& e) {
    return e.kind == ElementKind::VoltageSource || e.kind == ElementKind::CurrentSource;
  });
  if (!has_source) throw CircuitError("circuit has no independent source");
  check_dc_paths(circuit);

  DcSystem sys(circuit, models, config.gmin);
  const auto& layout = sys.layout();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  DcResult out;
  double residual = 0.0;
  bool converged = sys.newton(x, 1.0, config.max_iterations, config.residual_tol, out.iterations, residual);
  if (!converged) {
    // Source stepping: ramp every independent source from 10% to full.
    out.used_source_stepping = true;
    x.setZero();
    converged = true;
    for (int step = 1; step <= 10 && converged; ++step) {
      converged = sys.newton(x, step / 10.0, config.max_iterations, config.residual_tol, out.iterations, residual);
    }
  }
  if (!converged) {
    throw ConvergenceError("DC operating point did not converge (residual " + std::to_string(residual) + " A)",
                           residual);
  }
  sys.polish(x, residual);
  out.residual = residual;
  out.node_voltages.assign(x.data(), x.data() + layout.nodes);
  auto v = [&](int node) { return node < 0 ? 0.0 : x[node]; };
  for (std::size_t k = 0; k < layout.vsource_elements.size(); ++k) {
    const auto& e = circuit.elements[layout.vsource_elements[k]];
    const double drawn = -x[layout.nodes + static_cast<int>(k)];
    out.source_currents.push_back(drawn);
    out.supply_current += drawn;
    out.power += e.value * drawn;
    out.supply_voltage = std::max(out.supply_voltage, std::abs(e.value));
  }
  for (int idx : layout.mos_elements) {
    const auto& e = circuit.elements[idx];
    const auto& model = models.for_kind(e.kind);
    const MosEval ev = evaluate_mos(e, model, v(e.nodes[0]), v(e.nodes[1]), v(e.nodes[2]));
    const double area_cap = e.width * e.length * model.cox;
    TransistorOpPoint op;
    op.name = e.name;
    op.region = ev.region;
    op.vth = model.vth0;
    op.gm = ev.gm;
    op.gds = ev.gds;
    op.vdsat = std::max(ev.vov, 0.0);
    op.id = std::abs(ev.id);
    op.cgd = 0.1 * area_cap;
    op.cgs = ev.region == MosRegion::Saturation ? (2.0 / 3.0) * area_cap
             : ev.region == MosRegion::Triode   ? 0.5 * area_cap
                                                : 0.0;
    op.gamma_eff = ev.region == MosRegion::Cutoff ? 0.0 : model.gamma_noise;
    out.transistor_ops.push_back(op);
    out.linearization.push_back(ev.lin);
  }
  return out;
}

AcResponse ac_solve(const ResolvedCircuit& circuit, const DeviceModels& /*models*/, const DcResult& dc,
                    const std::vector<double>& freqs, const std::string& ac_input, const std::string& ac_output,
                    double magnitude) {
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!(freqs[i] > 0.0) || (i > 0 && !(freqs[i] > freqs[i - 1]))) {
      throw CircuitError("AC frequencies must be positive and strictly increasing");
    }
  }
  const MnaLayout layout(circuit);
  const int out = output_index(circuit, ac_output);
  const Eigen::VectorXcd b = input_excitation(circuit, layout, ac_input, magnitude);
  const Eigen::MatrixXd c = capacitance_matrix(circuit, layout, dc);
  auto sweep = [&](double gmin) {
    const Eigen::MatrixXd g = conductance_matrix(circuit, layout, dc, gmin);
    AcResponse resp;
    resp.freqs = freqs;
    resp.values.reserve(freqs.size());
    Eigen::MatrixXcd y(layout.size(), layout.size());
    for (double f : freqs) {
      y.real() = g;
      y.imag() = 2.0 * M_PI * f * c;
      const Eigen::VectorXcd x = solve_checked(y, b, "AC");
      resp.values.push_back(x[out]);
    }
    return resp;
  };
  try {
    return sweep(0.0);
  } catch (const SingularMatrixError&) {
    return sweep(kGminFallback);
  }
}

NoiseResult noise_analysis(const ResolvedCircuit& circuit, const DeviceModels& models, const DcResult& dc,
                           double freq, const std::string& ac_input, const std::string& ac_output) {
  const MnaLayout layout(circuit);
  const int out = output_index(circuit, ac_output);
  const Eigen::VectorXcd b = input_excitation(circuit, layout, ac_input, 1.0);
  const Eigen::MatrixXd c = capacitance_matrix(circuit, layout, dc);
  // Adjoint: w^T u is the output response to any injection vector u.
  Eigen::VectorXcd e_out = Eigen::VectorXcd::Zero(layout.size());
  e_out[out] = 1.0;
  auto adjoint = [&](double gmin) {
    Eigen::MatrixXcd y(layout.size(), layout.size());
    y.real() = conductance_matrix(circuit, layout, dc, gmin);
    y.imag() = 2.0 * M_PI * freq * c;
    const Eigen::MatrixXcd yt = y.transpose();
    return solve_checked(yt, e_out, "noise adjoint");
  };
  Eigen::VectorXcd w;
  try {
    w = adjoint(0.0);
  } catch (const SingularMatrixError&) {
    w = adjoint(kGminFallback);
  }
  auto transfer = [&](int a, int bnode) {
    Complex t = 0.0;
    if (a >= 0) t += w[a];
    if (bnode >= 0) t -= w[bnode];
    return std::norm(t);
  };

  NoiseResult res;
  const double kt = kBoltzmann * models.nmos.temperature;
  std::size_t mos = 0;
  for (const auto& e : circuit.elements) {
    if (e.kind == ElementKind::Resistor) {
      res.output_psd += transfer(e.nodes[0], e.nodes[1]) * 4.0 * kt / e.value;
    } else if (is_mos(e.kind)) {
      const auto& op = dc.transistor_ops[mos++];
      const double kt_dev = kBoltzmann * models.for_kind(e.kind).temperature;
      res.output_psd += transfer(e.nodes[0], e.nodes[2]) * 4.0 * kt_dev * op.gamma_eff * op.gm;
    }
  }
  res.transimpedance = std::abs((w.transpose() * b)(0));
  res.input_noise_density = res.transimpedance > 0.0 ? std::sqrt(res.output_psd) / res.transimpedance : 0.0;
  return res;
}

MetricSet extract_metrics(const ResolvedCircuit& circuit, const AcResponse& ac, const DcResult& dc,
                          double ac_magnitude) {
  MetricSet m;
  m.power = dc.power;
  for (const auto& e : circuit.elements) {
    if (is_mos(e.kind)) m.gate_area += e.width * e.length;
  }
  if (ac.values.empty()) return m;
  std::vector<double> mag(ac.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(ac.values[i]) / ac_magnitude;
  m.gain = mag.front();
  if (!(m.gain > 0.0) || !std::isfinite(m.gain)) return m;
  m.gain_db_ohm = 20.0 * std::log10(m.gain);
  const double target = m.gain / std::sqrt(2.0);
  m.bandwidth = ac.freqs.back();
  m.bandwidth_in_range = false;
  for (std::size_t k = 1; k < mag.size(); ++k) {
    if (mag[k] <= target) {
      const double lf0 = std::log(ac.freqs[k - 1]), lf1 = std::log(ac.freqs[k]);
      const double lm0 = std::log(mag[k - 1]), lm1 = std::log(mag[k]);
      const double t = lm1 != lm0 ? (std::log(target) - lm0) / (lm1 - lm0) : 1.0;
      m.bandwidth = std::exp(lf0 + std::clamp(t, 0.0, 1.0) * (lf1 - lf0));
      m.bandwidth_in_range = true;
      break;
    }
  }
  const double peak = *std::max_element(mag.begin(), mag.end());
  m.peaking = 20.0 * std::log10(peak / m.gain);
  if (!(m.peaking > 1e-9)) m.peaking = 0.0;  // rounding noise on monotone responses
  m.valid = std::isfinite(m.bandwidth) && std::isfinite(m.power) && std::isfinite(m.peaking);
  return m;
}

double noise_reference_frequency(const SimConfig& config, const MetricSet& metrics) {
  if (config.noise_ref_hz > 0.0) return config.noise_ref_hz;
  return std::sqrt(config.fmin * std::max(metrics.bandwidth, config.fmin));
}

SimResult simulate(const Netlist& netlist, const ParamVector& x, const SimConfig& config) {
  SimResult r;
  try {
    const ResolvedCircuit circuit = resolve(netlist, x);
    r.dc = dc_solve(circuit, config.models, config);
    r.ac = ac_solve(circuit, config.models, r.dc, log_sweep(config.fmin, config.fmax, config.points_per_decade),
                    config.ac_input, config.ac_output, config.ac_magnitude);
    r.metrics = extract_metrics(circuit, r.ac, r.dc, config.ac_magnitude);
    if (!r.metrics.valid) {
      r.failure = "degenerate AC response (zero or non-finite gain)";
      return r;
    }
    r.noise = noise_analysis(circuit, config.models, r.dc, noise_reference_frequency(config, r.metrics),
                             config.ac_input, config.ac_output);
    r.metrics.input_noise_density = r.noise.input_noise_density;
    if (!std::isfinite(r.metrics.input_noise_density)) {
      r.metrics.valid = false;
      r.failure = "non-finite noise density";
      return r;
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.metrics.valid = false;
    r.failure = e.what();
  }
  return r;
}

}  // namespace ampsize
