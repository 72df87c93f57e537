#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ampsize {

enum class ElementKind { Resistor, Capacitor, Nmos, Pmos, VoltageSource, CurrentSource };

enum class ParamScale { Linear, Logarithmic };

// A literal SI value or a {placeholder} naming a ParamDef.
struct ValueExpr {
  double literal = 0.0;
  std::string param;  // empty for literals

  bool is_param() const { return !param.empty(); }
  static ValueExpr of(double v) { return {v, {}}; }
  static ValueExpr placeholder(std::string name) { return {0.0, std::move(name)}; }
};

struct Element {
  ElementKind kind = ElementKind::Resistor;
  std::string name;
  // Two-terminal elements: (n+, n-). MOS: (drain, gate, source).
  std::vector<std::string> terminals;
  // Two-terminal elements: one value. MOS: (W, L).
  std::vector<ValueExpr> values;
  std::size_t line = 0;

  bool is_mos() const { return kind == ElementKind::Nmos || kind == ElementKind::Pmos; }
  bool is_parameterized() const;
};

struct ParamDef {
  std::string name;
  double pmin = 0.0;
  double pmax = 0.0;
  ParamScale scale = ParamScale::Linear;
};

struct ParamVector {
  std::vector<double> values;
};

struct Netlist {
  std::vector<std::string> nodes;  // excludes ground "0", first-use order
  std::vector<Element> elements;
  std::vector<ParamDef> params;
  std::vector<std::string> signal_order;

  const Element* find_element(std::string_view name) const;
  std::optional<std::size_t> param_index(std::string_view name) const;
  std::optional<std::size_t> node_index(std::string_view name) const;
};

inline constexpr std::string_view kGround = "0";

// Throws ParseError with the offending line and column.
Netlist parse_netlist(std::string_view text);

// Canonical text form; parse(serialize(n)) is structurally identical to n.
std::string serialize_netlist(const Netlist& netlist);

// Parses "1k", "200f", "1.5meg", "3" into SI units. Returns nullopt on junk.
std::optional<double> parse_si_value(std::string_view token);

bool structurally_equal(const Netlist& a, const Netlist& b);

struct ResolvedElement {
  ElementKind kind = ElementKind::Resistor;
  std::string name;
  std::vector<int> nodes;  // -1 is ground, else index into ResolvedCircuit::nodes
  double value = 0.0;      // R, C, V, I
  double width = 0.0;      // MOS
  double length = 0.0;     // MOS
};

struct ResolvedCircuit {
  std::vector<std::string> nodes;
  std::vector<ResolvedElement> elements;

  int node_index(std::string_view name) const;  // -1 for ground, throws if unknown
  const ResolvedElement* find_element(std::string_view name) const;
};

// Binds x to the placeholders. Throws CircuitError on dimension mismatch or
// a value outside [pmin, pmax].
ResolvedCircuit resolve(const Netlist& netlist, const ParamVector& x);

}  // namespace ampsize
