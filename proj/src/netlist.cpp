#include "netlist.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"

namespace ampsize {

namespace {

struct Token {
  std::string text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({std::string(line.substr(start, i - start)), start + 1});
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Netlist run() {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool ended = false;
    while (pos <= text_.size() && !ended) {
      std::size_t eol = text_.find('\n', pos);
      if (eol == std::string_view::npos) eol = text_.size();
      std::string_view line = text_.substr(pos, eol - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      pos = eol + 1;
      ended = parse_line(line, line_no);
      if (eol == text_.size()) break;
    }
    finish();
    return std::move(netlist_);
  }

 private:
  // Returns true on ".end".
  bool parse_line(std::string_view line, std::size_t line_no) {
    const auto tokens = tokenize(line);
    if (tokens.empty()) return false;
    if (tokens[0].text[0] == '*') return false;
    if (tokens[0].text[0] == '.') return parse_directive(tokens, line_no);
    parse_element(tokens, line_no);
    return false;
  }

  bool parse_directive(const std::vector<Token>& t, std::size_t line_no) {
    const std::string dir = lower(t[0].text);
    if (dir == ".end") return true;
    if (dir == ".param") {
      if (t.size() != 5) {
        throw ParseError(line_no, t[0].column,
                         ".param expects: .param name pmin pmax linear|log");
      }
      ParamDef p;
      p.name = t[1].text;
      if (!is_identifier(p.name)) throw ParseError(line_no, t[1].column, "bad parameter name '" + p.name + "'");
      auto lo = parse_si_value(t[2].text);
      if (!lo) throw ParseError(line_no, t[2].column, "bad value '" + t[2].text + "'");
      auto hi = parse_si_value(t[3].text);
      if (!hi) throw ParseError(line_no, t[3].column, "bad value '" + t[3].text + "'");
      p.pmin = *lo;
      p.pmax = *hi;
      const std::string scale = lower(t[4].text);
      if (scale == "linear" || scale == "lin") {
        p.scale = ParamScale::Linear;
      } else if (scale == "log" || scale == "logarithmic") {
        p.scale = ParamScale::Logarithmic;
      } else {
        throw ParseError(line_no, t[4].column, "scale must be linear or log, got '" + t[4].text + "'");
      }
      if (!(p.pmin > 0.0) || !(p.pmin < p.pmax)) {
        throw ParseError(line_no, t[2].column, "parameter '" + p.name + "' needs 0 < pmin < pmax");
      }
      if (param_lines_.count(p.name)) {
        throw ParseError(line_no, t[1].column,
                         "duplicate parameter '" + p.name + "' (first declared on line " +
                             std::to_string(param_lines_[p.name]) + ")");
      }
      param_lines_[p.name] = line_no;
      netlist_.params.push_back(std::move(p));
      return false;
    }
    if (dir == ".order") {
      if (order_line_ != 0) {
        throw ParseError(line_no, t[0].column, "duplicate .order directive (first on line " +
                                                   std::to_string(order_line_) + ")");
      }
      order_line_ = line_no;
      for (std::size_t i = 1; i < t.size(); ++i) order_tokens_.push_back(t[i]);
      return false;
    }
    throw ParseError(line_no, t[0].column, "unknown directive '" + t[0].text + "'");
  }

  void parse_element(const std::vector<Token>& t, std::size_t line_no) {
    const std::string& name = t[0].text;
    if (!is_identifier(name)) throw ParseError(line_no, t[0].column, "bad element name '" + name + "'");
    if (auto it = element_lines_.find(name); it != element_lines_.end()) {
      throw ParseError(line_no, t[0].column,
                       "duplicate element name '" + name + "' (first declared on line " +
                           std::to_string(it->second) + ")");
    }
    Element e;
    e.name = name;
    e.line = line_no;
    const char k = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    switch (k) {
      case 'R': e.kind = ElementKind::Resistor; break;
      case 'C': e.kind = ElementKind::Capacitor; break;
      case 'V': e.kind = ElementKind::VoltageSource; break;
      case 'I': e.kind = ElementKind::CurrentSource; break;
      case 'M': e.kind = ElementKind::Nmos; break;
      default:
        throw ParseError(line_no, t[0].column, "unknown element type '" + std::string(1, name[0]) + "'");
    }
    if (e.is_mos()) {
      parse_mos(t, line_no, e);
    } else {
      if (t.size() != 4) {
        throw ParseError(line_no, t.size() > 4 ? t[4].column : t[0].column,
                         "element '" + name + "' expects: name n1 n2 value");
      }
      for (std::size_t i = 1; i <= 2; ++i) e.terminals.push_back(node_ref(t[i], line_no));
      e.values.push_back(value_expr(t[3], line_no));
      if ((e.kind == ElementKind::Resistor || e.kind == ElementKind::Capacitor) &&
          !e.values[0].is_param() && !(e.values[0].literal > 0.0)) {
        throw ParseError(line_no, t[3].column, "value of '" + name + "' must be > 0");
      }
    }
    element_lines_[name] = line_no;
    netlist_.elements.push_back(std::move(e));
  }

  void parse_mos(const std::vector<Token>& t, std::size_t line_no, Element& e) {
    if (t.size() < 6 || t.size() > 7) {
      throw ParseError(line_no, t[0].column,
                       "transistor '" + e.name + "' expects: name nd ng ns W=value L=value [TYPE=nmos|pmos]");
    }
    for (std::size_t i = 1; i <= 3; ++i) e.terminals.push_back(node_ref(t[i], line_no));
    std::optional<ValueExpr> w, l;
    for (std::size_t i = 4; i < t.size(); ++i) {
      const auto eq = t[i].text.find('=');
      if (eq == std::string::npos) {
        throw ParseError(line_no, t[i].column, "expected key=value, got '" + t[i].text + "'");
      }
      const std::string key = lower(std::string_view(t[i].text).substr(0, eq));
      const Token val{t[i].text.substr(eq + 1), t[i].column + eq + 1};
      if (key == "w" && !w) {
        w = value_expr(val, line_no);
      } else if (key == "l" && !l) {
        l = value_expr(val, line_no);
      } else if (key == "type") {
        const std::string type = lower(val.text);
        if (type == "nmos") e.kind = ElementKind::Nmos;
        else if (type == "pmos") e.kind = ElementKind::Pmos;
        else throw ParseError(line_no, val.column, "TYPE must be nmos or pmos");
      } else {
        throw ParseError(line_no, t[i].column, "unexpected or repeated key '" + key + "'");
      }
    }
    if (!w || !l) throw ParseError(line_no, t[0].column, "transistor '" + e.name + "' needs both W= and L=");
    for (const auto* v : {&*w, &*l}) {
      if (!v->is_param() && !(v->literal > 0.0)) {
        throw ParseError(line_no, t[0].column, "W and L of '" + e.name + "' must be > 0");
      }
    }
    e.values = {*w, *l};
  }

  std::string node_ref(const Token& tok, std::size_t line_no) {
    if (!is_identifier(tok.text)) {
      throw ParseError(line_no, tok.column, "bad node name '" + tok.text + "'");
    }
    if (tok.text != kGround && !seen_nodes_.count(tok.text)) {
      seen_nodes_.insert(tok.text);
      netlist_.nodes.push_back(tok.text);
    }
    return tok.text;
  }

  ValueExpr value_expr(const Token& tok, std::size_t line_no) {
    const std::string& s = tok.text;
    if (!s.empty() && s.front() == '{') {
      if (s.size() < 3 || s.back() != '}' || !is_identifier(std::string_view(s).substr(1, s.size() - 2))) {
        throw ParseError(line_no, tok.column, "bad placeholder '" + s + "'");
      }
      std::string pname = s.substr(1, s.size() - 2);
      placeholder_uses_.push_back({pname, line_no, tok.column});
      return ValueExpr::placeholder(std::move(pname));
    }
    auto v = parse_si_value(s);
    if (!v) throw ParseError(line_no, tok.column, "bad value '" + s + "'");
    return ValueExpr::of(*v);
  }

  void finish() {
    for (const auto& use : placeholder_uses_) {
      if (!param_lines_.count(use.name)) {
        throw ParseError(use.line, use.column, "placeholder {" + use.name + "} has no matching .param");
      }
    }
    if (order_line_ != 0) {
      std::set<std::string> seen;
      for (const auto& tok : order_tokens_) {
        if (!element_lines_.count(tok.text)) {
          throw ParseError(order_line_, tok.column, ".order names undeclared element '" + tok.text + "'");
        }
        if (!seen.insert(tok.text).second) {
          throw ParseError(order_line_, tok.column, ".order repeats '" + tok.text + "'");
        }
        netlist_.signal_order.push_back(tok.text);
      }
      for (const auto& e : netlist_.elements) {
        if (e.is_parameterized() && !seen.count(e.name)) {
          throw ParseError(order_line_, 1, ".order is missing parameterized element '" + e.name + "'");
        }
      }
    } else {
      for (const auto& e : netlist_.elements) {
        if (e.is_parameterized()) netlist_.signal_order.push_back(e.name);
      }
    }
  }

  struct PlaceholderUse {
    std::string name;
    std::size_t line;
    std::size_t column;
  };

  std::string_view text_;
  Netlist netlist_;
  std::set<std::string> seen_nodes_;
  std::unordered_map<std::string, std::size_t> element_lines_;
  std::unordered_map<std::string, std::size_t> param_lines_;
  std::vector<PlaceholderUse> placeholder_uses_;
  std::vector<Token> order_tokens_;
  std::size_t order_line_ = 0;
};

}  // namespace

bool Element::is_parameterized() const {
  return std::any_of(values.begin(), values.end(), [](const ValueExpr& v) { return v.is_param(); });
}

const Element* Netlist::find_element(std::string_view name) const {
  for (const auto& e : elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::optional<std::size_t> Netlist::param_index(std::string_view name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Netlist::node_index(std::string_view name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<double> parse_si_value(std::string_view token) {
  if (token.empty()) return std::nullopt;
  double mantissa = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (*begin == '+') ++begin;
  auto res = std::from_chars(begin, end, mantissa);
  if (res.ec != std::errc() || !std::isfinite(mantissa)) return std::nullopt;
  const std::string suffix = lower(std::string_view(res.ptr, static_cast<std::size_t>(end - res.ptr)));
  static const std::pair<const char*, double> kSuffixes[] = {
      {"", 1.0},     {"f", 1e-15}, {"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6},
      {"m", 1e-3},   {"k", 1e3},   {"meg", 1e6}, {"g", 1e9},
  };
  for (const auto& [s, scale] : kSuffixes) {
    if (suffix == s) return mantissa * scale;
  }
  return std::nullopt;
}

Netlist parse_netlist(std::string_view text) { return Parser(text).run(); }

std::string serialize_netlist(const Netlist& netlist) {
  std::ostringstream os;
  auto value = [](const ValueExpr& v) {
    return v.is_param() ? "{" + v.param + "}" : format_double(v.literal);
  };
  for (const auto& p : netlist.params) {
    os << ".param " << p.name << ' ' << format_double(p.pmin) << ' ' << format_double(p.pmax) << ' '
       << (p.scale == ParamScale::Linear ? "linear" : "log") << '\n';
  }
  for (const auto& e : netlist.elements) {
    os << e.name;
    for (const auto& n : e.terminals) os << ' ' << n;
    if (e.is_mos()) {
      os << " W=" << value(e.values[0]) << " L=" << value(e.values[1])
         << " TYPE=" << (e.kind == ElementKind::Nmos ? "nmos" : "pmos");
    } else {
      os << ' ' << value(e.values[0]);
    }
    os << '\n';
  }
  if (!netlist.signal_order.empty()) {
    os << ".order";
    for (const auto& n : netlist.signal_order) os << ' ' << n;
    os << '\n';
  }
  os << ".end\n";
  return os.str();
}

bool structurally_equal(const Netlist& a, const Netlist& b) {
  if (a.signal_order != b.signal_order || a.elements.size() != b.elements.size() ||
      a.params.size() != b.params.size()) {
    return false;
  }
  std::set<std::string> na(a.nodes.begin(), a.nodes.end()), nb(b.nodes.begin(), b.nodes.end());
  if (na != nb) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto &p = a.params[i], &q = b.params[i];
    if (p.name != q.name || p.pmin != q.pmin || p.pmax != q.pmax || p.scale != q.scale) return false;
  }
  for (std::size_t i = 0; i < a.elements.size(); ++i) {
    const auto &e = a.elements[i], &f = b.elements[i];
    if (e.kind != f.kind || e.name != f.name || e.terminals != f.terminals ||
        e.values.size() != f.values.size()) {
      return false;
    }
    for (std::size_t j = 0; j < e.values.size(); ++j) {
      if (e.values[j].param != f.values[j].param || e.values[j].literal != f.values[j].literal) return false;
    }
  }
  return true;
}

int ResolvedCircuit::node_index(std::string_view name) const {
  if (name == kGround) return -1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == name) return static_cast<int>(i);
  }
  throw CircuitError("unknown node '" + std::string(name) + "'");
}

const ResolvedElement* ResolvedCircuit::find_element(std::string_view name) const {
  for (const auto& e : elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

ResolvedCircuit resolve(const Netlist& netlist, const ParamVector& x) {
  if (x.values.size() != netlist.params.size()) {
    throw CircuitError("parameter vector has " + std::to_string(x.values.size()) + " entries, netlist declares " +
                       std::to_string(netlist.params.size()));
  }
  for (std::size_t j = 0; j < netlist.params.size(); ++j) {
    const auto& p = netlist.params[j];
    const double v = x.values[j];
    if (!(v >= p.pmin && v <= p.pmax)) {
      throw CircuitError("parameter '" + p.name + "' = " + format_double(v) + " is outside [" +
                         format_double(p.pmin) + ", " + format_double(p.pmax) + "]");
    }
  }
  auto bind = [&](const ValueExpr& v) {
    return v.is_param() ? x.values[*netlist.param_index(v.param)] : v.literal;
  };

  ResolvedCircuit rc;
  rc.nodes = netlist.nodes;
  for (const auto& e : netlist.elements) {
    ResolvedElement r;
    r.kind = e.kind;
    r.name = e.name;
    for (const auto& t : e.terminals) r.nodes.push_back(rc.node_index(t));
    if (e.is_mos()) {
      r.width = bind(e.values[0]);
      r.length = bind(e.values[1]);
    } else {
      r.value = bind(e.values[0]);
    }
    rc.elements.push_back(std::move(r));
  }
  return rc;
}

}  // namespace ampsize
