#pragma once

// The simulatee: a set of wires (one continuous coordinate each), pairwise
// potentials between wires, and one-body fields that may depend on time.
// Units are hbar = 1 throughout.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isosim/error.hpp"
#include "isosim/expr.hpp"

namespace isosim {

struct WireSpec {
  std::string name;
  double mass = 1.0;
  double length = 1.0;
  int sites = 0;

  bool operator==(const WireSpec&) const = default;
};

struct PairPotentialSpec {
  std::string wire_i;
  std::string wire_j;
  expr::Expr potential;

  bool operator==(const PairPotentialSpec&) const = default;
};

struct OneBodyFieldSpec {
  std::string wire;
  expr::Expr potential;

  bool operator==(const OneBodyFieldSpec&) const = default;
};

struct ModelSpec {
  std::vector<WireSpec> wires;
  std::vector<PairPotentialSpec> pairs;
  std::vector<OneBodyFieldSpec> fields;
  std::map<std::string, double> constants;
  double scale = 1.0;

  std::size_t wire_index(std::string_view name) const {
    for (std::size_t k = 0; k < wires.size(); ++k)
      if (wires[k].name == name) return k;
    throw ValidationError("unknown wire '" + std::string(name) + "'");
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Unchecked model description with expressions still in source form.
struct RawModel {
  struct Pair {
    std::string i;
    std::string j;
    std::string expr;
  };
  struct Field {
    std::string wire;
    std::string expr;
  };

  std::vector<WireSpec> wires;
  std::vector<Pair> pairs;
  std::vector<Field> fields;
  std::map<std::string, double> constants;
  double scale = 1.0;
};

/// True for `x` followed by one or more digits.
inline bool is_wire_variable(std::string_view name) {
  if (name.size() < 2 || name[0] != 'x') return false;
  return std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

namespace detail {

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

inline std::optional<expr::Expr> parse_into(const std::string& source, const std::string& where,
                                            std::vector<std::string>& errors) {
  try {
    return expr::parse(source);
  } catch (const SyntaxError& err) {
    errors.push_back(where + ": " + err.what());
    return std::nullopt;
  }
}

inline void check_variables(const expr::Expr& e, const std::set<std::string>& allowed,
                            const std::map<std::string, double>& constants, const std::string& where,
                            std::vector<std::string>& errors) {
  for (const auto& name : expr::free_variables(e)) {
    if (allowed.contains(name) || constants.contains(name)) continue;
    if (is_wire_variable(name)) {
      errors.push_back(where + ": expression references wire '" + name +
                       "' outside its own wires (only one- and two-body terms are supported)");
    } else {
      errors.push_back(where + ": unbound variable '" + name + "'");
    }
  }
}

}  // namespace detail

/// Checks a raw description and returns the typed model. Every violation is
/// collected into one ValidationError.
inline ModelSpec validate(const RawModel& raw) {
  std::vector<std::string> errors;
  ModelSpec model;
  model.constants = raw.constants;
  model.scale = raw.scale;

  if (raw.wires.empty()) errors.emplace_back("model must declare at least one wire");
  if (!detail::positive_finite(raw.scale)) errors.emplace_back("scale must be finite and positive");

  std::set<std::string> wire_names;
  for (std::size_t k = 0; k < raw.wires.size(); ++k) {
    const WireSpec& w = raw.wires[k];
    const std::string where = "wire '" + w.name + "'";
    if (!is_wire_variable(w.name))
      errors.push_back("wire #" + std::to_string(k) + ": name '" + w.name + "' must have the form x<digits>");
    if (!wire_names.insert(w.name).second) errors.push_back("duplicate wire name '" + w.name + "'");
    if (!detail::positive_finite(w.mass)) errors.push_back(where + ": mass must be finite and positive");
    if (!detail::positive_finite(w.length)) errors.push_back(where + ": length must be finite and positive");
    if (w.sites < 2) errors.push_back(where + ": sites must be at least 2");
    model.wires.push_back(w);
  }

  for (const auto& [name, value] : raw.constants) {
    if (!detail::is_identifier(name) || name == "t" || is_wire_variable(name) || expr::is_implicit_constant(name) ||
        expr::is_function_name(name)) {
      errors.push_back("constant '" + name + "': reserved or invalid name");
    }
    if (!std::isfinite(value)) errors.push_back("constant '" + name + "': value must be finite");
  }

  std::set<std::pair<std::string, std::string>> seen_pairs;
  for (std::size_t k = 0; k < raw.pairs.size(); ++k) {
    const auto& p = raw.pairs[k];
    const std::string where = "pair_potentials[" + std::to_string(k) + "] (" + p.i + "," + p.j + ")";
    bool wires_ok = true;
    for (const auto* name : {&p.i, &p.j}) {
      if (!wire_names.contains(*name)) {
        errors.push_back(where + ": dangling reference to undeclared wire '" + *name + "'");
        wires_ok = false;
      }
    }
    if (p.i == p.j) {
      errors.push_back(where + ": a pair potential needs two distinct wires");
      wires_ok = false;
    }
    if (wires_ok && !seen_pairs.insert(std::minmax(p.i, p.j)).second)
      errors.push_back(where + ": duplicate potential for this wire pair");
    auto parsed = detail::parse_into(p.expr, where, errors);
    if (!parsed) continue;
    detail::check_variables(*parsed, {p.i, p.j}, raw.constants, where, errors);
    model.pairs.push_back({p.i, p.j, *parsed});
  }

  for (std::size_t k = 0; k < raw.fields.size(); ++k) {
    const auto& f = raw.fields[k];
    const std::string where = "one_body[" + std::to_string(k) + "] (" + f.wire + ")";
    if (!wire_names.contains(f.wire)) errors.push_back(where + ": dangling reference to undeclared wire '" + f.wire + "'");
    auto parsed = detail::parse_into(f.expr, where, errors);
    if (!parsed) continue;
    detail::check_variables(*parsed, {f.wire, "t"}, raw.constants, where, errors);
    model.fields.push_back({f.wire, *parsed});
  }

  if (!errors.empty()) throw ValidationError(std::move(errors));
  return model;
}

inline RawModel to_raw(const ModelSpec& model) {
  RawModel raw;
  raw.wires = model.wires;
  for (const auto& p : model.pairs) raw.pairs.push_back({p.wire_i, p.wire_j, expr::to_string(p.potential)});
  for (const auto& f : model.fields) raw.fields.push_back({f.wire, expr::to_string(f.potential)});
  raw.constants = model.constants;
  raw.scale = model.scale;
  return raw;
}

inline ModelSpec validate(const ModelSpec& model) { return validate(to_raw(model)); }

inline ModelSpec with_scale(ModelSpec model, double scale) {
  if (!detail::positive_finite(scale)) throw ValidationError("scale must be finite and positive");
  model.scale = scale;
  return model;
}

using BuiltinParams = std::map<std::string, double, std::less<>>;

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string_view problem, const BuiltinParams& params, std::set<std::string> known)
      : problem_(problem), params_(params) {
    for (const auto& [key, value] : params)
      if (!known.contains(key)) errors_.push_back(std::string(problem) + ": unknown parameter '" + key + "'");
  }

  double required(const std::string& key) {
    auto it = params_.find(key);
    if (it == params_.end()) {
      errors_.push_back(std::string(problem_) + ": missing parameter '" + key + "'");
      return 1.0;
    }
    return it->second;
  }

  double optional(const std::string& key, double fallback) const {
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  int count(const std::string& key, bool is_required, int fallback = 0) {
    const double v = is_required ? required(key) : optional(key, fallback);
    if (v != std::floor(v) || v < 0 || v > 1e9) {
      errors_.push_back(std::string(problem_) + ": parameter '" + key + "' must be a non-negative integer");
      return fallback;
    }
    return static_cast<int>(v);
  }

  void finish() const {
    if (!errors_.empty()) throw ValidationError(errors_);
  }

 private:
  std::string_view problem_;
  const BuiltinParams& params_;
  std::vector<std::string> errors_;
};

}  // namespace detail

/// Reference problems with known continuum behavior.
///
///   box                N [mass length scale]
///   harmonic           omega N [mass length scale]
///   coupled_harmonic   omega kappa N [mass length scale]
///   double_well_chain  M N [depth width kappa mass length scale]
///
/// Potentials are centered at length/2 so bound states sit inside the
/// hard-wall wire. For length 1, omega >= 40 keeps the wall truncation error
/// below the discretization error.
inline ModelSpec builtin(std::string_view name, const BuiltinParams& params) {
  const std::set<std::string> common = {"N", "mass", "length", "scale"};
  auto with = [&](std::initializer_list<std::string> extra) {
    auto keys = common;
    keys.insert(extra.begin(), extra.end());
    return keys;
  };

  RawModel raw;
  auto add_wires = [&](int count, int sites, double mass, double length) {
    for (int k = 1; k <= count; ++k) raw.wires.push_back({"x" + std::to_string(k), mass, length, sites});
  };

  if (name == "box") {
    detail::ParamReader in(name, params, common);
    const int n = in.count("N", true);
    const double mass = in.optional("mass", 1.0), length = in.optional("length", 1.0);
    raw.scale = in.optional("scale", 1.0);
    in.finish();
    add_wires(1, n, mass, length);
  } else if (name == "harmonic" || name == "coupled_harmonic") {
    const bool coupled = name == "coupled_harmonic";
    detail::ParamReader in(name, params, coupled ? with({"omega", "kappa"}) : with({"omega"}));
    const double omega = in.required("omega");
    const double kappa = coupled ? in.required("kappa") : 0.0;
    const int n = in.count("N", true);
    const double mass = in.optional("mass", 1.0), length = in.optional("length", 1.0);
    raw.scale = in.optional("scale", 1.0);
    in.finish();
    add_wires(coupled ? 2 : 1, n, mass, length);
    raw.constants = {{"omega", omega}, {"m", mass}, {"c", length / 2.0}};
    for (const auto& w : raw.wires) raw.fields.push_back({w.name, "0.5*omega^2*m*(" + w.name + "-c)^2"});
    if (coupled) {
      raw.constants["kappa"] = kappa;
      raw.pairs.push_back({"x1", "x2", "0.5*kappa*(x1-x2)^2"});
    }
  } else if (name == "double_well_chain") {
    detail::ParamReader in(name, params, with({"M", "depth", "width", "kappa"}));
    const int wires = in.count("M", true);
    const int n = in.count("N", true);
    const double mass = in.optional("mass", 1.0), length = in.optional("length", 1.0);
    const double depth = in.optional("depth", 200.0);
    const double width = in.optional("width", 0.2 * length);
    const double kappa = in.optional("kappa", 50.0);
    raw.scale = in.optional("scale", 1.0);
    in.finish();
    add_wires(wires, n, mass, length);
    // depth * ((x-c)^2 - w^2)^2 / w^4: minima at c +- w, barrier height `depth`.
    raw.constants = {{"depth", depth}, {"w", width}, {"c", length / 2.0}, {"kappa", kappa}};
    for (const auto& w : raw.wires)
      raw.fields.push_back({w.name, "depth*((" + w.name + "-c)^2-w^2)^2/w^4"});
    for (std::size_t k = 0; k + 1 < raw.wires.size(); ++k) {
      const auto& a = raw.wires[k].name;
      const auto& b = raw.wires[k + 1].name;
      raw.pairs.push_back({a, b, "0.5*kappa*(" + a + "-" + b + ")^2"});
    }
  } else {
    throw ValidationError("unknown builtin problem '" + std::string(name) + "'");
  }
  return validate(raw);
}

}  // namespace isosim
