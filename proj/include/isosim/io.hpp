#pragma once

// JSON model files, JSON result documents and CSV trajectories.
//
// Model file schema (unknown keys are rejected):
//   {
//     "wires":           [{"name": "x1", "mass": 1, "length": 1, "sites": 24}, ...],
//     "pair_potentials": [{"i": "x1", "j": "x2", "expr": "0.5*kappa*(x1-x2)^2"}, ...],
//     "one_body":        [{"wire": "x1", "expr": "A*sin(w*t)*x1"}, ...],
//     "constants":       {"kappa": 200, ...},
//     "scale":           1
//   }

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isosim/compiler.hpp"
#include "isosim/dynamics.hpp"
#include "isosim/error.hpp"
#include "isosim/hamiltonian.hpp"
#include "isosim/model.hpp"
#include "isosim/verify.hpp"

namespace isosim::io {

using Json = nlohmann::ordered_json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Json parse_json(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(origin + ": invalid JSON: " + err.what());
  }
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

namespace detail {

class SchemaReader {
 public:
  std::vector<std::string> errors;

  void allow_keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
    for (const auto& [key, value] : obj.items()) {
      bool known = false;
      for (auto k : keys) known = known || k == key;
      if (!known) errors.push_back(path + "/" + key + ": unknown key");
    }
  }

  bool is_object(const Json& j, const std::string& path) {
    if (j.is_object()) return true;
    errors.push_back(path + ": expected an object");
    return false;
  }

  bool is_array(const Json& j, const std::string& path) {
    if (j.is_array()) return true;
    errors.push_back(path + ": expected an array");
    return false;
  }

  std::string string_field(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) {
      errors.push_back(path + "/" + key + ": required");
      return {};
    }
    if (!obj[key].is_string()) {
      errors.push_back(path + "/" + key + ": expected a string");
      return {};
    }
    return obj[key].get<std::string>();
  }

  double number_field(const Json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) {
      errors.push_back(path + "/" + key + ": expected a number");
      return fallback;
    }
    return obj[key].get<double>();
  }

  int integer_field(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) {
      errors.push_back(path + "/" + key + ": required");
      return 0;
    }
    const Json& v = obj[key];
    if (!v.is_number_integer() || v.get<long long>() > 1'000'000'000 || v.get<long long>() < -1'000'000'000) {
      errors.push_back(path + "/" + key + ": expected an integer");
      return 0;
    }
    return v.get<int>();
  }
};

}  // namespace detail

/// Strict schema check of a parsed model document. Collects every problem.
inline RawModel parse_model(const Json& doc) {
  detail::SchemaReader in;
  RawModel raw;
  if (!in.is_object(doc, "")) throw ValidationError(in.errors);
  in.allow_keys(doc, "", {"wires", "pair_potentials", "one_body", "constants", "scale"});

  if (!doc.contains("wires")) {
    in.errors.emplace_back("/wires: required");
  } else if (in.is_array(doc["wires"], "/wires")) {
    for (std::size_t k = 0; k < doc["wires"].size(); ++k) {
      const Json& w = doc["wires"][k];
      const std::string path = "/wires/" + std::to_string(k);
      if (!in.is_object(w, path)) continue;
      in.allow_keys(w, path, {"name", "mass", "length", "sites"});
      raw.wires.push_back({in.string_field(w, path, "name"), in.number_field(w, path, "mass", 1.0),
                           in.number_field(w, path, "length", 1.0), in.integer_field(w, path, "sites")});
    }
  }
  if (doc.contains("pair_potentials") && in.is_array(doc["pair_potentials"], "/pair_potentials")) {
    for (std::size_t k = 0; k < doc["pair_potentials"].size(); ++k) {
      const Json& p = doc["pair_potentials"][k];
      const std::string path = "/pair_potentials/" + std::to_string(k);
      if (!in.is_object(p, path)) continue;
      in.allow_keys(p, path, {"i", "j", "expr"});
      raw.pairs.push_back({in.string_field(p, path, "i"), in.string_field(p, path, "j"),
                           in.string_field(p, path, "expr")});
    }
  }
  if (doc.contains("one_body") && in.is_array(doc["one_body"], "/one_body")) {
    for (std::size_t k = 0; k < doc["one_body"].size(); ++k) {
      const Json& f = doc["one_body"][k];
      const std::string path = "/one_body/" + std::to_string(k);
      if (!in.is_object(f, path)) continue;
      in.allow_keys(f, path, {"wire", "expr"});
      raw.fields.push_back({in.string_field(f, path, "wire"), in.string_field(f, path, "expr")});
    }
  }
  if (doc.contains("constants") && in.is_object(doc["constants"], "/constants")) {
    for (const auto& [name, value] : doc["constants"].items()) {
      if (!value.is_number()) {
        in.errors.push_back("/constants/" + name + ": expected a number");
        continue;
      }
      raw.constants[name] = value.get<double>();
    }
  }
  raw.scale = in.number_field(doc, "", "scale", 1.0);
  if (!in.errors.empty()) throw ValidationError(in.errors);
  return raw;
}

inline ModelSpec load_model_text(std::string_view text, const std::string& origin = "model") {
  return validate(parse_model(parse_json(text, origin)));
}

/// Reads a model from a JSON file, or builds a reference problem when the
/// argument has the form `builtin:<name>[:key=value,key=value...]`.
inline ModelSpec load_model(const std::string& source) {
  constexpr std::string_view prefix = "builtin:";
  if (source.starts_with(prefix)) {
    std::string rest = source.substr(prefix.size());
    std::string name = rest, args;
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      name = rest.substr(0, colon);
      args = rest.substr(colon + 1);
    }
    BuiltinParams params;
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("builtin parameter '" + item + "' must be key=value");
      const std::string key = item.substr(0, eq), text = item.substr(eq + 1);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("builtin parameter '" + key + "' is not a number");
      params[key] = value;
    }
    return builtin(name, params);
  }
  return load_model_text(read_text(source), source);
}

inline Json to_json(const ModelSpec& model) {
  Json doc;
  doc["wires"] = Json::array();
  for (const auto& w : model.wires)
    doc["wires"].push_back({{"name", w.name}, {"mass", w.mass}, {"length", w.length}, {"sites", w.sites}});
  doc["pair_potentials"] = Json::array();
  for (const auto& p : model.pairs)
    doc["pair_potentials"].push_back({{"i", p.wire_i}, {"j", p.wire_j}, {"expr", expr::to_string(p.potential)}});
  doc["one_body"] = Json::array();
  for (const auto& f : model.fields)
    doc["one_body"].push_back({{"wire", f.wire}, {"expr", expr::to_string(f.potential)}});
  doc["constants"] = Json::object();
  for (const auto& [name, value] : model.constants) doc["constants"][name] = value;
  doc["scale"] = model.scale;
  return doc;
}

inline Json to_json(const ResourceReport& r) {
  return {{"M", r.wires},
          {"N", r.max_sites},
          {"connections_used", r.connections_used},
          {"connections_bound", r.connections_bound},
          {"fields_used", r.fields_used},
          {"fields_bound", r.fields_bound},
          {"hilbert_dim", r.hilbert_dim},
          {"hilbert_dim_saturated", r.hilbert_dim_saturated},
          {"within_bounds", r.within_bounds()}};
}

/// Grids, stencils, dense row-major coupling tables, field tables (sampled
/// at t = 0) and the resource report.
inline Json to_json(const SimulatorLayout& layout) {
  Json doc;
  doc["basis"] = std::string(kBasisConvention);
  doc["scale"] = layout.scale;
  doc["wires"] = Json::array();
  for (std::size_t w = 0; w < layout.wires.size(); ++w) {
    const auto& spec = layout.wires[w];
    doc["wires"].push_back({{"name", spec.name},
                            {"mass", spec.mass},
                            {"length", spec.length},
                            {"sites", spec.sites},
                            {"spacing", layout.grids[w].spacing},
                            {"positions", layout.grids[w].positions},
                            {"kinetic", {{"hop", layout.stencils[w].hop}, {"onsite", layout.stencils[w].onsite}}}});
  }
  doc["coupling_tables"] = Json::array();
  for (const auto& t : layout.couplings)
    doc["coupling_tables"].push_back(
        {{"i", t.wire_i}, {"j", t.wire_j}, {"rows", t.rows}, {"cols", t.cols}, {"values", t.values}});
  doc["field_tables"] = Json::array();
  for (const auto& f : layout.fields)
    doc["field_tables"].push_back({{"wire", f.field.wire},
                                   {"expr", expr::to_string(f.field.potential)},
                                   {"time_dependent", f.time_dependent},
                                   {"values_at_t0", f.sample(0.0)}});
  doc["resources"] = to_json(resource_report(layout));
  return doc;
}

inline Json to_json(const SpectrumResult& s, std::size_t dimension, double scale) {
  return {{"dimension", dimension},
          {"scale", scale},
          {"method", s.method},
          {"eigenvalues", std::vector<double>(s.eigenvalues.begin(), s.eigenvalues.end())},
          {"residuals", std::vector<double>(s.residuals.begin(), s.residuals.end())}};
}

inline Json to_json(const QuantumState& psi, const std::vector<std::size_t>& radices) {
  std::vector<double> re, im;
  for (const auto& a : psi.amplitudes()) {
    re.push_back(a.real());
    im.push_back(a.imag());
  }
  return {{"kind", "state"},
          {"dimension", psi.dimension()},
          {"basis", std::string(kBasisConvention)},
          {"radices", radices},
          {"real", re},
          {"imag", im}};
}

inline Json to_json(const DensityMatrix& rho, const std::vector<std::size_t>& radices) {
  std::vector<double> re, im;
  const CMatrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      re.push_back(m(r, c).real());
      im.push_back(m(r, c).imag());
    }
  return {{"kind", "density_matrix"},
          {"dimension", rho.dimension()},
          {"basis", std::string(kBasisConvention)},
          {"layout", "row-major"},
          {"radices", radices},
          {"real", re},
          {"imag", im}};
}

/// Reads a state document written by `to_json(QuantumState)`. The state is
/// normalized on load.
inline QuantumState state_from_json(const Json& doc, std::size_t expected_dimension) {
  detail::SchemaReader in;
  if (!in.is_object(doc, "")) throw ValidationError(in.errors);
  in.allow_keys(doc, "", {"kind", "dimension", "basis", "radices", "real", "imag"});
  if (doc.contains("basis") && doc["basis"] != kBasisConvention)
    in.errors.push_back("/basis: unsupported basis convention");
  if (!doc.contains("real") || !doc["real"].is_array()) in.errors.emplace_back("/real: required array");
  if (doc.contains("imag") && !doc["imag"].is_array()) in.errors.emplace_back("/imag: expected an array");
  if (!in.errors.empty()) throw ValidationError(in.errors);
  const auto& re = doc["real"];
  if (re.size() != expected_dimension)
    throw ValidationError("state has " + std::to_string(re.size()) + " amplitudes, expected " +
                          std::to_string(expected_dimension));
  if (doc.contains("imag") && doc["imag"].size() != re.size()) throw ValidationError("/imag: length mismatch");
  CVector v(static_cast<Eigen::Index>(re.size()));
  for (std::size_t k = 0; k < re.size(); ++k) {
    if (!re[k].is_number() || (doc.contains("imag") && !doc["imag"][k].is_number()))
      throw ValidationError("state amplitudes must be numbers");
    const double imag = doc.contains("imag") ? doc["imag"][k].get<double>() : 0.0;
    v[static_cast<Eigen::Index>(k)] = Complex(re[k].get<double>(), imag);
  }
  return QuantumState::normalized(std::move(v));
}

inline Json to_json(const CheckReport& r) {
  return {{"name", r.name},
          {"quantity", r.quantity},
          {"measured", r.measured},
          {"tolerance", r.tolerance},
          {"status", to_string(r.status)},
          {"pass", r.passed()},
          {"details", r.details}};
}

/// time, energy, norm, then <x> and Var(x) per selected wire.
inline std::string trajectory_csv(const TrajectoryRecord& rec, const std::vector<std::size_t>& wires) {
  std::string out = "time,energy,norm";
  for (auto w : wires) out += ",mean_" + rec.wires[w] + ",var_" + rec.wires[w];
  out += '\n';
  for (std::size_t s = 0; s < rec.times.size(); ++s) {
    out += format_double(rec.times[s]) + ',' + format_double(rec.energies[s]) + ',' + format_double(rec.norms[s]);
    for (auto w : wires)
      out += ',' + format_double(rec.position_mean[s][w]) + ',' + format_double(rec.position_variance[s][w]);
    out += '\n';
  }
  return out;
}

inline std::string energy_trace_csv(const std::vector<double>& times, const std::vector<double>& energies,
                                    const char* time_label = "time") {
  std::string out = std::string(time_label) + ",energy\n";
  for (std::size_t k = 0; k < energies.size(); ++k)
    out += format_double(times[k]) + ',' + format_double(energies[k]) + '\n';
  return out;
}

}  // namespace isosim::io
