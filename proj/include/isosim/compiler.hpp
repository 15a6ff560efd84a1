#pragma once

// Discretizes a model into the simulator layout: one grid and kinetic
// stencil per wire, an N_i x N_j table of interaction energies per coupled
// wire pair, and a field table per driven wire.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isosim/error.hpp"
#include "isosim/expr.hpp"
#include "isosim/model.hpp"

namespace isosim {

/// N interior nodes x_k = k * spacing (k = 1..N) with hard walls at 0 and L.
struct Grid {
  std::string wire;
  double spacing = 0.0;
  std::vector<double> positions;
};

/// Row-major N_i x N_j matrix; entry (a, b) is h_ij(x_a, x_b).
struct CouplingTable {
  std::string wire_i;
  std::string wire_j;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t a, std::size_t b) const { return values[a * cols + b]; }
};

/// Central-difference kinetic energy -1/(2m) d^2/dx^2 with Dirichlet walls.
struct KineticStencil {
  std::string wire;
  double hop = 0.0;
  double onsite = 0.0;
};

/// Error raised while tabulating; `node` is the 1-based grid node number.
class TabulationError : public EvaluationError {
 public:
  TabulationError(const std::string& message, std::size_t node, std::size_t node_j = 0)
      : EvaluationError(message), node_(node), node_j_(node_j) {}

  std::size_t node() const noexcept { return node_; }
  std::size_t node_j() const noexcept { return node_j_; }

 private:
  std::size_t node_;
  std::size_t node_j_;
};

inline Grid make_grid(const WireSpec& wire) {
  Grid grid;
  grid.wire = wire.name;
  grid.spacing = wire.length / static_cast<double>(wire.sites + 1);
  grid.positions.reserve(static_cast<std::size_t>(wire.sites));
  for (int k = 1; k <= wire.sites; ++k) grid.positions.push_back(k * grid.spacing);
  return grid;
}

inline KineticStencil make_stencil(const WireSpec& wire, const Grid& grid) {
  const double hop = -1.0 / (2.0 * wire.mass * grid.spacing * grid.spacing);
  return {wire.name, hop, -2.0 * hop};
}

inline CouplingTable tabulate_pair(const PairPotentialSpec& pair, const Grid& gi, const Grid& gj,
                                   const std::map<std::string, double>& constants = {}) {
  CouplingTable table{pair.wire_i, pair.wire_j, gi.positions.size(), gj.positions.size(), {}};
  table.values.resize(table.rows * table.cols);
  expr::Bindings bindings(constants.begin(), constants.end());
  for (std::size_t a = 0; a < table.rows; ++a) {
    bindings[pair.wire_i] = gi.positions[a];
    for (std::size_t b = 0; b < table.cols; ++b) {
      bindings[pair.wire_j] = gj.positions[b];
      try {
        table.values[a * table.cols + b] = expr::evaluate(pair.potential, bindings);
      } catch (const EvaluationError& err) {
        throw TabulationError("pair (" + pair.wire_i + "," + pair.wire_j + ") at nodes (" + std::to_string(a + 1) +
                                  "," + std::to_string(b + 1) + "): " + err.what(),
                              a + 1, b + 1);
      }
    }
  }
  return table;
}

inline std::vector<double> tabulate_field(const OneBodyFieldSpec& field, const Grid& grid, double t,
                                          const std::map<std::string, double>& constants = {}) {
  if (!std::isfinite(t)) throw ValidationError("field sampling time must be finite");
  std::vector<double> out(grid.positions.size());
  expr::Bindings bindings(constants.begin(), constants.end());
  bindings["t"] = t;
  for (std::size_t a = 0; a < out.size(); ++a) {
    bindings[field.wire] = grid.positions[a];
    try {
      out[a] = expr::evaluate(field.potential, bindings);
    } catch (const EvaluationError& err) {
      throw TabulationError("field on " + field.wire + " at node " + std::to_string(a + 1) + ": " + err.what(),
                            a + 1);
    }
  }
  return out;
}

/// Per-wire field; several one-body terms on the same wire are summed.
/// Kept symbolic so time-dependent drives are sampled when needed.
struct FieldTable {
  OneBodyFieldSpec field;
  Grid grid;
  std::map<std::string, double> constants;
  bool time_dependent = false;

  std::vector<double> sample(double t) const { return tabulate_field(field, grid, t, constants); }
};

struct SimulatorLayout {
  std::vector<WireSpec> wires;
  std::vector<Grid> grids;
  std::vector<KineticStencil> stencils;
  std::vector<CouplingTable> couplings;
  std::vector<FieldTable> fields;
  double scale = 1.0;

  std::size_t wire_index(const std::string& name) const {
    for (std::size_t k = 0; k < wires.size(); ++k)
      if (wires[k].name == name) return k;
    throw ValidationError("unknown wire '" + name + "'");
  }

  bool time_dependent() const {
    for (const auto& f : fields)
      if (f.time_dependent) return true;
    return false;
  }
};

inline SimulatorLayout compile(const ModelSpec& model) {
  SimulatorLayout layout;
  layout.wires = model.wires;
  layout.scale = model.scale;
  for (const auto& w : model.wires) {
    layout.grids.push_back(make_grid(w));
    layout.stencils.push_back(make_stencil(w, layout.grids.back()));
  }
  for (const auto& p : model.pairs) {
    layout.couplings.push_back(tabulate_pair(p, layout.grids[model.wire_index(p.wire_i)],
                                             layout.grids[model.wire_index(p.wire_j)], model.constants));
  }

  // Merge one-body terms per wire, in wire order.
  for (std::size_t k = 0; k < model.wires.size(); ++k) {
    std::optional<expr::Expr> merged;
    for (const auto& f : model.fields) {
      if (f.wire != model.wires[k].name) continue;
      merged = merged ? expr::Expr::binary('+', *merged, f.potential) : f.potential;
    }
    if (!merged) continue;
    FieldTable table{{model.wires[k].name, *merged}, layout.grids[k], model.constants,
                     expr::free_variables(*merged).contains("t")};
    // Sampling at t = 0 surfaces poles on grid nodes at compile time.
    (void)table.sample(0.0);
    layout.fields.push_back(std::move(table));
  }
  return layout;
}

struct ResourceReport {
  std::size_t wires = 0;        // M
  std::size_t max_sites = 0;    // N = max_i N_i
  std::uint64_t connections_used = 0;
  std::uint64_t connections_bound = 0;
  std::uint64_t fields_used = 0;
  std::uint64_t fields_bound = 0;
  /// prod_i N_i, saturating at uint64 max.
  std::uint64_t hilbert_dim = 0;
  bool hilbert_dim_saturated = false;

  bool within_bounds() const { return connections_used <= connections_bound && fields_used <= fields_bound; }
};

/// Counts the connections (nonzero coupling entries, exact comparison with
/// zero) and applied fields, against M(M-1)N^2/2 and MN.
inline ResourceReport resource_report(const SimulatorLayout& layout) {
  ResourceReport r;
  r.wires = layout.wires.size();
  for (const auto& w : layout.wires) r.max_sites = std::max(r.max_sites, static_cast<std::size_t>(w.sites));
  const std::uint64_t m = r.wires, n = r.max_sites;
  r.connections_bound = m * (m - 1) / 2 * n * n;
  r.fields_bound = m * n;
  for (const auto& table : layout.couplings)
    for (double v : table.values)
      if (v != 0.0) ++r.connections_used;
  for (const auto& f : layout.fields) r.fields_used += f.grid.positions.size();
  r.hilbert_dim = 1;
  for (const auto& w : layout.wires) {
    const auto sites = static_cast<std::uint64_t>(w.sites);
    if (r.hilbert_dim > std::numeric_limits<std::uint64_t>::max() / sites) {
      r.hilbert_dim = std::numeric_limits<std::uint64_t>::max();
      r.hilbert_dim_saturated = true;
      break;
    }
    r.hilbert_dim *= sites;
  }
  return r;
}

}  // namespace isosim
