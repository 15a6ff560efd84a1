#pragma once

// Executable checks for the simulator/simulatee correspondence: spectrum
// proportionality, time-rescaled dynamics, discretization convergence,
// ground-state agreement across three routes, and the resource bounds.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/compiler.hpp"
#include "isosim/dynamics.hpp"
#include "isosim/hamiltonian.hpp"
#include "isosim/model.hpp"

namespace isosim {

enum class CheckStatus { pass, fail, indeterminate };

inline std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    default:
      return "indeterminate";
  }
}

/// `measured <= tolerance` decides pass/fail unless the check could not be
/// carried out at all (indeterminate).
struct CheckReport {
  std::string name;
  std::string quantity;
  double measured = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::fail;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  bool passed() const { return status == CheckStatus::pass; }
};

inline CheckStatus judge(double measured, double tolerance) {
  return measured <= tolerance ? CheckStatus::pass : CheckStatus::fail;
}

struct VerifyOptions {
  double lambda = 2.0;
  std::size_t num_eigs = 6;
  double time = 1.0;
  std::uint64_t seed = kDefaultSeed;
  PropagatorConfig propagator{};
  EigenOptions eigen{};
  double dtau = 0.05;
  double gamma0 = 1.0;
};

inline constexpr double kSpectrumScalingTolerance = 1e-10;
inline constexpr double kTimeScalingTolerance = 1e-8;
inline constexpr double kGroundEnergyTolerance = 1e-8;
inline constexpr double kMonotoneSlack = 1e-10;
inline constexpr double kGroundPopulationTarget = 0.999;
inline constexpr double kOrderLow = 1.8;
inline constexpr double kOrderHigh = 2.2;

inline SpectrumResult spectrum_of(const ModelSpec& model, std::size_t count, const EigenOptions& opts = {}) {
  const SimulatorLayout layout = compile(model);
  return lowest_eigenpairs(assemble(layout, 0.0), count, opts);
}

/// Lowest `num_eigs` eigenvalues at scale lambda against lambda times those at
/// scale 1; measured is the largest elementwise relative deviation.
inline CheckReport check_spectrum_scaling(const ModelSpec& model, const VerifyOptions& opts = {}) {
  const double lambda = opts.lambda;
  const SimulatorLayout base = compile(with_scale(model, 1.0));
  const SimulatorLayout scaled = compile(with_scale(model, lambda));
  const SparseHamiltonian h1 = assemble(base, 0.0);
  const std::size_t k = std::min(opts.num_eigs, h1.dimension());
  const SpectrumResult s1 = lowest_eigenpairs(h1, k, opts.eigen);
  const SpectrumResult sl = lowest_eigenpairs(assemble(scaled, 0.0), k, opts.eigen);

  CheckReport r{"spectrum-scaling", "max_i |E_i(lambda) - lambda E_i(1)| / |lambda E_i(1)|", 0.0,
                kSpectrumScalingTolerance};
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < s1.eigenvalues.size(); ++i) {
    const double expected = lambda * s1.eigenvalues[i];
    const double got = sl.eigenvalues[i];
    const double denom = std::abs(expected) > 0.0 ? std::abs(expected) : 1.0;
    const double rel = std::abs(got - expected) / denom;
    r.measured = std::max(r.measured, rel);
    rows.push_back({{"index", i}, {"unit_scale", s1.eigenvalues[i]}, {"scaled", got}, {"relative_error", rel}});
  }
  r.status = judge(r.measured, r.tolerance);
  r.details = {{"lambda", lambda}, {"method", s1.method}, {"eigenvalues", rows}};
  return r;
}

/// ||U_{lambda H}(t/lambda) psi0 - U_H(t) psi0|| <= 1e-8. The scaled run also
/// uses the time step dt/lambda. Driven models are rejected.
inline CheckReport check_time_scaling(const ModelSpec& model, const QuantumState& psi0, const VerifyOptions& opts = {}) {
  const double lambda = opts.lambda;
  const SimulatorLayout base = compile(with_scale(model, 1.0));
  if (base.time_dependent())
    throw ValidationError("time-scaling check requires time-independent fields; driven models are excluded");
  const SimulatorLayout scaled = compile(with_scale(model, lambda));
  PropagatorConfig scaled_cfg = opts.propagator;
  scaled_cfg.dt = opts.propagator.dt / lambda;
  const EvolutionResult a = evolve_real(base, psi0, opts.time, opts.propagator);
  const EvolutionResult b = evolve_real(scaled, psi0, opts.time / lambda, scaled_cfg);
  const double fidelity = a.final_state.overlap(b.final_state);
  const double distance = (a.final_state.amplitudes() - b.final_state.amplitudes()).norm();

  CheckReport r{"time-scaling", "||U_{lambda H}(t/lambda) psi - U_H(t) psi||", distance, kTimeScalingTolerance};
  r.status = judge(r.measured, r.tolerance);
  r.details = {{"lambda", lambda}, {"time", opts.time}, {"fidelity", fidelity}, {"state_distance", distance}};
  return r;
}

struct ConvergenceReport {
  std::string problem;
  std::vector<int> sites;
  std::vector<double> spacings;
  std::vector<double> energies;
  double reference = 0.0;
  std::vector<double> errors;
  double order = 0.0;  // least-squares slope of log(error) against log(spacing)
};

/// Continuum ground energy of a reference problem: pi^2 / (2 m L^2) for the
/// box and omega / 2 for the harmonic well.
inline double continuum_ground_energy(std::string_view problem, const BuiltinParams& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  const double scale = get("scale", 1.0);
  if (problem == "box") {
    const double m = get("mass", 1.0), l = get("length", 1.0);
    return scale * std::numbers::pi * std::numbers::pi / (2.0 * m * l * l);
  }
  if (problem == "harmonic") return scale * 0.5 * get("omega", 40.0);
  throw ValidationError("no continuum reference energy for problem '" + std::string(problem) + "'");
}

inline ConvergenceReport check_convergence(std::string_view problem, const std::vector<int>& sites,
                                           BuiltinParams params = {}, const EigenOptions& eig = {}) {
  if (sites.size() < 4) throw ValidationError("convergence fit needs at least four grid sizes");
  for (std::size_t k = 1; k < sites.size(); ++k)
    if (sites[k] <= sites[k - 1]) throw ValidationError("site counts must be strictly increasing");
  if (problem == "harmonic" && !params.contains("omega")) params["omega"] = 40.0;

  ConvergenceReport r;
  r.problem = std::string(problem);
  r.sites = sites;
  r.reference = continuum_ground_energy(problem, params);
  for (int n : sites) {
    BuiltinParams p = params;
    p["N"] = n;
    const ModelSpec model = builtin(problem, p);
    const SimulatorLayout layout = compile(model);
    const double e = lowest_eigenpairs(assemble(layout, 0.0), 1, eig).eigenvalues[0];
    const double err = std::abs(e - r.reference);
    if (!(err > 0.0)) throw NumericalError("zero discretization error; cannot fit an order");
    r.spacings.push_back(layout.grids[0].spacing);
    r.energies.push_back(e);
    r.errors.push_back(err);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(sites.size());
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const double x = std::log(r.spacings[k]), y = std::log(r.errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  r.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return r;
}

inline CheckReport to_check_report(const ConvergenceReport& c) {
  CheckReport r{"convergence", "|fitted order - 2|", std::abs(c.order - 2.0), 0.2};
  r.status = c.order >= kOrderLow && c.order <= kOrderHigh ? CheckStatus::pass : CheckStatus::fail;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < c.sites.size(); ++k)
    rows.push_back({{"sites", c.sites[k]},
                    {"spacing", c.spacings[k]},
                    {"energy", c.energies[k]},
                    {"error", c.errors[k]},
                    {"relative_error", c.errors[k] / std::abs(c.reference)}});
  r.details = {{"problem", c.problem}, {"reference", c.reference}, {"order", c.order}, {"grids", rows}};
  return r;
}

/// Ground state reached three ways: eigensolver, imaginary-time relaxation
/// from a random state, and zero-temperature Lindblad relaxation (only for
/// dimension <= 128). Measured is the worst leg deviation divided by that
/// leg's tolerance, so the check passes when it is at most 1.
inline CheckReport check_ground_state_correspondence(const ModelSpec& model, const VerifyOptions& opts = {}) {
  const SimulatorLayout layout = compile(model);
  const SparseHamiltonian h = assemble(layout, 0.0);
  const std::size_t dim = h.dimension();
  CheckReport r{"ground-state", "max over legs of deviation / leg tolerance", 0.0, 1.0};
  auto legs = nlohmann::ordered_json::array();

  const SpectrumResult spec = lowest_eigenpairs(h, 1, opts.eigen);
  const double e0 = spec.eigenvalues[0];

  const RelaxResult relaxed = relax_imaginary(h, random_state(dim, opts.seed), opts.dtau, 1e-2 * kGroundEnergyTolerance,
                                              opts.propagator);
  const double energy_gap = std::abs(relaxed.energies.back() - e0);
  double rise = 0.0;
  for (std::size_t k = 1; k < relaxed.energies.size(); ++k)
    rise = std::max(rise, relaxed.energies[k] - relaxed.energies[k - 1]);
  r.measured = std::max({r.measured, energy_gap / kGroundEnergyTolerance, rise / kMonotoneSlack});
  legs.push_back({{"leg", "imaginary-time"},
                  {"eigensolver_energy", e0},
                  {"relaxed_energy", relaxed.energies.back()},
                  {"energy_deviation", energy_gap},
                  {"max_energy_rise", rise},
                  {"steps", relaxed.energies.size() - 1}});

  bool indeterminate = false;
  if (dim <= kLindbladMaxDimension) {
    const LindbladGenerator gen(dense_matrix(h), total_position(layout), BathSpec{0.0, opts.gamma0});
    const auto safe = gen.drains_to_ground();
    const auto& ground = gen.ground_indices();
    std::vector<Eigen::Index> excited;
    for (Eigen::Index k = 0; k < gen.dimension(); ++k)
      if (safe[static_cast<std::size_t>(k)] && std::find(ground.begin(), ground.end(), k) == ground.end())
        excited.push_back(k);
    const auto reachable = static_cast<std::size_t>(std::count(safe.begin(), safe.end(), true));
    nlohmann::ordered_json leg = {{"leg", "lindblad-T0"}, {"reachable_states", reachable}, {"dimension", dim}};
    if (excited.empty()) {
      indeterminate = true;
      leg["warning"] = "no excited state couples down to the ground state; relaxation is not observable";
    } else {
      if (reachable < dim)
        leg["warning"] = "initial state restricted to the " + std::to_string(reachable) +
                         " eigenstates that relax to the ground state (zero couplings elsewhere)";
      // Uniform mixture over the states that drain to the ground space.
      CMatrix start = CMatrix::Zero(gen.dimension(), gen.dimension());
      for (Eigen::Index k = 0; k < gen.dimension(); ++k)
        if (safe[static_cast<std::size_t>(k)]) start(k, k) = 1.0 / static_cast<double>(reachable);
      const CMatrix rho0 = gen.from_eigenbasis(start);
      double slowest = std::numeric_limits<double>::infinity();
      for (auto k : excited) slowest = std::min(slowest, gen.outflow()[k]);
      const double t_final = 25.0 / slowest;
      const double dt = 0.5 / gen.outflow().maxCoeff();
      const LindbladResult relaxed_rho =
          lindblad_relax(layout, DensityMatrix(0.5 * (rho0 + rho0.adjoint())), gen.bath(), t_final, dt, 1000);
      r.measured = std::max(r.measured, (1.0 - relaxed_rho.ground_population) / (1.0 - kGroundPopulationTarget));
      leg["ground_population"] = relaxed_rho.ground_population;
      leg["t_final"] = t_final;
    }
    legs.push_back(leg);
  } else {
    legs.push_back({{"leg", "lindblad-T0"}, {"skipped", "dimension above " + std::to_string(kLindbladMaxDimension)}});
  }
  r.status = indeterminate ? CheckStatus::indeterminate : judge(r.measured, r.tolerance);
  r.details = {{"ground_energy", e0}, {"legs", legs}};
  return r;
}

inline CheckReport check_resource_bound(const ModelSpec& model) {
  const ResourceReport rep = resource_report(compile(model));
  auto ratio = [](std::uint64_t used, std::uint64_t bound) {
    return bound == 0 ? (used == 0 ? 0.0 : std::numeric_limits<double>::infinity())
                      : static_cast<double>(used) / static_cast<double>(bound);
  };
  const double conn = ratio(rep.connections_used, rep.connections_bound);
  const double fields = ratio(rep.fields_used, rep.fields_bound);
  CheckReport r{"resources", "max(connections_used / bound, fields_used / bound)", std::max(conn, fields), 1.0};
  r.status = rep.within_bounds() ? CheckStatus::pass : CheckStatus::fail;
  r.details = {{"wires", rep.wires},
               {"max_sites", rep.max_sites},
               {"connections_used", rep.connections_used},
               {"connections_bound", rep.connections_bound},
               {"fields_used", rep.fields_used},
               {"fields_bound", rep.fields_bound},
               {"hilbert_dim", rep.hilbert_dim}};
  return r;
}

}  // namespace isosim
