// isosim: compile, diagonalize, propagate and check discretized multi-wire models.
//
//   isosim compile   MODEL [-o layout.json]
//   isosim spectrum  MODEL [--num-eigs k] [--json out]
//   isosim evolve    MODEL --t T [--dt h] [--state s.json | --ground-start] [--observables x1,x2] [--csv out] [--json out]
//   isosim relax     MODEL --mode imaginary|lindblad [--temperature T] [--gamma0 g] [--dt h] [--t-final T]
//   isosim verify    [MODEL] --check scaling|time-scaling|convergence|ground|resources|all
//   isosim resources MODEL
//
// MODEL is a JSON model file or builtin:<name>[:key=value,...].
// Exit status: 0 ok, 1 I/O, 2 validation, 3 evaluation, 4 numerical, 5 check failed.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isosim/isosim.hpp"

namespace {

using isosim::io::Json;
using isosim::io::format_double;

struct Defaults {
  std::uint64_t seed = isosim::kDefaultSeed;
  double dt = 1e-2;
  std::size_t krylov_dim = 24;
  double tol = 1e-9;
  double gamma0 = 1.0;
  double dtau = 0.05;
  double energy_tol = 1e-10;
  std::size_t num_eigs = 6;
  double lambda = 2.0;
};

struct Config {
  Defaults d;
  std::uint64_t seed = d.seed;
  std::size_t krylov_dim = d.krylov_dim;
  double tol = d.tol;

  isosim::PropagatorConfig propagator(double dt) const {
    isosim::PropagatorConfig cfg;
    cfg.dt = dt;
    cfg.krylov_dim = krylov_dim;
    cfg.tol = tol;
    return cfg;
  }
  isosim::EigenOptions eigen() const {
    isosim::EigenOptions opts;
    opts.seed = seed;
    return opts;
  }
};

Json config_json(const Config& c) {
  return {{"seed", c.seed},
          {"dt", c.d.dt},
          {"krylov_dim", c.krylov_dim},
          {"tol", c.tol},
          {"gamma0", c.d.gamma0},
          {"dtau", c.d.dtau},
          {"energy_tol", c.d.energy_tol},
          {"num_eigs", c.d.num_eigs},
          {"lambda", c.d.lambda},
          {"eigen_tol", isosim::EigenOptions{}.tol},
          {"eigen_max_iter", isosim::EigenOptions{}.max_iter},
          {"dense_eigen_threshold", isosim::kDenseEigenThreshold},
          {"lindblad_max_dimension", isosim::kLindbladMaxDimension},
          {"basis", std::string(isosim::kBasisConvention)}};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    isosim::io::write_text(path, text);
}

std::vector<std::size_t> radices(const isosim::SimulatorLayout& layout) { return isosim::basis_of(layout).radices(); }

isosim::QuantumState ground_state(const isosim::SparseHamiltonian& h, const Config& cfg) {
  const auto spec = isosim::lowest_eigenpairs(h, 1, cfg.eigen());
  return isosim::QuantumState::normalized(spec.eigenvectors.col(0).cast<isosim::Complex>());
}

isosim::QuantumState initial_state(const std::string& path, bool ground, const isosim::SparseHamiltonian& h,
                                   const Config& cfg) {
  if (!path.empty())
    return isosim::io::state_from_json(isosim::io::parse_json(isosim::io::read_text(path), path), h.dimension());
  if (ground) return ground_state(h, cfg);
  return isosim::random_state(h.dimension(), cfg.seed);
}

int run_compile(const Config&, const std::string& model_path, const std::string& out) {
  const auto layout = isosim::compile(isosim::io::load_model(model_path));
  const Json doc = isosim::io::to_json(layout);
  if (out.empty()) {
    std::cout << isosim::io::dump(doc);
    return 0;
  }
  isosim::io::write_text(out, isosim::io::dump(doc));
  const auto rep = isosim::resource_report(layout);
  std::cout << "wires " << rep.wires << "  dimension " << rep.hilbert_dim << "  connections " << rep.connections_used
            << "/" << rep.connections_bound << "  fields " << rep.fields_used << "/" << rep.fields_bound << "\n"
            << "wrote " << out << "\n";
  return 0;
}

int run_spectrum(const Config& cfg, const std::string& model_path, std::size_t k, bool k_given,
                 const std::string& out) {
  const auto layout = isosim::compile(isosim::io::load_model(model_path));
  const auto h = isosim::assemble(layout, 0.0);
  // the default count shrinks to small models; an explicit k > D is an error
  if (!k_given) k = std::min(k, h.dimension());
  const auto spec = isosim::lowest_eigenpairs(h, k, cfg.eigen());
  const Json doc = isosim::io::to_json(spec, h.dimension(), layout.scale);
  if (!out.empty()) isosim::io::write_text(out, isosim::io::dump(doc));
  std::cout << "dimension " << h.dimension() << "  method " << spec.method << "\n";
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i)
    std::cout << i << "  " << format_double(spec.eigenvalues[i]) << "  residual " << format_double(spec.residuals[i])
              << "\n";
  return 0;
}

struct EvolveArgs {
  double t = 1.0;
  std::optional<double> dt;
  std::string state;
  bool ground = false;
  std::vector<std::string> observables;
  std::size_t sample_every = 1;
  std::string csv;
  std::string json;
};

int run_evolve(const Config& cfg, const std::string& model_path, const EvolveArgs& a) {
  const auto layout = isosim::compile(isosim::io::load_model(model_path));
  const auto h0 = isosim::assemble(layout, 0.0);
  const auto psi0 = initial_state(a.state, a.ground, h0, cfg);
  std::vector<std::size_t> wires;
  if (a.observables.empty())
    for (std::size_t w = 0; w < layout.wires.size(); ++w) wires.push_back(w);
  for (const auto& name : a.observables) {
    const std::size_t w = layout.wire_index(name);
    if (w >= layout.wires.size()) throw isosim::ValidationError("--observables: unknown wire '" + name + "'");
    wires.push_back(w);
  }
  const auto result =
      isosim::evolve_real(layout, psi0, a.t, cfg.propagator(a.dt.value_or(cfg.d.dt)), a.sample_every);
  const auto& tr = result.trajectory;
  emit(a.csv, isosim::io::trajectory_csv(tr, wires));
  if (!a.json.empty()) isosim::io::write_text(a.json, isosim::io::dump(isosim::io::to_json(result.final_state, radices(layout))));
  if (!a.csv.empty()) {
    const double e0 = tr.energies.front(), e1 = tr.energies.back();
    std::cout << "samples " << tr.times.size() << "  energy " << format_double(e0) << " -> " << format_double(e1)
              << "  norm " << format_double(tr.norms.back()) << "\n";
  }
  return 0;
}

struct RelaxArgs {
  std::string mode = "imaginary";
  double temperature = 0.0;
  std::optional<double> gamma0;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<double> energy_tol;
  std::string state;
  std::size_t sample_every = 1;
  std::string csv;
  std::string json;
};

int run_relax(const Config& cfg, const std::string& model_path, const RelaxArgs& a) {
  const auto layout = isosim::compile(isosim::io::load_model(model_path));
  const auto h = isosim::assemble(layout, 0.0);
  if (layout.time_dependent())
    std::cerr << "note: time-dependent fields are frozen at t = 0 during relaxation\n";

  if (a.mode == "imaginary") {
    const auto psi0 = initial_state(a.state, false, h, cfg);
    const double dtau = a.dt.value_or(cfg.d.dtau);
    const auto r = isosim::relax_imaginary(h, psi0, dtau, a.energy_tol.value_or(cfg.d.energy_tol),
                                           cfg.propagator(dtau));
    std::vector<double> taus;
    for (std::size_t k = 0; k < r.energies.size(); ++k) taus.push_back(static_cast<double>(k) * dtau);
    if (!a.csv.empty()) isosim::io::write_text(a.csv, isosim::io::energy_trace_csv(taus, r.energies, "tau"));
    if (!a.json.empty()) isosim::io::write_text(a.json, isosim::io::dump(isosim::io::to_json(r.state, radices(layout))));
    std::cout << "steps " << r.energies.size() - 1 << "  energy " << format_double(r.energies.back()) << "\n";
    return 0;
  }

  const isosim::BathSpec bath{a.temperature, a.gamma0.value_or(cfg.d.gamma0)};
  bath.check();
  if (h.dimension() > isosim::kLindbladMaxDimension)
    throw isosim::ValidationError("lindblad mode is limited to dimension " +
                                  std::to_string(isosim::kLindbladMaxDimension));
  const isosim::Matrix dense = isosim::dense_matrix(h);
  const isosim::LindbladGenerator gen(dense, isosim::total_position(layout), bath);
  double t_final = 0.0;
  if (a.t_final) {
    t_final = *a.t_final;
  } else {
    const double slowest = gen.slowest_rate();
    if (!(slowest > 0.0))
      throw isosim::ValidationError("some mode never relaxes (zero couplings); pass --t-final explicitly");
    t_final = 25.0 / slowest;
  }
  const double dt = a.dt.value_or(0.5 / std::max(gen.outflow().maxCoeff(), 1e-300));
  const isosim::DensityMatrix rho0 =
      a.state.empty() ? isosim::DensityMatrix::maximally_mixed(h.dimension())
                      : isosim::DensityMatrix::pure(initial_state(a.state, false, h, cfg));
  const auto r = isosim::lindblad_relax(layout, rho0, bath, t_final, dt, a.sample_every);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!a.csv.empty()) isosim::io::write_text(a.csv, isosim::io::energy_trace_csv(r.times, r.energies));
  if (!a.json.empty()) isosim::io::write_text(a.json, isosim::io::dump(isosim::io::to_json(r.rho, radices(layout))));
  std::cout << "t_final " << format_double(t_final) << "  energy " << format_double(r.energies.back())
            << "  ground_population " << format_double(r.ground_population);
  // the Gibbs state only exists for T > 0
  if (bath.temperature > 0.0)
    std::cout << "  gibbs_trace_distance "
              << format_double(isosim::trace_distance(r.rho, isosim::gibbs_state(dense, bath.temperature)));
  std::cout << "\n";
  return 0;
}

struct VerifyArgs {
  std::string check = "all";
  std::optional<double> lambda;
  double time = 1.0;
  std::optional<double> dt;
  std::string problem = "box";
  std::vector<int> sites{8, 16, 32, 64};
  std::string json;
};

int run_verify(const Config& cfg, const std::string& model_path, const VerifyArgs& a) {
  isosim::VerifyOptions opts;
  opts.lambda = a.lambda.value_or(cfg.d.lambda);
  opts.num_eigs = cfg.d.num_eigs;
  opts.time = a.time;
  opts.seed = cfg.seed;
  opts.propagator = cfg.propagator(a.dt.value_or(cfg.d.dt));
  opts.eigen = cfg.eigen();
  opts.dtau = cfg.d.dtau;
  opts.gamma0 = cfg.d.gamma0;

  const bool all = a.check == "all";
  const bool needs_model = a.check != "convergence";
  if (needs_model && model_path.empty()) throw isosim::ValidationError("verify --check " + a.check + " needs a MODEL");
  std::optional<isosim::ModelSpec> model;
  if (!model_path.empty()) model = isosim::io::load_model(model_path);

  std::vector<isosim::CheckReport> reports;
  if (all || a.check == "resources") reports.push_back(isosim::check_resource_bound(*model));
  if (all || a.check == "scaling") reports.push_back(isosim::check_spectrum_scaling(*model, opts));
  if (all || a.check == "time-scaling") {
    const auto layout = isosim::compile(*model);
    if (all && layout.time_dependent()) {
      std::cerr << "note: time-scaling check skipped for a model with time-dependent fields\n";
    } else {
      const auto psi0 = isosim::random_state(isosim::basis_of(layout).dimension(), cfg.seed);
      reports.push_back(isosim::check_time_scaling(*model, psi0, opts));
    }
  }
  if (all || a.check == "ground") reports.push_back(isosim::check_ground_state_correspondence(*model, opts));
  if (all || a.check == "convergence")
    reports.push_back(isosim::to_check_report(isosim::check_convergence(a.problem, a.sites, {}, opts.eigen)));

  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(isosim::io::to_json(r));
  const std::string text = isosim::io::dump(arr);
  std::cout << text;
  if (!a.json.empty()) isosim::io::write_text(a.json, text);

  bool ok = true;
  std::cout << "\n" << std::left << std::setw(18) << "check" << std::setw(14) << "status" << std::setw(26) << "measured"
            << "tolerance\n";
  for (const auto& r : reports) {
    ok = ok && r.passed();
    std::cout << std::setw(18) << r.name << std::setw(14) << isosim::to_string(r.status) << std::setw(26)
              << format_double(r.measured) << format_double(r.tolerance) << "\n";
  }
  return ok ? 0 : 5;
}

int run_resources(const Config&, const std::string& model_path, const std::string& out) {
  const auto rep = isosim::resource_report(isosim::compile(isosim::io::load_model(model_path)));
  const std::string text = isosim::io::dump(isosim::io::to_json(rep));
  if (!out.empty()) isosim::io::write_text(out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discretized multi-wire quantum model simulator"};
  app.fallthrough();
  app.set_version_flag("--version", "isosim 1.0.0");
  Config cfg;
  bool show_config = false;
  app.add_option("--seed", cfg.seed, "seed for random states and Lanczos starts")->envname("ISOSIM_SEED");
  app.add_option("--krylov-dim", cfg.krylov_dim, "Krylov subspace size")->check(CLI::Range(2, 1000));
  app.add_option("--tol", cfg.tol, "propagator tolerance")->check(CLI::PositiveNumber);
  app.add_flag("--show-config", show_config, "print effective defaults as JSON and exit");
  app.require_subcommand(0, 1);

  std::string model;
  auto model_arg = [&](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("model", model, "model JSON file or builtin:<name>[:k=v,...]");
    if (required) opt->required();
  };

  std::string out;
  auto* compile = app.add_subcommand("compile", "tabulate a model and write its layout as JSON");
  model_arg(compile);
  compile->add_option("-o,--output", out, "layout JSON path (stdout if omitted)");

  std::size_t num_eigs = cfg.d.num_eigs;
  auto* spectrum = app.add_subcommand("spectrum", "lowest eigenvalues");
  model_arg(spectrum);
  auto* num_eigs_opt = spectrum->add_option("--num-eigs,-k", num_eigs, "number of eigenvalues")->check(CLI::PositiveNumber);
  spectrum->add_option("--json", out, "write eigenvalue JSON here");

  EvolveArgs ev;
  auto* evolve = app.add_subcommand("evolve", "real-time propagation; CSV trajectory");
  model_arg(evolve);
  evolve->add_option("--t", ev.t, "final time")->check(CLI::PositiveNumber);
  evolve->add_option("--dt", ev.dt, "time step")->check(CLI::PositiveNumber);
  auto* state_opt = evolve->add_option("--state", ev.state, "initial state JSON");
  evolve->add_flag("--ground-start", ev.ground, "start from the ground state")->excludes(state_opt);
  evolve->add_option("--observables", ev.observables, "wires whose <x> and Var(x) are recorded")->delimiter(',');
  evolve->add_option("--sample-every", ev.sample_every, "record every n-th step")->check(CLI::PositiveNumber);
  evolve->add_option("--csv", ev.csv, "trajectory CSV path (stdout if omitted)");
  evolve->add_option("--json", ev.json, "final state JSON path");

  RelaxArgs rx;
  auto* relax = app.add_subcommand("relax", "imaginary-time or Lindblad relaxation");
  model_arg(relax);
  relax->add_option("--mode", rx.mode, "imaginary or lindblad")->check(CLI::IsMember({"imaginary", "lindblad"}));
  relax->add_option("--temperature", rx.temperature, "bath temperature (lindblad)")->check(CLI::NonNegativeNumber);
  relax->add_option("--gamma0", rx.gamma0, "bath coupling rate (lindblad)")->check(CLI::PositiveNumber);
  relax->add_option("--dt", rx.dt, "imaginary time step, or Lindblad step")->check(CLI::PositiveNumber);
  relax->add_option("--t-final", rx.t_final, "Lindblad integration time")->check(CLI::PositiveNumber);
  relax->add_option("--energy-tol", rx.energy_tol, "imaginary-time stopping tolerance")->check(CLI::PositiveNumber);
  relax->add_option("--state", rx.state, "initial state JSON");
  relax->add_option("--sample-every", rx.sample_every, "record every n-th Lindblad step")->check(CLI::PositiveNumber);
  relax->add_option("--csv", rx.csv, "energy trace CSV path");
  relax->add_option("--json", rx.json, "final state or density matrix JSON path");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "run correspondence checks; JSON reports and summary");
  model_arg(verify, false);
  verify->add_option("--check", va.check, "which check")
      ->check(CLI::IsMember({"scaling", "time-scaling", "convergence", "ground", "resources", "all"}));
  verify->add_option("--lambda", va.lambda, "energy scale factor")->check(CLI::PositiveNumber);
  verify->add_option("--time", va.time, "propagation time for time-scaling")->check(CLI::PositiveNumber);
  verify->add_option("--dt", va.dt, "time step")->check(CLI::PositiveNumber);
  verify->add_option("--problem", va.problem, "convergence problem")->check(CLI::IsMember({"box", "harmonic"}));
  verify->add_option("--sites", va.sites, "grid sizes for the convergence fit")->delimiter(',');
  verify->add_option("--json", va.json, "also write the report array here");

  auto* resources = app.add_subcommand("resources", "resource usage against the polynomial bounds");
  model_arg(resources);
  resources->add_option("--json", out, "write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (show_config) {
    std::cout << isosim::io::dump(config_json(cfg));
    return 0;
  }

  try {
    if (*compile) return run_compile(cfg, model, out);
    if (*spectrum) return run_spectrum(cfg, model, num_eigs, num_eigs_opt->count() > 0, out);
    if (*evolve) return run_evolve(cfg, model, ev);
    if (*relax) return run_relax(cfg, model, rx);
    if (*verify) return run_verify(cfg, model, va);
    if (*resources) return run_resources(cfg, model, out);
  } catch (const isosim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (const auto* v = dynamic_cast<const isosim::ValidationError*>(&e); v && v->violations().size() > 1)
      for (const auto& item : v->violations()) std::cerr << "  - " << item << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
