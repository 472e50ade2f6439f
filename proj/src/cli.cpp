#include "metapot/cli.hpp"

#include "metapot/birth_death.hpp"
#include "metapot/error.hpp"
#include "metapot/format.hpp"
#include "metapot/io.hpp"
#include "metapot/kernels.hpp"
#include "metapot/metastability.hpp"
#include "metapot/potential.hpp"
#include "metapot/sim.hpp"
#include "metapot/trace_collapse.hpp"
#include "metapot/variational.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace metapot::cli {

namespace {

using nlohmann::json;

struct Output {
  std::string dir;
  std::string format = "json";
};

void add_output(CLI::App* cmd, Output& o) {
  cmd->add_option("--out", o.dir, "output directory (stdout when omitted)");
  cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
}

// Writes <dir>/<name>.<ext>, or prints to `out` when no directory is given.
void emit(const Output& o, const std::string& name, const std::string& ext, const std::string& text,
          std::ostream& out) {
  if (o.dir.empty()) {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    return;
  }
  std::filesystem::create_directories(o.dir);
  io::write_file((std::filesystem::path(o.dir) / (name + "." + ext)).string(), text);
}

void emit_report(const Output& o, const std::string& name, const json& j, const std::string& csv, std::ostream& out) {
  if (o.format == "csv") {
    emit(o, name, "csv", csv, out);
  } else {
    emit(o, name, "json", j.dump(2), out);
  }
}

std::string csv_row(const std::string& quantity, const std::string& state, double v) {
  return quantity + "," + state + "," + format_number(v) + "\n";
}

double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      grid.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--n-grid entries must be integers");
    }
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "--n-grid must be increasing");
  }
  return grid;
}

void check_tol(double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "--tol must be positive");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGenerator:
    case ErrorCode::SingularSystem:
    case ErrorCode::DegenerateQuadratic:
    case ErrorCode::AbsorbingState:
    case ErrorCode::QuadratureFailure:
    case ErrorCode::HorizonOverflow:
    case ErrorCode::NeverVisitsF:
    case ErrorCode::InsufficientVisits:
      return kCheckFailed;
    default:
      return kUsage;
  }
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& input, std::ostream& out) {
  const io::ChainSpec spec = io::load_chain_spec(input);
  const auto violations = validate_generator(spec.rates, spec.space);
  if (violations.empty()) {
    out << "valid\n";
    return kOk;
  }
  out << "invalid: " << violations.size() << " violation(s)\n";
  for (const auto& v : violations) out << "  " << v.message << '\n';
  return kCheckFailed;
}

int cmd_analyze(const std::string& input, const std::string& a_arg, const std::string& b_arg, const std::string& c_arg,
                double tol, const Output& o, std::ostream& out, std::ostream& err) {
  check_tol(tol);
  const ChainModel chain = io::load_chain(input);
  const auto& space = chain.space();
  const StateSet a = io::parse_set(space, a_arg);
  const StateSet b = io::parse_set(space, b_arg);

  const CapacityReport cap = capacity(chain, a, b);
  const CapacityIdentities ids = capacity_identities(chain, a, b);
  const Committor forward = committor(chain, a, b);
  const Committor backward = committor(chain, a, b, ChainKind::Adjoint);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(chain.size()));
  const DualValue eq = equilibrium_expectation(chain, a, b, ones);
  const MeanSetRate rate = mean_set_rate(chain, set_union(a, b), a, b);

  const double adj = rel_diff(ids.cap_adjoint, ids.cap);
  const double rev = rel_diff(ids.cap_reversed, ids.cap);
  const bool sym_ok = ids.cap_symmetric <= ids.cap * (1.0 + tol);
  const double a03 = rel_diff(chain.mass(a) * rate.value(), ids.cap);
  const double eq_gap = rel_diff(eq.direct, eq.formula);
  bool ok = adj <= tol && rev <= tol && sym_ok && a03 <= tol && eq_gap <= std::max(tol, 1e-9);

  json j;
  j["states"] = space.labels();
  j["stationary"] = io::values_by_label(space, chain.stationary());
  j["capacity"] = io::to_json(space, cap);
  j["identities"] = {{"cap", ids.cap},
                     {"cap_adjoint", ids.cap_adjoint},
                     {"cap_reversed", ids.cap_reversed},
                     {"cap_symmetric", ids.cap_symmetric},
                     {"adjoint_rel_diff", adj},
                     {"reversed_rel_diff", rev},
                     {"symmetric_below", sym_ok}};
  j["committor"] = io::values_by_label(space, forward.values);
  j["adjoint_committor"] = io::values_by_label(space, backward.values);
  j["equilibrium_hitting_time"] = {{"direct", eq.direct}, {"formula", eq.formula}};
  j["mean_set_rate"] = {{"via_trace", rate.via_trace},
                        {"via_return", rate.via_return},
                        {"mass_times_rate", chain.mass(a) * rate.value()}};

  std::string csv = "quantity,state,value\n";
  csv += csv_row("capacity", "", ids.cap);
  csv += csv_row("adjoint_capacity", "", ids.cap_adjoint);
  csv += csv_row("reversed_capacity", "", ids.cap_reversed);
  csv += csv_row("symmetric_capacity", "", ids.cap_symmetric);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    csv += csv_row("committor", space.label(i), forward.values[static_cast<Eigen::Index>(i)]);
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    csv += csv_row("adjoint_committor", space.label(i), backward.values[static_cast<Eigen::Index>(i)]);
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    csv += csv_row("escape_probability", space.label(a[k]), cap.escape_probs[static_cast<Eigen::Index>(k)]);
    csv += csv_row("harmonic_measure", space.label(a[k]), cap.harmonic_measure[static_cast<Eigen::Index>(k)]);
  }
  csv += csv_row("equilibrium_hitting_time_direct", "", eq.direct);
  csv += csv_row("equilibrium_hitting_time_formula", "", eq.formula);
  csv += csv_row("mean_set_rate", "", rate.value());

  if (!c_arg.empty()) {
    const StateSet c = io::parse_set(space, c_arg);
    const ThreeSetIdentity t = three_set_identity(chain, a, b, c);
    // the plain form only holds when A u B u C = E; the trace form always does
    const double res = std::abs(t.residual()) / t.scale;
    const double trace_res = std::abs(t.trace_residual()) / t.scale;
    ok = ok && trace_res <= tol;
    j["three_set"] = {{"C", io::labels_of(space, c)},
                      {"forward", t.forward},
                      {"symmetric", t.symmetric},
                      {"trace_symmetric", t.trace_symmetric},
                      {"covers_space", t.covers_space},
                      {"relative_residual", res},
                      {"trace_relative_residual", trace_res}};
    csv += csv_row("three_set_forward", "", t.forward);
    csv += csv_row("three_set_symmetric", "", t.symmetric);
    csv += csv_row("three_set_trace_symmetric", "", t.trace_symmetric);
    csv += csv_row("three_set_relative_residual", "", res);
    csv += csv_row("three_set_trace_relative_residual", "", trace_res);
  }
  j["checks_passed"] = ok;
  emit_report(o, "analyze", j, csv, out);
  if (!ok) {
    err << "identity check failed at tolerance " << format_number(tol) << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int cmd_saddle(const std::string& input, const std::string& a0, const std::string& a1, const std::string& b_arg,
               double tol, const Output& o, std::ostream& out, std::ostream& err) {
  check_tol(tol);
  const ChainModel chain = io::load_chain(input);
  const auto& space = chain.space();
  const SaddleProblem problem{io::parse_set(space, a0), io::parse_set(space, a1), io::parse_set(space, b_arg)};
  const SaddleSolution sol = solve_saddle(chain, problem);
  const double ratio = saddle_rate_ratio(chain, problem);

  const CollapsedChain c = collapse(chain, problem.b);
  StateSet ca0, ca1;
  for (auto s : problem.a0) ca0.push_back(c.map(s));
  for (auto s : problem.a1) ca1.push_back(c.map(s));
  const double collapsed_cap = capacity_value(c.chain, ca1, ca0);

  const ChainModel star = adjoint(chain);
  const bool reversible =
      (DenseMatrix(star.rates().off_diagonal()) - DenseMatrix(chain.rates().off_diagonal())).cwiseAbs().maxCoeff() <=
      1e-12 * std::max(1.0, chain.holding().maxCoeff());
  const double f_h_gap = (sol.f - sol.h).cwiseAbs().maxCoeff();

  json j = io::to_json(space, sol);
  j["rate_ratio"] = ratio;
  j["collapsed_capacity"] = collapsed_cap;
  j["reversible"] = reversible;
  j["f_equals_h"] = f_h_gap <= 1e-8;
  const bool ok = std::abs(sol.h_on_b() - ratio) <= tol && std::abs(sol.value - collapsed_cap) <= tol * collapsed_cap &&
                  sol.kkt_residual <= 1e-9;
  j["checks_passed"] = ok;

  std::string csv = "quantity,state,value\n";
  csv += csv_row("value", "", sol.value);
  csv += csv_row("kkt_residual", "", sol.kkt_residual);
  csv += csv_row("h_on_B", "", sol.h_on_b());
  csv += csv_row("rate_ratio", "", ratio);
  csv += csv_row("collapsed_capacity", "", collapsed_cap);
  for (std::size_t i = 0; i < chain.size(); ++i) csv += csv_row("f_opt", space.label(i), sol.f[static_cast<Eigen::Index>(i)]);
  for (std::size_t i = 0; i < chain.size(); ++i) csv += csv_row("h_opt", space.label(i), sol.h[static_cast<Eigen::Index>(i)]);
  emit_report(o, "saddle", j, csv, out);
  if (!ok) {
    err << "saddle check failed at tolerance " << format_number(tol) << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int cmd_bd(const std::string& input, const std::string& grid_arg, double tol, const Output& o, std::ostream& out,
           std::ostream& err) {
  check_tol(tol);
  io::BDFile file = io::load_bd_config(input);
  if (!grid_arg.empty()) file.n_grid = parse_grid(grid_arg);
  if (file.n_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty N grid");
  const bd::ConvergenceTable table = bd::finite_n_vs_limit(file.config, file.n_grid);

  json summary = io::to_json(table);
  json trends = json::array();
  double worst_route = 0.0;
  for (std::size_t i = 0; i < table.limits.size(); ++i) {
    std::vector<double> seq;
    for (const auto& r : table.rows) seq.push_back(r.scaled_rates[i]);
    const Extrapolation e = extrapolate_power_law(file.n_grid, seq);
    trends.push_back({{"from", table.limits[i].from + 1},
                      {"to", table.limits[i].to + 1},
                      {"limit", table.limits[i].value},
                      {"extrapolated", e.limit},
                      {"last_relative_error", table.rows.back().relative_error[i]}});
  }
  for (const auto& r : table.rows) worst_route = std::max(worst_route, r.route_discrepancy);
  json h1 = json::array();
  json h2 = json::array();
  const std::size_t k = table.rows.front().h1.size();
  for (std::size_t x = 0; x < k; ++x) {
    bool dec1 = true, dec2 = true;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      dec1 = dec1 && table.rows[r].h1[x] < table.rows[r - 1].h1[x];
      dec2 = dec2 && table.rows[r].h2[x] < table.rows[r - 1].h2[x];
    }
    h1.push_back({{"metastate", x + 1}, {"decreasing", dec1}, {"last", table.rows.back().h1[x]}});
    h2.push_back({{"metastate", x + 1}, {"decreasing", dec2}, {"last", table.rows.back().h2[x]}});
  }
  summary["h0"] = trends;
  summary["h1"] = h1;
  summary["h2"] = h2;
  summary["max_route_discrepancy"] = worst_route;
  const bool ok = worst_route <= tol;
  summary["checks_passed"] = ok;

  const std::string csv = bd::convergence_csv(table);
  if (o.dir.empty()) {
    emit_report(o, "bd_convergence", summary, csv, out);
  } else {
    emit(o, "bd_convergence", "csv", csv, out);
    emit(o, "bd_summary", "json", summary.dump(2), out);
  }
  if (!ok) {
    err << "trace and capacity routes disagree by " << format_number(worst_route) << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int cmd_simulate(const std::string& input, const std::string& start_arg, const std::string& a_arg,
                 const std::string& b_arg, double horizon, std::int64_t n, std::uint64_t seed,
                 const std::string& trajectory_path, const Output& o, std::ostream& out) {
  if (n <= 0) throw Error(ErrorCode::InvalidSampleCount, "--n must be positive");
  const ChainModel chain = io::load_chain(input);
  const auto& space = chain.space();
  const StateIndex start = space.index_of(start_arg);
  if (b_arg.empty() && !(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "give --B or a positive --horizon");

  json j;
  j["start"] = start_arg;
  if (!b_arg.empty()) {
    const StateSet b = io::parse_set(space, b_arg);
    sim::MCEstimate est;
    double exact = 0.0;
    if (!a_arg.empty()) {
      const StateSet a = io::parse_set(space, a_arg);
      est = sim::estimate_hitting_prob(chain, start, a, b, static_cast<std::uint64_t>(n), seed);
      exact = committor(chain, a, b).values[static_cast<Eigen::Index>(start)];
      j["quantity"] = "hitting_probability";
    } else {
      const Vector ones = Vector::Ones(static_cast<Eigen::Index>(chain.size()));
      est = sim::estimate_time_integral(chain, start, b, ones, static_cast<std::uint64_t>(n), seed);
      exact = expected_time_integrals(chain, b, ones)[static_cast<Eigen::Index>(start)];
      j["quantity"] = "mean_hitting_time";
    }
    j["estimate"] = io::to_json(est);
    j["exact"] = exact;
    j["z_score"] = est.std_error > 0.0 ? std::abs(est.mean - exact) / est.std_error : 0.0;
    const auto verdict = sim::compare(est.mean, est.std_error, exact);
    j["agreement"] = verdict == sim::Agreement::Pass ? "pass" : verdict == sim::Agreement::Flag ? "flag" : "fail";
  }
  if (!trajectory_path.empty()) {
    const sim::StopRule rule =
        b_arg.empty() ? sim::StopRule::at_time(horizon) : sim::StopRule::on_hitting(io::parse_set(space, b_arg));
    const sim::Trajectory traj = sim::simulate(chain, start, rule, seed);
    io::write_file(trajectory_path, io::trajectory_csv(traj, space));
    j["trajectory"] = {{"path", trajectory_path}, {"jumps", traj.jumps()}, {"end_time", traj.end_time}};
  }
  std::string csv = "quantity,state,value\n";
  if (j.contains("estimate")) {
    csv += csv_row("mean", start_arg, j["estimate"]["mean"].get<double>());
    csv += csv_row("std_error", start_arg, j["estimate"]["std_error"].get<double>());
    csv += csv_row("exact", start_arg, j["exact"].get<double>());
  }
  emit_report(o, "simulate", j, csv, out);
  return kOk;
}

int cmd_trace(const std::string& input, const std::string& f_arg, const Output& o, std::ostream& out) {
  const ChainModel chain = io::load_chain(input);
  const TraceChain t = trace(chain, io::parse_set(chain.space(), f_arg));
  emit(o, "trace", "yaml", io::emit_chain_spec(t.chain), out);
  return kOk;
}

int cmd_collapse(const std::string& input, const std::string& b_arg, const Output& o, std::ostream& out) {
  const ChainModel chain = io::load_chain(input);
  const CollapsedChain c = collapse(chain, io::parse_set(chain.space(), b_arg));
  emit(o, "collapse", "yaml", io::emit_chain_spec(c.chain), out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  kernels::configure_threads_from_env();

  CLI::App app{"Potential theory and metastability for finite Markov chains", "metapot"};
  app.require_subcommand(1);

  std::string input, set_a, set_b, set_c, set_a0, set_a1, set_f, start, n_grid, trajectory;
  double tol_analyze = 1e-10, tol_saddle = 1e-8, tol_bd = 1e-9;
  double horizon = 0.0;
  std::int64_t samples = 10000;
  std::uint64_t seed = 1;
  Output output;

  auto* validate = app.add_subcommand("validate", "check a chain spec");
  validate->add_option("--input", input, "chain spec (YAML)")->required();

  auto* analyze = app.add_subcommand("analyze", "capacities, committors and identities for sets A, B[, C]");
  analyze->add_option("--input", input, "chain spec (YAML)")->required();
  analyze->add_option("--A", set_a, "comma-separated labels")->required();
  analyze->add_option("--B", set_b, "comma-separated labels")->required();
  analyze->add_option("--C", set_c, "comma-separated labels (three-set identity)");
  analyze->add_option("--tol", tol_analyze, "relative tolerance for identity checks")->capture_default_str();
  add_output(analyze, output);

  auto* saddle = app.add_subcommand("saddle", "solve the min-max Dirichlet problem");
  saddle->add_option("--input", input, "chain spec (YAML)")->required();
  saddle->add_option("--A0", set_a0, "comma-separated labels")->required();
  saddle->add_option("--A1", set_a1, "comma-separated labels")->required();
  saddle->add_option("--B", set_b, "comma-separated labels")->required();
  saddle->add_option("--tol", tol_saddle, "tolerance for the consistency checks")->capture_default_str();
  add_output(saddle, output);

  auto* bdcmd = app.add_subcommand("bd", "birth-death convergence table");
  bdcmd->add_option("--input", input, "birth-death config (YAML)")->required();
  bdcmd->add_option("--n-grid", n_grid, "comma-separated increasing sizes");
  bdcmd->add_option("--tol", tol_bd, "allowed discrepancy between the two rate routes")->capture_default_str();
  add_output(bdcmd, output);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates and trajectories");
  simulate->add_option("--input", input, "chain spec (YAML)")->required();
  simulate->add_option("--start", start, "start label")->required();
  simulate->add_option("--A", set_a, "estimate P[H_A < H_B] instead of E[H_B]");
  simulate->add_option("--B", set_b, "target set");
  simulate->add_option("--horizon", horizon, "fixed horizon for --trajectory when no --B is given");
  simulate->add_option("--n", samples, "number of samples")->default_val(10000);
  simulate->add_option("--seed", seed, "random seed")->default_val(1);
  simulate->add_option("--trajectory", trajectory, "write one trajectory as CSV");
  add_output(simulate, output);

  auto* tracecmd = app.add_subcommand("trace", "emit the trace chain on F as a chain spec");
  tracecmd->add_option("--input", input, "chain spec (YAML)")->required();
  tracecmd->add_option("--F", set_f, "comma-separated labels")->required();
  tracecmd->add_option("--out", output.dir, "output directory (stdout when omitted)");

  auto* collapsecmd = app.add_subcommand("collapse", "emit the chain with B collapsed as a chain spec");
  collapsecmd->add_option("--input", input, "chain spec (YAML)")->required();
  collapsecmd->add_option("--B", set_b, "comma-separated labels")->required();
  collapsecmd->add_option("--out", output.dir, "output directory (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(input, out);
    if (*analyze) return cmd_analyze(input, set_a, set_b, set_c, tol_analyze, output, out, err);
    if (*saddle) return cmd_saddle(input, set_a0, set_a1, set_b, tol_saddle, output, out, err);
    if (*bdcmd) return cmd_bd(input, n_grid, tol_bd, output, out, err);
    if (*simulate) return cmd_simulate(input, start, set_a, set_b, horizon, samples, seed, trajectory, output, out);
    if (*tracecmd) return cmd_trace(input, set_f, output, out);
    if (*collapsecmd) return cmd_collapse(input, set_b, output, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';  // what() starts with the code
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace metapot::cli
