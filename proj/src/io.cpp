#include "metapot/io.hpp"

#include "metapot/error.hpp"
#include "metapot/format.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace metapot::io {

namespace {

[[noreturn]] void parse_error(const YAML::Mark& mark, const std::string& what) {
  if (mark.is_null()) throw Error(ErrorCode::ParseError, what);
  throw Error(ErrorCode::ParseError,
              "line " + std::to_string(mark.line + 1) + ", column " + std::to_string(mark.column + 1) + ": " + what);
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    parse_error(e.mark, e.msg);
  }
}

YAML::Node require(const YAML::Node& parent, const char* key) {
  const YAML::Node n = parent[key];
  if (!n) parse_error(parent.Mark(), std::string("missing key '") + key + "'");
  return n;
}

template <typename T>
T scalar(const YAML::Node& n, const char* what) {
  if (!n.IsScalar()) parse_error(n.Mark(), std::string(what) + " must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    parse_error(n.Mark(), std::string("cannot read ") + what + " from '" + n.Scalar() + "'");
  }
}

double number(const YAML::Node& n, const char* what) {
  const double v = scalar<double>(n, what);
  if (!std::isfinite(v)) parse_error(n.Mark(), std::string(what) + " must be finite");
  return v;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << contents;
}

ChainSpec parse_chain_spec(const std::string& text) {
  const YAML::Node root = load_yaml(text);
  if (!root.IsMap()) parse_error(root.Mark(), "chain spec must be a mapping with 'states' and 'rates'");
  const YAML::Node states = require(root, "states");
  if (!states.IsSequence()) parse_error(states.Mark(), "'states' must be a list");
  std::vector<std::string> labels;
  for (const auto& s : states) labels.push_back(scalar<std::string>(s, "state label"));
  StateSpace space = [&] {
    try {
      return StateSpace(labels);
    } catch (const Error& e) {
      parse_error(states.Mark(), e.what());
    }
  }();

  const YAML::Node rates = require(root, "rates");
  if (!rates.IsSequence()) parse_error(rates.Mark(), "'rates' must be a list of [from, to, rate]");
  std::vector<RateEntry> entries;
  for (const auto& r : rates) {
    if (!r.IsSequence() || r.size() != 3) parse_error(r.Mark(), "rate entries are [from, to, rate]");
    const auto from = space.index_of(scalar<std::string>(r[0], "source label"));
    const auto to = space.index_of(scalar<std::string>(r[1], "target label"));
    entries.push_back({from, to, number(r[2], "rate")});
  }
  RateMatrix matrix(space.size(), entries);
  return ChainSpec{std::move(space), std::move(matrix)};
}

ChainSpec load_chain_spec(const std::string& path) { return parse_chain_spec(read_file(path)); }

ChainModel load_chain(const std::string& path) {
  ChainSpec spec = load_chain_spec(path);
  return ChainModel::create(std::move(spec.space), std::move(spec.rates));
}

std::string emit_chain_spec(const ChainModel& chain) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "states" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& l : chain.space().labels()) out << l;
  out << YAML::EndSeq;
  out << YAML::Key << "rates" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : chain.rates().entries()) {
    out << YAML::Flow << YAML::BeginSeq << chain.space().label(e.from) << chain.space().label(e.to) << e.rate
        << YAML::EndSeq;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

BDFile parse_bd_config(const std::string& text) {
  const YAML::Node root = load_yaml(text);
  if (!root.IsMap()) parse_error(root.Mark(), "birth-death config must be a mapping");
  BDFile file;
  bd::Config& c = file.config;

  const YAML::Node interval = require(root, "interval");
  if (!interval.IsSequence() || interval.size() != 2) parse_error(interval.Mark(), "'interval' must be [a, b]");
  c.a = number(interval[0], "a");
  c.b = number(interval[1], "b");

  const YAML::Node wells = require(root, "wells");
  if (!wells.IsSequence() || wells.size() == 0) parse_error(wells.Mark(), "'wells' must be a nonempty list");
  for (const auto& w : wells) {
    if (!w.IsMap()) parse_error(w.Mark(), "each well is {position, exponent[, radius]}");
    bd::WellSpec spec;
    spec.position = number(require(w, "position"), "position");
    spec.exponent = number(require(w, "exponent"), "exponent");
    spec.radius = w["radius"] ? number(w["radius"], "radius") : 0.0;
    c.wells.push_back(spec);
  }
  // default radius: half the distance to the nearest other well or endpoint
  for (std::size_t i = 0; i < c.wells.size(); ++i) {
    if (c.wells[i].radius > 0.0) continue;
    double gap = c.b - c.a;
    if (i > 0) gap = std::min(gap, c.wells[i].position - c.wells[i - 1].position);
    if (i + 1 < c.wells.size()) gap = std::min(gap, c.wells[i + 1].position - c.wells[i].position);
    c.wells[i].radius = 0.5 * gap;
  }

  const YAML::Node h = require(root, "H");
  file.h_kind = scalar<std::string>(require(h, "kind"), "H kind");
  if (file.h_kind != "piecewise-power") parse_error(h.Mark(), "unknown H kind '" + file.h_kind + "' (piecewise-power)");
  c.h = bd::piecewise_power(c.wells);

  const YAML::Node phi = require(root, "Phi");
  file.phi_kind = scalar<std::string>(require(phi, "kind"), "Phi kind");
  if (file.phi_kind == "constant") {
    c.phi = bd::constant_function(phi["value"] ? number(phi["value"], "Phi value") : 1.0);
  } else if (file.phi_kind == "polynomial") {
    const YAML::Node coef = require(phi, "coefficients");
    if (!coef.IsSequence() || coef.size() == 0) parse_error(coef.Mark(), "'coefficients' must be a nonempty list");
    std::vector<double> cs;
    for (const auto& v : coef) cs.push_back(number(v, "coefficient"));
    c.phi = bd::polynomial_function(std::move(cs));
  } else {
    parse_error(phi.Mark(), "unknown Phi kind '" + file.phi_kind + "' (constant, polynomial)");
  }

  if (const YAML::Node win = root["window"]) {
    const std::string kind = scalar<std::string>(require(win, "kind"), "window kind");
    if (kind == "fixed") {
      const long v = scalar<long>(require(win, "value"), "window value");
      c.window = [v](int) { return v; };
    } else if (kind == "power") {
      const double scale = win["scale"] ? number(win["scale"], "window scale") : 1.0;
      const double p = number(require(win, "exponent"), "window exponent");
      c.window = [scale, p](int n) { return static_cast<long>(std::floor(scale * std::pow(n, p))); };
    } else if (kind != "sqrt") {
      parse_error(win.Mark(), "unknown window kind '" + kind + "' (sqrt, fixed, power)");
    }
  }

  if (const YAML::Node grid = root["n_grid"]) {
    if (!grid.IsSequence()) parse_error(grid.Mark(), "'n_grid' must be a list");
    for (const auto& v : grid) file.n_grid.push_back(scalar<int>(v, "grid size"));
  } else {
    file.n_grid = {250, 500, 1000, 2000, 4000};
  }
  return file;
}

BDFile load_bd_config(const std::string& path) { return parse_bd_config(read_file(path)); }

StateSet parse_set(const StateSpace& space, const std::string& csv) {
  std::vector<std::string> labels;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) labels.push_back(item.substr(b, e - b + 1));
  }
  return space.resolve(labels);
}

std::vector<std::string> labels_of(const StateSpace& space, const StateSet& set) {
  std::vector<std::string> out;
  for (auto s : set) out.push_back(space.label(s));
  return out;
}

nlohmann::json values_by_label(const StateSpace& space, const Vector& values) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < space.size(); ++i) j[space.label(i)] = values[static_cast<Eigen::Index>(i)];
  return j;
}

nlohmann::json values_by_label(const StateSpace& space, const StateSet& set, const Vector& values) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < set.size(); ++i) j[space.label(set[i])] = values[static_cast<Eigen::Index>(i)];
  return j;
}

nlohmann::json to_json(const StateSpace& space, const CapacityReport& r) {
  return {{"A", labels_of(space, r.a)},
          {"B", labels_of(space, r.b)},
          {"capacity", r.value},
          {"adjoint_capacity", r.adjoint_value},
          {"escape_probabilities", values_by_label(space, r.a, r.escape_probs)},
          {"harmonic_measure", values_by_label(space, r.a, r.harmonic_measure)},
          {"adjoint_harmonic_measure", values_by_label(space, r.a, r.adjoint_harmonic_measure)}};
}

nlohmann::json to_json(const StateSpace& space, const SaddleSolution& s) {
  return {{"A0", labels_of(space, s.problem.a0)},
          {"A1", labels_of(space, s.problem.a1)},
          {"B", labels_of(space, s.problem.b)},
          {"value", s.value},
          {"kkt_residual", s.kkt_residual},
          {"h_on_B", s.h_on_b()},
          {"h_on_A1", s.h_on_a1()},
          {"f_opt", values_by_label(space, s.f)},
          {"h_opt", values_by_label(space, s.h)}};
}

nlohmann::json to_json(const sim::MCEstimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"n_samples", e.n_samples}, {"seed", e.seed}};
}

namespace {

nlohmann::json matrix_json(const DenseMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const TunnelingReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json exc = nlohmann::json::array();
    for (const auto& e : row.excursions) {
      exc.push_back({{"lhs_rate_integral", e.lhs_rate_integral}, {"lhs_occupation", e.lhs_occupation}, {"rhs", e.rhs}});
    }
    rows.push_back({{"n", row.n},
                    {"theta", row.theta},
                    {"scaled_rates", matrix_json(row.scaled_rates)},
                    {"mass", row.mass},
                    {"h1_ratio", row.h1},
                    {"h2_ratio", row.h2},
                    {"excursion_bounds", exc},
                    {"adjoint_residual", row.adjoint_residual}});
  }
  return {{"rows", rows}, {"limit_rates", matrix_json(report.limit_rates)}, {"limit_mass", report.limit_mass}};
}

nlohmann::json to_json(const bd::ConvergenceTable& t) {
  nlohmann::json limits = nlohmann::json::array();
  for (const auto& l : t.limits) limits.push_back({{"from", l.from + 1}, {"to", l.to + 1}, {"rate", l.value}});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"n", r.n},
                    {"ell", r.ell},
                    {"z_ratio", r.z_ratio},
                    {"scaled_rates", r.scaled_rates},
                    {"scaled_rates_trace", r.scaled_rates_trace},
                    {"route_discrepancy", r.route_discrepancy},
                    {"relative_error", r.relative_error},
                    {"h1_ratio", r.h1},
                    {"h2_ratio", r.h2}});
  }
  return {{"limits", limits}, {"z_limit", t.z_limit}, {"rows", rows}};
}

std::string trajectory_csv(const sim::Trajectory& traj, const StateSpace& space) {
  std::ostringstream os;
  os << "time,state\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double t = k == 0 ? 0.0 : traj.jump_times[k - 1];
    os << format_number(t) << ',' << space.label(traj.states[k]) << '\n';
  }
  os << format_number(traj.end_time) << ',' << space.label(traj.states.back()) << '\n';
  return os.str();
}

}  // namespace metapot::io
