#pragma once

// Chain-spec and birth-death config files (YAML), JSON and CSV reports.

#include "metapot/birth_death.hpp"
#include "metapot/ctmc.hpp"
#include "metapot/metastability.hpp"
#include "metapot/potential.hpp"
#include "metapot/sim.hpp"
#include "metapot/variational.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace metapot::io {

// Chain spec:
//   states: [a, b, c]
//   rates:
//     - [a, b, 1.5]     # from, to, rate
//     - [b, a, 0.5]
struct ChainSpec {
  StateSpace space;
  RateMatrix rates;
};

/// Throws ParseError (with line and column) or UnknownLabel.
ChainSpec parse_chain_spec(const std::string& text);
ChainSpec load_chain_spec(const std::string& path);

/// Parses and builds the chain (throws InvalidGenerator on violations).
ChainModel load_chain(const std::string& path);

std::string emit_chain_spec(const ChainModel& chain);

struct BDFile {
  bd::Config config;
  std::vector<int> n_grid;
  std::string h_kind;
  std::string phi_kind;
};

BDFile parse_bd_config(const std::string& text);
BDFile load_bd_config(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Comma-separated labels to a state set. Throws UnknownLabel.
StateSet parse_set(const StateSpace& space, const std::string& csv);
std::vector<std::string> labels_of(const StateSpace& space, const StateSet& set);

nlohmann::json values_by_label(const StateSpace& space, const Vector& values);
nlohmann::json values_by_label(const StateSpace& space, const StateSet& set, const Vector& values);

nlohmann::json to_json(const StateSpace& space, const CapacityReport& report);
nlohmann::json to_json(const StateSpace& space, const SaddleSolution& solution);
nlohmann::json to_json(const sim::MCEstimate& estimate);
nlohmann::json to_json(const TunnelingReport& report);
nlohmann::json to_json(const bd::ConvergenceTable& table);

/// time,state rows, one per visit.
std::string trajectory_csv(const sim::Trajectory& traj, const StateSpace& space);

}  // namespace metapot::io
