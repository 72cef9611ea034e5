#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/engine.hpp"
#include "rdsim/graph.hpp"
#include "rdsim/reaction.hpp"

namespace rdsim {

struct ScenarioError {
  int line = 0;
  std::string message;
};

struct FamilyParams {
  double a = 1.0, b = 1.0;
  int kappa = 1, ell = 1;
  std::int64_t n = 10;
  friend bool operator==(const FamilyParams&, const FamilyParams&) = default;
};

// Fully validated description of a run, parsed from the bracketed key=value
// scenario format.
struct Scenario {
  // [graph]
  std::string graph_preset = "self_loop";  // self_loop | finite_path(n) |
                                           // finite_complete(n) | torus(n,d) | zd_nn(d)
  std::string alpha_preset = "uniform";    // uniform | exp(beta) | table(path)
  std::optional<double> c_constant;        // override; default preset-derived
  double window_radius = 8.0;              // verification window B(r)

  // [reaction] -- either the scaling family or an explicit rate table
  std::optional<FamilyParams> family;
  std::string f_table_path;  // "k f+ f-" rows

  // [initial]
  std::string initial = "delta(0)";  // delta(site) | constant(c) | file(path)
  std::string initial_b;             // second flow for coupled tests
  double initial_radius = 4.0;       // ball truncation for profiles

  // [engine]
  std::string mode = "coupled";  // coupled | independent
  double t_end = 1.0;
  std::vector<double> sample_times{0.25, 0.5, 0.75, 1.0};
  std::optional<std::int64_t> truncation_m;
  std::vector<std::int64_t> m_list;  // truncation ladder
  std::uint64_t event_cap = 100'000'000;

  // [sde]
  double sde_dt = 1e-3;
  std::uint64_t sde_replicas = 1000;

  // [fluid]
  std::vector<std::int64_t> n_list;

  // [thermo]
  std::vector<double> r_list;
  std::vector<double> escape_R;

  // [dynkin]
  std::vector<SiteId> dynkin_sites;                     // coordinate functions
  std::vector<std::pair<SiteId, SiteId>> dynkin_pairs;  // product functions

  // [run]
  std::optional<std::uint64_t> seed;  // required
  std::uint64_t replicas = 10'000;
  int threads = 1;
  std::vector<std::string> tests;  // subset run by `all`

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Parses and validates; on failure returns errors with line numbers and the
// violated condition named.
bool parse_scenario(const std::string& text, Scenario& out, std::vector<ScenarioError>& errors);

// Canonical text form; parse(serialize(s)) == s.
std::string serialize_scenario(const Scenario& s);

// FNV-1a over the canonical serialization.
std::uint64_t scenario_hash(const Scenario& s);

// Materialization. These throw std::runtime_error on semantic problems that
// validation could not see (e.g. missing table file).
GraphKernel build_graph(const Scenario& s);
std::unique_ptr<Reaction> build_reaction(const Scenario& s);
Configuration build_initial(const std::string& initial_spec, double radius,
                            const GraphKernel& g);
EngineConfig build_engine_config(const Scenario& s);

// Validates an explicit rate table, naming the violated condition.
std::unique_ptr<Reaction> load_reaction_table(const std::string& path);

}  // namespace rdsim
