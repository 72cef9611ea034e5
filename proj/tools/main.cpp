// Scenario-driven front end: one subcommand per verification family.
#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "rdsim/analysis.hpp"
#include "rdsim/engine.hpp"
#include "rdsim/generator.hpp"
#include "rdsim/scenario.hpp"
#include "rdsim/sde.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rdsim;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
  Scenario scenario;
  GraphKernel graph = GraphKernel::self_loop();
  std::unique_ptr<Reaction> reaction;
  const ScalingFamily* family = nullptr;  // non-null when the scenario uses one
  fs::path out_dir;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, Verdict>> verdicts;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_file(RunContext& ctx, const std::string& name, const std::string& content) {
  std::ofstream out(ctx.out_dir / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (ctx.out_dir / name).string());
  out << content;
  ctx.outputs.push_back(name);
}

void write_report(RunContext& ctx, const std::string& name, const StatReport& rep) {
  std::ostringstream os;
  write_csv(rep, os);
  write_file(ctx, name, os.str());
  ctx.verdicts.emplace_back(rep.name, rep.verdict);
}

AnalysisOptions analysis_options(const RunContext& ctx) {
  AnalysisOptions opt;
  opt.master_seed = *ctx.scenario.seed;
  opt.threads = ctx.scenario.threads;
  opt.event_cap = ctx.scenario.event_cap;
  return opt;
}

std::string trajectory_csv(const Trajectory& tr, int dim) {
  std::ostringstream os;
  os << "time,site,count\n";
  for (const auto& [t, state] : tr.samples)
    for (const auto& [s, k] : state.sites())
      os << fmt(t) << ',' << format_site(s, dim) << ',' << k << '\n';
  return os.str();
}

std::string events_csv(const std::vector<EventEntry>& events, std::size_t flow, int dim) {
  std::ostringstream os;
  os << "time,kind,source,target,accepted\n";
  for (const EventEntry& ev : events) {
    const char* kind = ev.mark.kind == MarkKind::birth   ? "birth"
                       : ev.mark.kind == MarkKind::death ? "death"
                                                         : "jump";
    os << fmt(ev.t) << ',' << kind << ',' << format_site(ev.mark.site, dim) << ','
       << format_site(ev.mark.target, dim) << ','
       << (ev.effects[flow] != Effect::none ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<double> checkpoints(const Scenario& s) {
  if (!s.sample_times.empty()) return s.sample_times;
  return {s.t_end / 2.0, s.t_end};
}

// ---- subcommands -----------------------------------------------------------

void cmd_simulate(RunContext& ctx) {
  EngineConfig cfg = build_engine_config(ctx.scenario);
  cfg.record_events = true;
  if (cfg.sample_times.empty()) cfg.sample_times = checkpoints(ctx.scenario);
  const Configuration eta =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  const Trajectory tr =
      run_flow(eta, *ctx.reaction, ctx.graph, cfg, EventStream{*ctx.scenario.seed, 0});
  write_file(ctx, "trajectory.csv", trajectory_csv(tr, ctx.graph.dim()));
  write_file(ctx, "events.csv", events_csv(tr.log, 0, ctx.graph.dim()));
  ctx.verdicts.emplace_back("simulate", Verdict::pass);
}

void cmd_couple(RunContext& ctx) {
  if (ctx.scenario.initial_b.empty())
    throw std::runtime_error("couple: scenario needs [initial] state_b");
  const Configuration eta =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  const Configuration etab =
      build_initial(ctx.scenario.initial_b, ctx.scenario.initial_radius, ctx.graph);
  EngineConfig cfg = build_engine_config(ctx.scenario);
  cfg.mode = Mode::coupled;
  cfg.sample_times = checkpoints(ctx.scenario);

  const bool a_below = leq(eta, etab);
  const bool ordered = a_below || leq(etab, eta);
  std::atomic<std::uint64_t> order_violations{0};
  std::vector<double> final_dist(ctx.scenario.replicas);
  const AnalysisOptions opt = analysis_options(ctx);
  parallel_replicas(ctx.scenario.replicas, ctx.scenario.threads, [&](std::uint64_t r) {
    const auto [a, b] = run_coupled_pair(eta, etab, *ctx.reaction, ctx.graph, cfg,
                                         EventStream{opt.master_seed, r});
    if (ordered) {
      for (std::size_t k = 0; k < a.samples.size(); ++k) {
        const bool ok = a_below ? leq(a.samples[k].second, b.samples[k].second)
                                : leq(b.samples[k].second, a.samples[k].second);
        if (!ok) order_violations.fetch_add(1);
      }
    }
    final_dist[r] = alpha_distance(a.final_state, b.final_state, ctx.graph);
  });

  StatReport rep;
  rep.name = "couple";
  if (ordered)
    rep.rows.push_back({"monotone_coupling_violations", "all",
                        static_cast<double>(order_violations.load()), 0.0, 0.0,
                        order_violations.load() == 0});
  double mean = 0.0;
  for (double d : final_dist) mean += d;
  mean /= static_cast<double>(ctx.scenario.replicas);
  rep.rows.push_back({"final_alpha_distance_mean", "t=" + fmt(ctx.scenario.t_end), mean, 0.0,
                      std::numeric_limits<double>::quiet_NaN(), true});
  rep.finish();
  write_report(ctx, "couple_report.csv", rep);
}

void cmd_truncate(RunContext& ctx) {
  if (ctx.scenario.m_list.empty())
    throw std::runtime_error("truncate: scenario needs [engine] m_list");
  const Configuration eta =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  EngineConfig cfg = build_engine_config(ctx.scenario);
  cfg.mode = Mode::coupled;
  cfg.sample_times = checkpoints(ctx.scenario);
  cfg.record_states = true;

  std::atomic<std::uint64_t> closure_violations{0}, order_violations{0};
  std::vector<double> stable_m(ctx.scenario.replicas, -1.0);
  const AnalysisOptions opt = analysis_options(ctx);
  parallel_replicas(ctx.scenario.replicas, ctx.scenario.threads, [&](std::uint64_t r) {
    const LadderResult lad = run_truncation_ladder(
        eta, *ctx.reaction, ctx.graph, cfg, ctx.scenario.m_list, EventStream{opt.master_seed, r});
    for (std::size_t i = 0; i < lad.m_list.size(); ++i)
      for (const Configuration& state : lad.truncated[i].states)
        for (const auto& [s, k] : state.sites())
          if (k > lad.m_list[i]) closure_violations.fetch_add(1);
    for (std::size_t i = 0; i + 1 < lad.m_list.size(); ++i)
      for (std::size_t k = 0; k < cfg.sample_times.size(); ++k)
        if (!leq(lad.truncated[i].samples[k].second, lad.truncated[i + 1].samples[k].second))
          order_violations.fetch_add(1);
    if (lad.smallest_stable_m) stable_m[r] = static_cast<double>(*lad.smallest_stable_m);
  });

  StatReport rep;
  rep.name = "truncate";
  rep.rows.push_back({"closure_violations", "all",
                      static_cast<double>(closure_violations.load()), 0.0, 0.0,
                      closure_violations.load() == 0});
  rep.rows.push_back({"m_monotonicity_violations", "all",
                      static_cast<double>(order_violations.load()), 0.0, 0.0,
                      order_violations.load() == 0});
  std::uint64_t stabilized = 0;
  for (double m : stable_m)
    if (m >= 0.0) ++stabilized;
  rep.rows.push_back({"ladder_stabilized_fraction", "all",
                      static_cast<double>(stabilized) / static_cast<double>(ctx.scenario.replicas),
                      0.0, std::numeric_limits<double>::quiet_NaN(), true});
  rep.finish();
  write_report(ctx, "truncate_report.csv", rep);
}

void cmd_gencheck(RunContext& ctx) {
  StatReport rep;
  rep.name = "gencheck";

  const std::vector<SiteId> window = ctx.graph.is_finite()
                                         ? ctx.graph.all_sites()
                                         : ctx.graph.alpha_ball(ctx.scenario.window_radius);
  if (window.empty()) throw std::runtime_error("gencheck: empty verification window");
  const auto loc = ctx.graph.verify_localization(window);
  rep.rows.push_back({"localization_c_estimate", "window", loc.c_estimate, 0.0,
                      ctx.graph.c_constant(), loc.pass});

  if (ctx.family != nullptr) {
    rng::Sequence seq(rng::derive(rng::Key{*ctx.scenario.seed, 0xC0FFEE}, 1));
    const auto rand_site = [&] {
      const auto idx =
          static_cast<std::size_t>(seq.uniform() * static_cast<double>(window.size()));
      return window[std::min(idx, window.size() - 1)];
    };
    double worst = 0.0;
    const double nd = static_cast<double>(ctx.family->n());
    for (int trial = 0; trial < 1000; ++trial) {
      ScaledConfiguration z{{}, ctx.family->n()};
      const int occupied = 1 + static_cast<int>(seq.uniform() * 3.0);
      for (int i = 0; i < occupied; ++i)
        z.base.set(rand_site(), 1 + static_cast<std::int64_t>(seq.uniform() * 12.0));
      const SiteId si = rand_site(), sj = rand_site();
      const auto rel = [](double x, double y) {
        return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
      };
      worst = std::max(worst, rel(coordinate_L_n(z, si, *ctx.family, ctx.graph),
                                  generator_L(coordinate_fn(si), z.base, *ctx.family, ctx.graph) /
                                      nd));
      worst = std::max(worst, rel(coordinate_Q_n(z, si, *ctx.family, ctx.graph),
                                  quadratic_Q(coordinate_fn(si), z.base, *ctx.family, ctx.graph) /
                                      (nd * nd)));
      worst = std::max(worst, rel(pair_L_n(z, si, sj, *ctx.family, ctx.graph),
                                  generator_L(product_fn(si, sj), z.base, *ctx.family, ctx.graph) /
                                      (nd * nd)));
    }
    rep.rows.push_back(
        {"closed_form_max_rel_err", "random_tuples", worst, 0.0, 1e-9, worst <= 1e-9});
  }

  {
    std::vector<SiteId> scan_sites(window.begin(),
                                   window.begin() + std::min<std::size_t>(3, window.size()));
    const std::int64_t m = 2;
    std::uint64_t violations = 0;
    const int n_sites = static_cast<int>(scan_sites.size());
    int total = 1;
    for (int i = 0; i < n_sites; ++i) total *= 3;
    for (int a = 0; a < total; ++a) {
      for (int b = 0; b < total; ++b) {
        Configuration eta, etab;
        int ra = a, rb = b;
        for (int i = 0; i < n_sites; ++i) {
          if (ra % 3 > 0) eta.set(scan_sites[static_cast<std::size_t>(i)], ra % 3);
          if (rb % 3 > 0) etab.set(scan_sites[static_cast<std::size_t>(i)], rb % 3);
          ra /= 3;
          rb /= 3;
        }
        if (!coupled_L_hat_m(eta, etab, m, *ctx.reaction, ctx.graph).pass) ++violations;
      }
    }
    rep.rows.push_back({"contraction_violations", "m=2", static_cast<double>(violations), 0.0,
                        0.0, violations == 0});
  }

  rep.finish();
  write_report(ctx, "gencheck.csv", rep);
}

void cmd_supermartingale(RunContext& ctx) {
  const std::vector<double> times = checkpoints(ctx.scenario);
  const Configuration eta =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  const AnalysisOptions opt = analysis_options(ctx);
  if (!ctx.scenario.initial_b.empty()) {
    const Configuration etab =
        build_initial(ctx.scenario.initial_b, ctx.scenario.initial_radius, ctx.graph);
    const StatReport rep = distance_supermartingale_test(eta, etab, *ctx.reaction, ctx.graph,
                                                         times, ctx.scenario.replicas, opt);
    write_report(ctx, "supermartingale_distance.csv", rep);
  }
  const StatReport one = one_norm_supermartingale_test(eta, *ctx.reaction, ctx.graph, times,
                                                       ctx.scenario.replicas, opt);
  write_report(ctx, "supermartingale_onenorm.csv", one);
}

void cmd_dynkin(RunContext& ctx) {
  const Configuration eta =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  DynkinSpec spec;
  spec.t = ctx.scenario.t_end;
  spec.derivative_h = std::min(0.02, ctx.scenario.t_end / 2.0);
  const AnalysisOptions opt = analysis_options(ctx);

  std::vector<std::pair<std::string, LocalFunction>> functions;
  for (const SiteId& s : ctx.scenario.dynkin_sites)
    functions.emplace_back("f_" + format_site(s, ctx.graph.dim()), coordinate_fn(s));
  for (const auto& [a, b] : ctx.scenario.dynkin_pairs)
    functions.emplace_back(
        "f_" + format_site(a, ctx.graph.dim()) + "*f_" + format_site(b, ctx.graph.dim()),
        product_fn(a, b));
  if (functions.empty()) functions.emplace_back("f_0", coordinate_fn(site(0)));

  StatReport combined;
  combined.name = "dynkin";
  for (const auto& [label, f] : functions) {
    const StatReport rep =
        dynkin_residual_test(f, eta, *ctx.reaction, ctx.graph, spec, ctx.scenario.replicas, opt);
    for (CheckRow row : rep.rows) {
      row.checkpoint = label + "," + row.checkpoint;
      combined.rows.push_back(row);
    }
  }
  combined.finish();
  write_report(ctx, "dynkin.csv", combined);
}

void cmd_fluidlimit(RunContext& ctx) {
  if (!ctx.family) throw std::runtime_error("fluidlimit: scenario needs a scaling family");
  if (ctx.scenario.n_list.empty())
    throw std::runtime_error("fluidlimit: scenario needs [fluid] n_list");

  FluidLimitSpec spec;
  spec.a = ctx.family->a();
  spec.b = ctx.family->b();
  spec.kappa = ctx.family->kappa();
  spec.ell = ctx.family->ell();
  spec.n_list = ctx.scenario.n_list;
  spec.t_end = ctx.scenario.t_end;
  spec.times = checkpoints(ctx.scenario);
  spec.window = ctx.graph.is_finite() ? ctx.graph.all_sites()
                                      : ctx.graph.alpha_ball(ctx.scenario.window_radius);
  const Configuration base =
      build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
  for (const auto& [s, k] : base.sites()) spec.zeta_star0[s] = static_cast<double>(k);
  if (spec.window.size() <= 16) {
    spec.sites = spec.window;
  } else {
    for (const auto& [s, v] : spec.zeta_star0) spec.sites.push_back(s);
  }
  spec.em_dt = ctx.scenario.sde_dt;
  spec.em_replicas = ctx.scenario.sde_replicas;

  const StatReport rep =
      fluid_limit_test(spec, ctx.graph, ctx.scenario.replicas, analysis_options(ctx));
  write_report(ctx, "fluidlimit.csv", rep);
}

void cmd_thermolimit(RunContext& ctx) {
  if (!ctx.family) throw std::runtime_error("thermolimit: scenario needs a scaling family");
  if (ctx.scenario.r_list.size() < 2)
    throw std::runtime_error("thermolimit: scenario needs [thermo] r_list with >= 2 radii");
  BallTestSpec spec;
  spec.t_end = ctx.scenario.t_end;
  spec.r_list = ctx.scenario.r_list;
  spec.escape_R = ctx.scenario.escape_R;

  // the initial state is a density profile; particle counts scale with n
  const std::int64_t n = ctx.family->n();
  if (ctx.scenario.initial.rfind("constant(", 0) == 0) {
    const auto open = ctx.scenario.initial.find('(');
    const std::int64_t density = std::stoll(
        ctx.scenario.initial.substr(open + 1, ctx.scenario.initial.size() - open - 2));
    spec.profile = [density, n](const SiteId&) { return density * n; };
  } else {
    const Configuration base =
        build_initial(ctx.scenario.initial, ctx.scenario.initial_radius, ctx.graph);
    spec.profile = [base, n](const SiteId& s) { return base.at(s) * n; };
  }

  const AnalysisOptions opt = analysis_options(ctx);
  const StatReport ball =
      ball_truncation_test(spec, *ctx.family, ctx.graph, ctx.scenario.replicas, opt);
  write_report(ctx, "ball_truncation.csv", ball);
  const StatReport thermo =
      thermodynamic_limit_test(spec, *ctx.family, ctx.graph, ctx.scenario.replicas, opt);
  write_report(ctx, "thermolimit.csv", thermo);
}

using CommandFn = void (*)(RunContext&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact reaction-diffusion particle simulator and verification harness"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;
  std::uint64_t replicas_override = 0;
  int threads_override = 0;

  const std::vector<std::pair<std::string, CommandFn>> commands = {
      {"simulate", cmd_simulate},
      {"couple", cmd_couple},
      {"truncate", cmd_truncate},
      {"gencheck", cmd_gencheck},
      {"supermartingale", cmd_supermartingale},
      {"dynkin", cmd_dynkin},
      {"fluidlimit", cmd_fluidlimit},
      {"thermolimit", cmd_thermolimit},
  };

  std::vector<CLI::App*> subs;
  for (const auto& [verb, fn] : commands) {
    (void)fn;
    subs.push_back(app.add_subcommand(verb));
  }
  CLI::App* all = app.add_subcommand("all", "run every test listed in the scenario");
  subs.push_back(all);

  for (CLI::App* sub : subs) {
    sub->add_option("--scenario", scenario_path, "scenario file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { have_seed_override = true; });
    sub->add_option("--replicas", replicas_override, "replica count override");
    sub->add_option("--threads", threads_override, "worker thread count override");
  }

  CLI11_PARSE(app, argc, argv);

  const auto wall_start = std::chrono::steady_clock::now();
  RunContext ctx;
  try {
    std::ifstream in(scenario_path);
    if (!in) {
      std::cerr << "cannot open scenario " << scenario_path << "\n";
      return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::vector<ScenarioError> errors;
    if (!parse_scenario(buffer.str(), ctx.scenario, errors)) {
      for (const auto& e : errors)
        std::cerr << scenario_path << ":" << e.line << ": " << e.message << "\n";
      return 2;
    }
    if (have_seed_override) ctx.scenario.seed = seed_override;
    if (replicas_override > 0) ctx.scenario.replicas = replicas_override;
    if (threads_override > 0) ctx.scenario.threads = threads_override;

    ctx.graph = build_graph(ctx.scenario);
    ctx.reaction = build_reaction(ctx.scenario);
    ctx.family = dynamic_cast<const ScalingFamily*>(ctx.reaction.get());
    ctx.out_dir = out_dir;
    fs::create_directories(ctx.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const auto run_one = [&](const std::string& verb) {
      for (const auto& [name, fn] : commands)
        if (name == verb) {
          fn(ctx);
          return;
        }
      throw std::runtime_error("unknown test '" + verb + "' in scenario tests list");
    };
    if (all->parsed()) {
      if (ctx.scenario.tests.empty())
        throw std::runtime_error("all: scenario lists no tests ([run] tests = ...)");
      for (const std::string& verb : ctx.scenario.tests) run_one(verb);
    } else {
      for (std::size_t i = 0; i < commands.size(); ++i)
        if (subs[i]->parsed()) run_one(commands[i].first);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  int exit_code = 0;
  for (const auto& [name, verdict] : ctx.verdicts)
    if (verdict != Verdict::pass) exit_code = 1;

  // metadata and machine-readable summary; wall time goes to stderr so that
  // reruns with the same seed are byte-identical
  try {
    json meta;
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(scenario_hash(ctx.scenario)));
    meta["seed"] = *ctx.scenario.seed;
    meta["scenario_hash"] = hash_hex;
    meta["version"] = kVersion;
    meta["outputs"] = ctx.outputs;
    write_file(ctx, "metadata.json", meta.dump(2) + "\n");

    json summary;
    summary["exit_code"] = exit_code;
    json reports = json::array();
    for (const auto& [name, verdict] : ctx.verdicts)
      reports.push_back({{"name", name}, {"verdict", to_string(verdict)}});
    summary["reports"] = reports;
    write_file(ctx, "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const auto wall_end = std::chrono::steady_clock::now();
  std::cerr << "wall time: "
            << std::chrono::duration_cast<std::chrono::milliseconds>(wall_end - wall_start)
                   .count()
            << " ms\n";
  for (const auto& [name, verdict] : ctx.verdicts)
    std::cout << name << ": " << to_string(verdict) << "\n";
  return exit_code;
}
