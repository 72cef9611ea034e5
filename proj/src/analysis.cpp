#include "rdsim/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace rdsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
  // replica order is fixed, so this reduction is thread-count independent
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double se = v.size() > 1 ? std::sqrt(ss / (n * (n - 1.0))) : 0.0;
  return {mean, se};
}

MeanSe tail_fraction(std::span<const double> v, double level) {
  const double n = static_cast<double>(v.size());
  double hits = 0.0;
  for (double x : v)
    if (x > level) hits += 1.0;
  const double p = hits / n;
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / n)};
}

// Per-flow site deltas of one applied effect: at most two.
struct SiteDelta {
  SiteId s{};
  std::int64_t d = 0;
};

int effect_deltas(const Mark& mk, Effect e, std::array<SiteDelta, 2>& out) {
  switch (e) {
    case Effect::none:
    case Effect::blocked_birth:
      return 0;
    case Effect::applied:
      switch (mk.kind) {
        case MarkKind::birth:
          out[0] = {mk.site, +1};
          return 1;
        case MarkKind::death:
          out[0] = {mk.site, -1};
          return 1;
        case MarkKind::jump:
          if (mk.target == mk.site) return 0;
          out[0] = {mk.site, -1};
          out[1] = {mk.target, +1};
          return 2;
      }
      return 0;
    case Effect::jump_killed:
      out[0] = {mk.site, -1};
      return 1;
  }
  return 0;
}

}  // namespace

void StatReport::finish() {
  verdict = Verdict::pass;
  for (const CheckRow& r : rows)
    if (!r.pass) {
      verdict = Verdict::fail;
      return;
    }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

void write_csv(const StatReport& report, std::ostream& os) {
  os << "statistic,checkpoint,estimate,se,bound,verdict\n";
  char buf[256];
  for (const CheckRow& r : report.rows) {
    os << r.statistic << ',' << r.checkpoint << ',';
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,", r.estimate, r.se);
    os << buf;
    if (std::isnan(r.bound)) {
      os << ',';
    } else {
      std::snprintf(buf, sizeof buf, "%.12g,", r.bound);
      os << buf;
    }
    os << (r.pass ? "pass" : "fail") << '\n';
  }
}

void parallel_replicas(std::uint64_t count, int threads,
                       const std::function<void(std::uint64_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::uint64_t r = 0; r < count; ++r) fn(r);
    return;
  }
  const auto n_threads =
      static_cast<unsigned>(std::min<std::uint64_t>(static_cast<std::uint64_t>(threads), count));
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned i = 0; i < n_threads; ++i) {
    pool.emplace_back([&] {
      while (true) {
        const std::uint64_t r = next.fetch_add(1);
        if (r >= count) break;
        try {
          fn(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

PairPathStats pair_path_stats(const MultiFlowResult& run, std::size_t flow_a,
                              std::size_t flow_b, const Configuration& init_a,
                              const Configuration& init_b, const GraphKernel& g,
                              std::span<const double> times) {
  Configuration a = init_a;
  Configuration b = init_b;
  double dist = alpha_distance(a, b, g);

  PairPathStats out;
  out.sup_dist = dist;
  std::size_t cursor = 0;
  const auto flush_below = [&](double limit) {
    while (cursor < times.size() && times[cursor] < limit) {
      out.dist_at_times.push_back(dist);
      ++cursor;
    }
  };

  std::array<SiteDelta, 2> da{}, db{};
  for (const EventEntry& ev : run.events) {
    flush_below(ev.t);
    const int na = effect_deltas(ev.mark, ev.effects[flow_a], da);
    const int nb = effect_deltas(ev.mark, ev.effects[flow_b], db);
    if (na == 0 && nb == 0) continue;
    // distance re-evaluated only at the touched sites
    const SiteId touched[2] = {ev.mark.site, ev.mark.target};
    const int n_touched = (ev.mark.kind == MarkKind::jump && ev.mark.target != ev.mark.site) ? 2 : 1;
    for (int i = 0; i < n_touched; ++i)
      dist -= g.alpha(touched[i]) *
              std::abs(static_cast<double>(a.at(touched[i]) - b.at(touched[i])));
    for (int i = 0; i < na; ++i) a.add(da[static_cast<std::size_t>(i)].s, da[static_cast<std::size_t>(i)].d);
    for (int i = 0; i < nb; ++i) b.add(db[static_cast<std::size_t>(i)].s, db[static_cast<std::size_t>(i)].d);
    for (int i = 0; i < n_touched; ++i)
      dist += g.alpha(touched[i]) *
              std::abs(static_cast<double>(a.at(touched[i]) - b.at(touched[i])));
    out.sup_dist = std::max(out.sup_dist, dist);
  }
  flush_below(std::numeric_limits<double>::infinity());
  return out;
}

NormPathStats norm_path_stats(const MultiFlowResult& run, std::size_t flow,
                              const Configuration& init, const GraphKernel& g,
                              std::span<const double> times,
                              std::span<const SiteId> inside_sorted) {
  Configuration state = init;
  double norm1 = static_cast<double>(one_norm(state));
  const auto outside = [&](const SiteId& s) {
    return !std::binary_search(inside_sorted.begin(), inside_sorted.end(), s);
  };
  double out_norm = 0.0;
  for (const auto& [s, k] : state.sites())
    if (outside(s)) out_norm += g.alpha(s) * static_cast<double>(k);

  NormPathStats out;
  out.sup_one_norm = norm1;
  out.sup_outside_norm = out_norm;
  std::size_t cursor = 0;
  const auto flush_below = [&](double limit) {
    while (cursor < times.size() && times[cursor] < limit) {
      out.one_norm_at_times.push_back(norm1);
      out.outside_norm_at_times.push_back(out_norm);
      ++cursor;
    }
  };

  std::array<SiteDelta, 2> dd{};
  for (const EventEntry& ev : run.events) {
    flush_below(ev.t);
    const int nd = effect_deltas(ev.mark, ev.effects[flow], dd);
    for (int i = 0; i < nd; ++i) {
      const auto& [s, d] = dd[static_cast<std::size_t>(i)];
      state.add(s, d);
      norm1 += static_cast<double>(d);
      if (outside(s)) out_norm += g.alpha(s) * static_cast<double>(d);
    }
    out.sup_one_norm = std::max(out.sup_one_norm, norm1);
    out.sup_outside_norm = std::max(out.sup_outside_norm, out_norm);
  }
  flush_below(std::numeric_limits<double>::infinity());
  return out;
}

namespace {

void require_times(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("analysis: no checkpoints");
  double prev = 0.0;
  for (double t : times) {
    if (t < prev) throw std::invalid_argument("analysis: checkpoints must be ascending");
    prev = t;
  }
}

// rows shared by the two supermartingale tests
void add_monotone_rows(StatReport& rep, const std::string& stat,
                       std::span<const double> times,
                       const std::vector<std::vector<double>>& values,
                       std::uint64_t replicas) {
  std::vector<double> diff(replicas);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    for (std::uint64_t r = 0; r < replicas; ++r) diff[r] = values[k + 1][r] - values[k][r];
    const MeanSe d = mean_se(diff);
    CheckRow row;
    row.statistic = stat;
    row.checkpoint = "t=" + fmt("%.6g", times[k]) + "->" + fmt("%.6g", times[k + 1]);
    row.estimate = d.mean;
    row.se = d.se;
    row.bound = 0.0;
    row.pass = d.mean <= 3.0 * d.se;
    rep.rows.push_back(row);
  }
}

void add_oracle_rows(StatReport& rep, const std::string& stat, std::span<const double> times,
                     const std::vector<std::vector<double>>& values,
                     const std::vector<std::pair<double, double>>& oracle) {
  for (const auto& [t, expected] : oracle) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (std::abs(times[k] - t) > 1e-12) continue;
      const MeanSe m = mean_se(values[k]);
      CheckRow row;
      row.statistic = stat;
      row.checkpoint = "t=" + fmt("%.6g", t);
      row.estimate = m.mean;
      row.se = m.se;
      row.bound = expected;
      row.pass = std::abs(m.mean - expected) <= 3.0 * m.se;
      rep.rows.push_back(row);
    }
  }
}

void add_tail_rows(StatReport& rep, const std::string& stat, std::span<const double> sup,
                   double bound_numerator, std::span<const double> levels) {
  for (double A : levels) {
    if (!(A > 0.0)) continue;
    const MeanSe p = tail_fraction(sup, A);
    CheckRow row;
    row.statistic = stat;
    row.checkpoint = "A=" + fmt("%.6g", A);
    row.estimate = p.mean;
    row.se = p.se;
    row.bound = std::min(1.0, bound_numerator / A);
    row.pass = p.mean <= row.bound + 3.0 * p.se;
    rep.rows.push_back(row);
  }
}

}  // namespace

StatReport distance_supermartingale_test(const Configuration& eta, const Configuration& etab,
                                         const Reaction& fam, const GraphKernel& g,
                                         std::span<const double> times, std::uint64_t replicas,
                                         const AnalysisOptions& opt) {
  require_times(times);
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  const double T = times.back();
  const double c1 = g.c_constant() + 1.0;
  const double d0 = alpha_distance(eta, etab, g);

  std::vector<std::vector<double>> disc(times.size(), std::vector<double>(replicas));
  std::vector<double> sup(replicas);

  parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
    EngineConfig cfg;
    cfg.mode = Mode::coupled;
    cfg.t_end = T;
    cfg.record_events = true;
    cfg.event_cap = opt.event_cap;
    const MultiFlowResult run =
        run_flows({{eta, &fam, std::nullopt}, {etab, &fam, std::nullopt}}, g, cfg,
                  EventStream{opt.master_seed, r});
    const PairPathStats st = pair_path_stats(run, 0, 1, eta, etab, g, times);
    for (std::size_t k = 0; k < times.size(); ++k)
      disc[k][r] = std::exp(-c1 * times[k]) * st.dist_at_times[k];
    sup[r] = st.sup_dist;
  });

  StatReport rep;
  rep.name = "distance_supermartingale";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const MeanSe m = mean_se(disc[k]);
    rep.rows.push_back({"discounted_distance_mean", "t=" + fmt("%.6g", times[k]), m.mean, m.se,
                        kNaN, true});
  }
  add_monotone_rows(rep, "discounted_distance_decrease", times, disc, replicas);
  add_oracle_rows(rep, "discounted_distance_oracle", times, disc, opt.mean_oracle);
  if (d0 > 0.0) {
    const double scale = d0 * std::exp(c1 * T);
    const double levels[] = {scale, 2.0 * scale, 4.0 * scale, 8.0 * scale};
    add_tail_rows(rep, "sup_distance_tail", sup, scale, levels);
  }
  rep.finish();
  return rep;
}

StatReport one_norm_supermartingale_test(const Configuration& eta, const Reaction& fam,
                                         const GraphKernel& g, std::span<const double> times,
                                         std::uint64_t replicas, const AnalysisOptions& opt) {
  require_times(times);
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  const double T = times.back();
  const double norm0 = static_cast<double>(one_norm(eta));

  std::vector<std::vector<double>> norm(times.size(), std::vector<double>(replicas));
  std::vector<double> sup(replicas);

  parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
    EngineConfig cfg;
    cfg.mode = Mode::coupled;
    cfg.t_end = T;
    cfg.record_events = true;
    cfg.event_cap = opt.event_cap;
    const MultiFlowResult run =
        run_flows({{eta, &fam, std::nullopt}}, g, cfg, EventStream{opt.master_seed, r});
    const NormPathStats st = norm_path_stats(run, 0, eta, g, times, {});
    for (std::size_t k = 0; k < times.size(); ++k) norm[k][r] = st.one_norm_at_times[k];
    sup[r] = st.sup_one_norm;
  });

  StatReport rep;
  rep.name = "one_norm_supermartingale";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const MeanSe m = mean_se(norm[k]);
    rep.rows.push_back(
        {"one_norm_mean", "t=" + fmt("%.6g", times[k]), m.mean, m.se, kNaN, true});
  }
  add_monotone_rows(rep, "one_norm_decrease", times, norm, replicas);
  add_oracle_rows(rep, "one_norm_oracle", times, norm, opt.mean_oracle);
  if (norm0 > 0.0) {
    const double levels[] = {norm0, 2.0 * norm0, 4.0 * norm0, 8.0 * norm0};
    add_tail_rows(rep, "sup_one_norm_tail", sup, norm0, levels);
  }
  rep.finish();
  return rep;
}

namespace {

Configuration profile_on(const CountProfile& profile, std::span<const SiteId> sites) {
  Configuration c;
  for (const SiteId& s : sites) {
    const std::int64_t k = profile(s);
    if (k < 0) throw std::invalid_argument("analysis: profile produced a negative count");
    if (k > 0) c.set(s, k);
  }
  return c;
}

struct BallRun {
  std::vector<std::vector<SiteId>> balls;   // per radius, sorted
  std::vector<Configuration> initials;      // per radius
  std::vector<double> d0_to_ref;            // scaled initial distance to the reference
  std::vector<double> d0_consecutive;       // scaled distance between consecutive levels
};

BallRun prepare_ball_run(const BallTestSpec& spec, const ScalingFamily& fam,
                         const GraphKernel& g) {
  if (spec.r_list.size() < 2)
    throw std::invalid_argument("analysis: need at least two radii");
  if (!std::is_sorted(spec.r_list.begin(), spec.r_list.end()))
    throw std::invalid_argument("analysis: radii must be ascending");
  BallRun run;
  const double n = static_cast<double>(fam.n());
  for (double r : spec.r_list) {
    run.balls.push_back(g.alpha_ball(r));
    run.initials.push_back(profile_on(spec.profile, run.balls.back()));
  }
  const Configuration& ref = run.initials.back();
  for (std::size_t i = 0; i < run.initials.size(); ++i)
    run.d0_to_ref.push_back(alpha_distance(run.initials[i], ref, g) / n);
  for (std::size_t i = 0; i + 1 < run.initials.size(); ++i)
    run.d0_consecutive.push_back(alpha_distance(run.initials[i], run.initials[i + 1], g) / n);
  return run;
}

}  // namespace

StatReport ball_truncation_test(const BallTestSpec& spec, const ScalingFamily& fam,
                                const GraphKernel& g, std::uint64_t replicas,
                                const AnalysisOptions& opt) {
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  const BallRun setup = prepare_ball_run(spec, fam, g);
  const std::size_t n_levels = setup.initials.size();
  const std::size_t ref = n_levels - 1;
  const double n = static_cast<double>(fam.n());
  const double c1 = g.c_constant() + 1.0;
  const double growth = std::exp(c1 * spec.t_end);

  std::vector<std::vector<double>> sup_to_ref(n_levels - 1, std::vector<double>(replicas));
  std::vector<std::vector<double>> sup_escape(spec.escape_R.size(),
                                              std::vector<double>(replicas));
  std::vector<std::vector<SiteId>> escape_balls;
  for (double R : spec.escape_R) escape_balls.push_back(g.alpha_ball(R));

  parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
    EngineConfig cfg;
    cfg.mode = Mode::coupled;
    cfg.t_end = spec.t_end;
    cfg.record_events = true;
    cfg.event_cap = opt.event_cap;
    std::vector<FlowSpec> flows;
    for (const Configuration& c : setup.initials) flows.push_back({c, &fam, std::nullopt});
    const MultiFlowResult run = run_flows(flows, g, cfg, EventStream{opt.master_seed, r});
    for (std::size_t i = 0; i + 1 < n_levels; ++i) {
      const PairPathStats st =
          pair_path_stats(run, i, ref, setup.initials[i], setup.initials[ref], g, {});
      sup_to_ref[i][r] = st.sup_dist / n;
    }
    for (std::size_t j = 0; j < spec.escape_R.size(); ++j) {
      const NormPathStats st =
          norm_path_stats(run, ref, setup.initials[ref], g, {}, escape_balls[j]);
      sup_escape[j][r] = st.sup_outside_norm / n;
    }
  });

  StatReport rep;
  rep.name = "ball_truncation";
  for (std::size_t i = 0; i + 1 < n_levels; ++i) {
    const double d0 = setup.d0_to_ref[i];
    if (d0 <= 0.0) {  // ball already covers the reference support: exact zero
      const MeanSe m = mean_se(sup_to_ref[i]);
      rep.rows.push_back({"ball_difference_zero", "r=" + fmt("%.6g", spec.r_list[i]), m.mean,
                          m.se, 0.0, m.mean == 0.0});
      continue;
    }
    std::vector<double> levels = spec.epsilon_grid;
    if (levels.empty()) levels = {2.0 * growth * d0, 4.0 * growth * d0};
    for (double eps : levels) {
      const MeanSe p = tail_fraction(sup_to_ref[i], eps);
      CheckRow row;
      row.statistic = "ball_difference_tail";
      row.checkpoint = "r=" + fmt("%.6g", spec.r_list[i]) + ",eps=" + fmt("%.6g", eps);
      row.estimate = p.mean;
      row.se = p.se;
      row.bound = std::min(1.0, growth * d0 / eps);
      row.pass = p.mean <= row.bound + 3.0 * p.se;
      rep.rows.push_back(row);
    }
  }
  const double mass0 = one_norm(ScaledConfiguration{setup.initials[ref], fam.n()});
  for (std::size_t j = 0; j < spec.escape_R.size(); ++j) {
    const double R = spec.escape_R[j];
    const double levels[] = {2.0 * mass0 / R, 4.0 * mass0 / R};
    for (double eps : levels) {
      const MeanSe p = tail_fraction(sup_escape[j], eps);
      CheckRow row;
      row.statistic = "escape_tail";
      row.checkpoint = "R=" + fmt("%.6g", R) + ",eps=" + fmt("%.6g", eps);
      row.estimate = p.mean;
      row.se = p.se;
      row.bound = std::min(1.0, mass0 / (R * eps));
      row.pass = p.mean <= row.bound + 3.0 * p.se;
      rep.rows.push_back(row);
    }
  }
  rep.finish();
  return rep;
}

StatReport thermodynamic_limit_test(const BallTestSpec& spec, const ScalingFamily& fam,
                                    const GraphKernel& g, std::uint64_t replicas,
                                    const AnalysisOptions& opt) {
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  const BallRun setup = prepare_ball_run(spec, fam, g);
  const std::size_t n_levels = setup.initials.size();
  const double n = static_cast<double>(fam.n());
  const double c1 = g.c_constant() + 1.0;
  const double growth = std::exp(c1 * spec.t_end);

  std::vector<std::vector<double>> sup_pair(n_levels - 1, std::vector<double>(replicas));

  parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
    EngineConfig cfg;
    cfg.mode = Mode::coupled;
    cfg.t_end = spec.t_end;
    cfg.record_events = true;
    cfg.event_cap = opt.event_cap;
    std::vector<FlowSpec> flows;
    for (const Configuration& c : setup.initials) flows.push_back({c, &fam, std::nullopt});
    const MultiFlowResult run = run_flows(flows, g, cfg, EventStream{opt.master_seed, r});
    for (std::size_t i = 0; i + 1 < n_levels; ++i) {
      const PairPathStats st =
          pair_path_stats(run, i, i + 1, setup.initials[i], setup.initials[i + 1], g, {});
      sup_pair[i][r] = st.sup_dist / n;
    }
  });

  StatReport rep;
  rep.name = "thermodynamic_limit";
  std::vector<MeanSe> means(n_levels - 1);
  for (std::size_t i = 0; i + 1 < n_levels; ++i) {
    means[i] = mean_se(sup_pair[i]);
    rep.rows.push_back({"consecutive_sup_distance",
                        "r=" + fmt("%.6g", spec.r_list[i]) + "->" +
                            fmt("%.6g", spec.r_list[i + 1]),
                        means[i].mean, means[i].se, kNaN, true});
  }
  // means decrease along the ladder (paired on the shared replicas)
  std::vector<double> diff(replicas);
  for (std::size_t i = 0; i + 2 < n_levels; ++i) {
    for (std::uint64_t r = 0; r < replicas; ++r) diff[r] = sup_pair[i + 1][r] - sup_pair[i][r];
    const MeanSe d = mean_se(diff);
    rep.rows.push_back({"consecutive_sup_decrease",
                        "step=" + std::to_string(i) + "->" + std::to_string(i + 1), d.mean,
                        d.se, 0.0, d.mean <= 3.0 * d.se});
  }
  // tails against the geometric bound
  for (std::size_t i = 0; i + 1 < n_levels; ++i) {
    const double d0 = setup.d0_consecutive[i];
    if (d0 <= 0.0) continue;
    std::vector<double> levels = spec.epsilon_grid;
    if (levels.empty()) levels = {2.0 * growth * d0, 4.0 * growth * d0};
    for (double eps : levels) {
      const MeanSe p = tail_fraction(sup_pair[i], eps);
      CheckRow row;
      row.statistic = "consecutive_tail";
      row.checkpoint = "r=" + fmt("%.6g", spec.r_list[i]) + ",eps=" + fmt("%.6g", eps);
      row.estimate = p.mean;
      row.se = p.se;
      row.bound = std::min(1.0, growth * d0 / eps);
      row.pass = p.mean <= row.bound + 3.0 * p.se;
      rep.rows.push_back(row);
    }
  }
  rep.finish();
  return rep;
}

StatReport dynkin_residual_test(const LocalFunction& f, const Configuration& eta,
                                const Reaction& fam, const GraphKernel& g,
                                const DynkinSpec& spec, std::uint64_t replicas,
                                const AnalysisOptions& opt) {
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  if (!(spec.t > 0.0)) throw std::invalid_argument("analysis: dynkin horizon must be positive");
  const double T = spec.t;
  const double h = spec.derivative_h;
  if (!(h > 0.0) || h > T)
    throw std::invalid_argument("analysis: derivative window must lie in (0, t]");

  const double f0 = f(eta);
  const double lf0 = generator_L(f, eta, fam, g);

  std::vector<double> residual(replicas), var_gap(replicas), f_at_h(replicas);

  parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
    EngineConfig cfg;
    cfg.mode = Mode::coupled;
    cfg.t_end = T;
    cfg.record_events = true;
    cfg.event_cap = opt.event_cap;
    const MultiFlowResult run =
        run_flows({{eta, &fam, std::nullopt}}, g, cfg, EventStream{opt.master_seed, r});

    // exact integrals along the piecewise-constant path
    Configuration state = eta;
    double t_prev = 0.0;
    double int_l = 0.0, int_q = 0.0;
    double fh = f0;
    std::array<SiteDelta, 2> dd{};
    for (const EventEntry& ev : run.events) {
      const double dt = ev.t - t_prev;
      if (dt > 0.0) {
        int_l += generator_L(f, state, fam, g) * dt;
        int_q += quadratic_Q(f, state, fam, g) * dt;
      }
      if (t_prev <= h && h < ev.t) fh = f(state);
      const int nd = effect_deltas(ev.mark, ev.effects[0], dd);
      for (int i = 0; i < nd; ++i)
        state.add(dd[static_cast<std::size_t>(i)].s, dd[static_cast<std::size_t>(i)].d);
      t_prev = ev.t;
    }
    if (T > t_prev) {
      int_l += generator_L(f, state, fam, g) * (T - t_prev);
      int_q += quadratic_Q(f, state, fam, g) * (T - t_prev);
    }
    if (h >= t_prev) fh = f(state);

    const double m = f(state) - f0 - int_l;
    residual[r] = m;
    var_gap[r] = m * m - int_q;
    f_at_h[r] = fh;
  });

  StatReport rep;
  rep.name = "dynkin_residual";
  {
    const MeanSe m = mean_se(residual);
    rep.rows.push_back({"residual_mean", "t=" + fmt("%.6g", T), m.mean, m.se, 0.0,
                        std::abs(m.mean) <= 3.0 * m.se});
  }
  {
    const MeanSe m = mean_se(var_gap);
    rep.rows.push_back({"variance_minus_quadratic", "t=" + fmt("%.6g", T), m.mean, m.se, 0.0,
                        std::abs(m.mean) <= 3.0 * m.se});
  }
  {
    const MeanSe m = mean_se(f_at_h);
    const double est = (m.mean - f0) / h;
    const double se = m.se / h;
    rep.rows.push_back({"short_time_derivative", "h=" + fmt("%.6g", h), est, se, lf0,
                        std::abs(est - lf0) <= 3.0 * se});
  }
  rep.finish();
  return rep;
}

StatReport fluid_limit_test(const FluidLimitSpec& spec, const GraphKernel& g,
                            std::uint64_t replicas, const AnalysisOptions& opt) {
  if (replicas == 0) throw std::invalid_argument("analysis: replicas must be positive");
  if (spec.n_list.empty()) throw std::invalid_argument("analysis: empty n list");
  if (!std::is_sorted(spec.n_list.begin(), spec.n_list.end()))
    throw std::invalid_argument("analysis: n list must be ascending");
  require_times(spec.times);
  if (spec.sites.empty()) throw std::invalid_argument("analysis: no moment sites");
  std::vector<SiteId> window = spec.window;
  std::sort(window.begin(), window.end());
  if (window.empty()) throw std::invalid_argument("analysis: empty window");

  const std::size_t n_cells = spec.times.size() * spec.sites.size();

  // Euler-Maruyama reference ensemble
  std::vector<MeanSe> em(n_cells, MeanSe{0.0, 0.0});
  bool have_em = spec.em_replicas > 0;
  if (have_em) {
    std::vector<double> zeta0(window.size(), 0.0);
    for (std::size_t i = 0; i < window.size(); ++i) {
      const auto it = spec.zeta_star0.find(window[i]);
      if (it != spec.zeta_star0.end()) zeta0[i] = it->second;
    }
    SdeConfig scfg;
    scfg.dt = spec.em_dt;
    scfg.t_end = spec.t_end;
    scfg.replicas = spec.em_replicas;
    scfg.sample_times = spec.times;
    const SdeEnsemble ens = euler_maruyama(zeta0, window, spec.a, spec.b, spec.kappa, spec.ell,
                                           g, scfg, EventStream{opt.master_seed, 0});
    const std::vector<MomentRow> rows = moment_profile(ens);
    for (std::size_t k = 0; k < spec.times.size(); ++k) {
      for (std::size_t s = 0; s < spec.sites.size(); ++s) {
        for (const MomentRow& row : rows) {
          if (row.site == spec.sites[s] && std::abs(row.t - spec.times[k]) < 1e-12) {
            em[k * spec.sites.size() + s] = {row.mean, row.se};
          }
        }
      }
    }
  }

  StatReport rep;
  rep.name = "fluid_limit";
  std::vector<double> metric_by_n;

  for (const std::int64_t n : spec.n_list) {
    // natural initial condition: floor(n zeta*)
    Configuration eta0;
    for (const auto& [s, z] : spec.zeta_star0) {
      const auto k = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * z + 1e-12));
      if (k > 0) eta0.set(s, k);
    }

    std::vector<std::vector<double>> cell_vals(n_cells, std::vector<double>(replicas));
    parallel_replicas(replicas, opt.threads, [&](std::uint64_t r) {
      EngineConfig cfg;
      cfg.mode = Mode::independent;
      cfg.t_end = spec.t_end;
      cfg.sample_times = spec.times;
      cfg.event_cap = opt.event_cap;
      ScalingFamily fam(spec.a, spec.b, spec.kappa, spec.ell, n);
      const MultiFlowResult run = run_flows({{eta0, &fam, std::nullopt}}, g, cfg,
                                            EventStream{opt.master_seed ^ rng::mix64(
                                                            static_cast<std::uint64_t>(n)),
                                                        r});
      const Trajectory& tr = run.flows[0];
      for (std::size_t k = 0; k < spec.times.size(); ++k)
        for (std::size_t s = 0; s < spec.sites.size(); ++s)
          cell_vals[k * spec.sites.size() + s][r] =
              static_cast<double>(tr.samples[k].second.at(spec.sites[s])) /
              static_cast<double>(n);
    });

    double metric = 0.0;
    for (std::size_t k = 0; k < spec.times.size(); ++k) {
      for (std::size_t s = 0; s < spec.sites.size(); ++s) {
        const std::size_t cell = k * spec.sites.size() + s;
        const MeanSe ips = mean_se(cell_vals[cell]);
        rep.rows.push_back({"ips_mean",
                            "n=" + std::to_string(n) + ",t=" + fmt("%.6g", spec.times[k]) +
                                ",site=" + format_site(spec.sites[s], g.dim()),
                            ips.mean, ips.se, kNaN, true});
        if (spec.mean_oracle) {
          const double expected = spec.mean_oracle(spec.times[k], spec.sites[s]);
          rep.rows.back().bound = expected;
          rep.rows.back().pass = std::abs(ips.mean - expected) <= 3.0 * ips.se;
          rep.rows.back().statistic = "ips_mean_vs_oracle";
        }
        if (have_em) {
          const MeanSe& ref = em[cell];
          const double combined = std::sqrt(ips.se * ips.se + ref.se * ref.se);
          const double gap = std::abs(ips.mean - ref.mean);
          const double cell_metric = combined > 0.0
                                         ? gap / (3.0 * combined)
                                         : (gap > 0.0 ? std::numeric_limits<double>::infinity()
                                                      : 0.0);
          metric = std::max(metric, cell_metric);
        }
      }
    }
    if (have_em) {
      metric_by_n.push_back(metric);
      const bool is_last = n == spec.n_list.back();
      rep.rows.push_back({"ips_vs_em_metric", "n=" + std::to_string(n), metric, 0.0, 1.0,
                          is_last ? metric <= 1.0 : true});
    }
  }

  for (std::size_t i = 0; i + 1 < metric_by_n.size(); ++i) {
    rep.rows.push_back({"ips_vs_em_metric_decrease",
                        "n=" + std::to_string(spec.n_list[i]) + "->" +
                            std::to_string(spec.n_list[i + 1]),
                        metric_by_n[i + 1] - metric_by_n[i], 0.0, 0.0,
                        metric_by_n[i + 1] <= metric_by_n[i]});
  }
  rep.finish();
  return rep;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return d;
}

}  // namespace rdsim
