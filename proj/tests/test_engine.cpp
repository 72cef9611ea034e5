#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdsim/analysis.hpp"
#include "rdsim/engine.hpp"

using namespace rdsim;

namespace {

Configuration delta(const SiteId& s, std::int64_t k = 1) {
  Configuration c;
  c.set(s, k);
  return c;
}

bool trajectories_equal(const Trajectory& a, const Trajectory& b) {
  if (a.event_count != b.event_count) return false;
  if (a.times != b.times) return false;
  if (!(a.final_state == b.final_state)) return false;
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i] != b.samples[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("transition operators") {
  const Configuration d0 = delta(site(0));
  CHECK(apply_transition(d0, birth_mark(site(0))) == delta(site(0), 2));
  CHECK(apply_transition(d0, death_mark(site(0))).empty());

  Configuration two = delta(site(0), 2);
  const Configuration moved = apply_transition(two, jump_mark(site(0), site(1)));
  CHECK(moved.at(site(0)) == 1);
  CHECK(moved.at(site(1)) == 1);

  CHECK_THROWS_AS(apply_transition(Configuration{}, death_mark(site(0))),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_transition(Configuration{}, jump_mark(site(0), site(1))),
                  std::invalid_argument);
}

TEST_CASE("truncated transition operators") {
  // birth into a site at the cap is dropped
  const Configuration full = delta(site(0), 3);
  CHECK(apply_transition_m(full, birth_mark(site(0)), 3) == full);

  // jump into a full site kills the moving particle
  Configuration c = delta(site(0), 3);
  c.set(site(1), 1);
  const Configuration killed = apply_transition_m(c, jump_mark(site(1), site(0)), 3);
  CHECK(killed == delta(site(0), 3));

  // below the cap the truncated operator acts as the plain one
  CHECK(apply_transition_m(delta(site(0)), birth_mark(site(0)), 3) == delta(site(0), 2));
}

TEST_CASE("total rate") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  CHECK(total_rate(Configuration{}, fam, g) == 0.0);
  CHECK(total_rate(delta(site(0)), fam, g) == doctest::Approx(11.0));

  const ScalingFamily diffusion(0.0, 0.0, 1, 1, 10);
  CHECK(total_rate(delta(site(0), 2), diffusion, g) == doctest::Approx(2.0));
}

TEST_CASE("empty initial condition is absorbing") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  EngineConfig cfg;
  cfg.t_end = 2.0;
  cfg.sample_times = {0.5, 1.0, 2.0};
  for (Mode mode : {Mode::coupled, Mode::independent}) {
    cfg.mode = mode;
    const Trajectory tr = run_flow(Configuration{}, fam, g, cfg, EventStream{1, 0});
    CHECK(tr.event_count == 0);
    for (const auto& [t, state] : tr.samples) CHECK(state.empty());
  }
}

TEST_CASE("zero state stays absorbing after extinction") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 50.0;  // extinction happens almost surely well before
  cfg.record_events = true;
  for (Mode mode : {Mode::coupled, Mode::independent}) {
    cfg.mode = mode;
    const Trajectory tr = run_flow(delta(site(0), 3), death, g, cfg, EventStream{3, 5});
    CHECK(tr.final_state.empty());
    CHECK(tr.event_count >= 3);  // at least the three deaths
  }
}

TEST_CASE("pure death hitting time is Exp(1) on average") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 40.0;
  cfg.record_events = true;

  const std::uint64_t reps = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    const Trajectory tr = run_flow(delta(site(0)), death, g, cfg, EventStream{77, r});
    REQUIRE(tr.times.size() == 1);
    sum += tr.times[0];
    sum2 += tr.times[0] * tr.times[0];
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("coupled and independent modes share one-dimensional marginals") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 40.0;
  cfg.record_events = true;

  const std::uint64_t reps = 10000;
  std::vector<double> coupled, independent;
  for (std::uint64_t r = 0; r < reps; ++r) {
    cfg.mode = Mode::coupled;
    coupled.push_back(run_flow(delta(site(0)), death, g, cfg, EventStream{5, r}).times.at(0));
    cfg.mode = Mode::independent;
    independent.push_back(
        run_flow(delta(site(0)), death, g, cfg, EventStream{6, r}).times.at(0));
  }
  // two-sample KS, 1% critical value 1.628 sqrt((n+m)/(nm))
  const double crit = 1.628 * std::sqrt(2.0 / static_cast<double>(reps));
  CHECK(ks_statistic(coupled, independent) < crit);
}

TEST_CASE("identical initial conditions give identical coupled trajectories") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 2, 10);
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.sample_times = {0.5, 1.0};
  cfg.record_events = true;
  const Configuration eta = delta(site(0), 3);
  const auto [a, b] = run_coupled_pair(eta, eta, fam, g, cfg, EventStream{11, 4});
  CHECK(trajectories_equal(a, b));
}

TEST_CASE("pathwise monotone coupling holds exactly") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.sample_times = {0.25, 0.5, 0.75, 1.0};

  Configuration lo = delta(site(0));
  Configuration hi = delta(site(0), 2);
  hi.add(site(1), 1);

  for (std::uint64_t r = 0; r < 300; ++r) {
    const auto [a, b] = run_coupled_pair(lo, hi, fam, g, cfg, EventStream{123, r});
    for (std::size_t k = 0; k < a.samples.size(); ++k)
      CHECK(leq(a.samples[k].second, b.samples[k].second));
    CHECK(leq(a.final_state, b.final_state));
  }
}

TEST_CASE("running a flow alone or inside a pair gives the same path") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.sample_times = {0.5, 1.0};
  cfg.record_events = true;

  const Configuration eta = delta(site(0), 2);
  Configuration etab = delta(site(0), 3);
  etab.add(site(2), 1);

  const EventStream stream{2024, 17};
  const Trajectory alone = run_flow(eta, fam, g, cfg, stream);
  const auto [in_pair, other] = run_coupled_pair(eta, etab, fam, g, cfg, stream);
  (void)other;
  CHECK(trajectories_equal(alone, in_pair));
}

TEST_CASE("jumps conserve total mass under pure diffusion") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily diffusion(0.0, 0.0, 1, 1, 10);
  EngineConfig cfg;
  cfg.t_end = 2.0;
  cfg.record_events = true;
  cfg.record_states = true;

  Configuration eta = delta(site(0), 3);
  eta.add(site(1), 2);
  const Trajectory tr = run_flow(eta, diffusion, g, cfg, EventStream{8, 2});
  CHECK(tr.event_count > 0);
  for (const Configuration& state : tr.states) CHECK(one_norm(state) == 5);

  // coupled pair under pure diffusion: the 1-norm difference is constant
  Configuration etab = eta;
  etab.add(site(0), 2);
  const auto [a, b] = run_coupled_pair(eta, etab, diffusion, g, cfg, EventStream{8, 3});
  CHECK(one_norm(b.final_state) - one_norm(a.final_state) == 2);
}

TEST_CASE("truncation ladder: closure, monotonicity, stabilization") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(2.0, 1.0, 1, 1, 6);
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.sample_times = {0.25, 0.5, 0.75, 1.0};
  cfg.record_states = true;

  const std::vector<std::int64_t> m_list{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20};
  const Configuration eta = delta(site(0));

  for (std::uint64_t r = 0; r < 100; ++r) {
    const LadderResult lad =
        run_truncation_ladder(eta, fam, g, cfg, m_list, EventStream{31, r});

    // closure: an m-truncated flow never exceeds m
    for (std::size_t i = 0; i < m_list.size(); ++i)
      for (const Configuration& state : lad.truncated[i].states)
        for (const auto& [s, k] : state.sites()) CHECK(k <= m_list[i]);

    // pathwise monotone in m at the sample times
    for (std::size_t i = 0; i + 1 < m_list.size(); ++i)
      for (std::size_t k = 0; k < cfg.sample_times.size(); ++k)
        CHECK(leq(lad.truncated[i].samples[k].second, lad.truncated[i + 1].samples[k].second));
    for (std::size_t k = 0; k < cfg.sample_times.size(); ++k)
      CHECK(leq(lad.truncated.back().samples[k].second, lad.untruncated.samples[k].second));

    // stabilization exactly at the maximal pathwise occupancy
    std::int64_t peak = 0;
    for (const Configuration& state : lad.untruncated.states)
      for (const auto& [s, k] : state.sites()) peak = std::max(peak, k);
    for (const auto& [s, k] : eta.sites()) peak = std::max(peak, k);
    REQUIRE(lad.smallest_stable_m.has_value());
    // smallest stable listed m is the first list entry >= peak
    std::int64_t expected = 0;
    for (std::int64_t m : m_list)
      if (m >= peak) {
        expected = m;
        break;
      }
    if (expected > 0) CHECK(*lad.smallest_stable_m == expected);
  }
}

TEST_CASE("pure death never exceeds the initial mass, so any m >= mass is stable") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 10.0;
  const std::vector<std::int64_t> m_list{3, 5};
  for (std::uint64_t r = 0; r < 50; ++r) {
    const LadderResult lad =
        run_truncation_ladder(delta(site(0), 3), death, g, cfg, m_list, EventStream{99, r});
    CHECK(lad.stable[0]);
    CHECK(lad.stable[1]);
    CHECK(*lad.smallest_stable_m == 3);
  }
}

TEST_CASE("determinism: identical streams give identical trajectories") {
  const GraphKernel g = GraphKernel::zd_nn(2, 0.8);
  const ScalingFamily fam(1.0, 2.0, 2, 1, 8);
  EngineConfig cfg;
  cfg.t_end = 1.5;
  cfg.sample_times = {0.5, 1.0, 1.5};
  cfg.record_events = true;

  Configuration eta = delta(site(0, 0), 2);
  eta.add(site(1, -1), 1);

  for (Mode mode : {Mode::coupled, Mode::independent}) {
    cfg.mode = mode;
    const Trajectory a = run_flow(eta, fam, g, cfg, EventStream{404, 13});
    const Trajectory b = run_flow(eta, fam, g, cfg, EventStream{404, 13});
    CHECK(trajectories_equal(a, b));
    const Trajectory c = run_flow(eta, fam, g, cfg, EventStream{404, 14});
    CHECK_FALSE(trajectories_equal(a, c));
  }
}

TEST_CASE("event cap aborts runaway runs") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction busy = balanced_walk(50.0);
  EngineConfig cfg;
  cfg.t_end = 100.0;
  cfg.event_cap = 50;
  CHECK_THROWS_WITH_AS(run_flow(delta(site(0), 5), busy, g, cfg, EventStream{1, 1}),
                       doctest::Contains("event cap"), std::runtime_error);
}

TEST_CASE("truncated flows must start below the cap") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.truncation_m = 2;
  CHECK_THROWS_AS(run_flow(delta(site(0), 5), death, g, cfg, EventStream{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("independent mode refuses multi-flow coupling") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction death = pure_death();
  EngineConfig cfg;
  cfg.t_end = 1.0;
  cfg.mode = Mode::independent;
  CHECK_THROWS_AS(run_coupled_pair(delta(site(0)), delta(site(0)), death, g, cfg,
                                   EventStream{1, 1}),
                  std::invalid_argument);
}
