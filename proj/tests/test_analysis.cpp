#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rdsim/analysis.hpp"

using namespace rdsim;

namespace {

Configuration delta(const SiteId& s, std::int64_t k = 1) {
  Configuration c;
  c.set(s, k);
  return c;
}

const std::vector<double> kTimes{0.25, 0.5, 0.75, 1.0};

}  // namespace

TEST_CASE("identical initial conditions give an exactly null distance report") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 100;
  const Configuration eta = delta(site(0), 2);
  const StatReport rep = distance_supermartingale_test(eta, eta, fam, g, kTimes, 200, opt);
  CHECK(rep.passed());
  for (const CheckRow& row : rep.rows)
    if (row.statistic == "discounted_distance_mean") {
      CHECK(row.estimate == 0.0);
      CHECK(row.se == 0.0);
    }
}

TEST_CASE("pure-death distance oracle: discounted mean is e^{-(C+2)t} alpha(0)") {
  const GraphKernel g = GraphKernel::self_loop();  // C = 1, alpha(0) = 1
  const LinearReaction death = pure_death();
  AnalysisOptions opt;
  opt.master_seed = 2025;
  opt.threads = 2;
  const double c2 = g.c_constant() + 2.0;
  for (double t : kTimes) opt.mean_oracle.emplace_back(t, std::exp(-c2 * t));
  const StatReport rep =
      distance_supermartingale_test(delta(site(0)), Configuration{}, death, g, kTimes, 4000, opt);
  CHECK(rep.passed());
}

TEST_CASE("distance supermartingale under reaction and diffusion") {
  const GraphKernel g = GraphKernel::zd_nn(1, std::log(2.0));
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 7;
  opt.threads = 2;
  Configuration eta = delta(site(0), 2);
  Configuration etab = eta;
  etab.add(site(1), 1);
  const StatReport rep = distance_supermartingale_test(eta, etab, fam, g, kTimes, 2000, opt);
  CHECK(rep.passed());
}

TEST_CASE("one-norm is pathwise constant under pure diffusion") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily diffusion(0.0, 0.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 8;
  Configuration eta = delta(site(0), 3);
  eta.add(site(2), 2);
  for (double t : kTimes) opt.mean_oracle.emplace_back(t, 5.0);
  const StatReport rep = one_norm_supermartingale_test(eta, diffusion, g, kTimes, 300, opt);
  CHECK(rep.passed());
  for (const CheckRow& row : rep.rows)
    if (row.statistic == "one_norm_mean") {
      CHECK(row.estimate == 5.0);
      CHECK(row.se == 0.0);
    }
}

TEST_CASE("balanced reaction makes the total mass a martingale") {
  const GraphKernel g = GraphKernel::self_loop();
  const LinearReaction walk = balanced_walk(1.0);
  AnalysisOptions opt;
  opt.master_seed = 9;
  opt.threads = 2;
  for (double t : kTimes) opt.mean_oracle.emplace_back(t, 4.0);
  const StatReport rep =
      one_norm_supermartingale_test(delta(site(0), 4), walk, g, kTimes, 4000, opt);
  CHECK(rep.passed());
}

TEST_CASE("one-norm supermartingale with reactions") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 2.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 10;
  opt.threads = 2;
  const StatReport rep =
      one_norm_supermartingale_test(delta(site(0), 5), fam, g, kTimes, 2000, opt);
  CHECK(rep.passed());
}

TEST_CASE("dynkin residual: constant functions are exactly null") {
  const GraphKernel g = GraphKernel::self_loop();
  const ScalingFamily fam(1.0, 1.0, 1, 1, 5);
  AnalysisOptions opt;
  opt.master_seed = 11;
  DynkinSpec spec;
  spec.t = 0.5;
  spec.derivative_h = 0.1;
  const StatReport rep =
      dynkin_residual_test(constant_fn(2.0), delta(site(0), 2), fam, g, spec, 100, opt);
  CHECK(rep.passed());
  CHECK(rep.rows[0].estimate == 0.0);
  CHECK(rep.rows[0].se == 0.0);
}

TEST_CASE("dynkin residual for a coordinate under pure diffusion") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily diffusion(0.0, 0.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 12;
  opt.threads = 2;
  DynkinSpec spec;
  spec.t = 1.0;
  spec.derivative_h = 0.05;
  const StatReport rep = dynkin_residual_test(coordinate_fn(site(0)), delta(site(0)),
                                              diffusion, g, spec, 4000, opt);
  CHECK(rep.passed());
}

TEST_CASE("dynkin residual with reactions on a path") {
  const GraphKernel g = GraphKernel::finite_path(5);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  AnalysisOptions opt;
  opt.master_seed = 13;
  opt.threads = 2;
  DynkinSpec spec;
  spec.t = 1.0;
  Configuration eta = delta(site(0));
  eta.add(site(1), 1);
  const StatReport rep =
      dynkin_residual_test(product_fn(site(0), site(1)), eta, fam, g, spec, 3000, opt);
  CHECK(rep.passed());
}

TEST_CASE("ball truncation: full-coverage radii give exactly zero difference") {
  const GraphKernel g = GraphKernel::zd_nn(1, std::log(2.0));
  const ScalingFamily fam(1.0, 1.0, 1, 1, 5);
  BallTestSpec spec;
  spec.profile = [](const SiteId& s) { return std::abs(s.c[0]) <= 1 ? 5 : 0; };
  spec.t_end = 0.5;
  spec.r_list = {5.0, 9.0};  // both balls cover {-1,0,1}... r=5 gives |x|<=2
  AnalysisOptions opt;
  opt.master_seed = 14;
  const StatReport rep = ball_truncation_test(spec, fam, g, 100, opt);
  CHECK(rep.passed());
  bool saw_zero_row = false;
  for (const CheckRow& row : rep.rows)
    if (row.statistic == "ball_difference_zero") {
      saw_zero_row = true;
      CHECK(row.estimate == 0.0);
    }
  CHECK(saw_zero_row);
}

TEST_CASE("ball truncation bounds on the constant density profile") {
  const GraphKernel g = GraphKernel::zd_nn(1, std::log(2.0));
  const ScalingFamily fam(1.0, 1.0, 1, 1, 5);
  BallTestSpec spec;
  const std::int64_t n = fam.n();
  spec.profile = [n](const SiteId&) { return n; };  // density 1
  spec.t_end = 0.5;
  spec.r_list = {3.0, 6.0, 24.0};
  spec.escape_R = {48.0, 192.0};
  AnalysisOptions opt;
  opt.master_seed = 15;
  opt.threads = 2;
  const StatReport rep = ball_truncation_test(spec, fam, g, 400, opt);
  CHECK(rep.passed());
}

TEST_CASE("thermodynamic ladder: consecutive distances decrease") {
  const GraphKernel g = GraphKernel::zd_nn(1, std::log(2.0));
  const ScalingFamily fam(1.0, 1.0, 1, 1, 5);
  BallTestSpec spec;
  const std::int64_t n = fam.n();
  spec.profile = [n](const SiteId&) { return n; };
  spec.t_end = 0.5;
  spec.r_list = {3.0, 6.0, 12.0, 48.0};
  AnalysisOptions opt;
  opt.master_seed = 16;
  opt.threads = 2;
  const StatReport rep = thermodynamic_limit_test(spec, fam, g, 400, opt);
  CHECK(rep.passed());
}

TEST_CASE("fluid limit: zero initial data stays zero") {
  const GraphKernel g = GraphKernel::self_loop();
  FluidLimitSpec spec;
  spec.zeta_star0 = {};
  spec.a = 1.0;
  spec.b = 1.0;
  spec.n_list = {10, 100};
  spec.t_end = 0.5;
  spec.times = {0.25, 0.5};
  spec.sites = {site(0)};
  spec.window = {site(0)};
  spec.em_dt = 1e-2;
  spec.em_replicas = 50;
  AnalysisOptions opt;
  opt.master_seed = 17;
  const StatReport rep = fluid_limit_test(spec, g, 50, opt);
  CHECK(rep.passed());
  for (const CheckRow& row : rep.rows)
    if (row.statistic == "ips_mean") CHECK(row.estimate == 0.0);
}

TEST_CASE("fluid limit against the decay oracle at a = 0") {
  const GraphKernel g = GraphKernel::self_loop();
  FluidLimitSpec spec;
  spec.zeta_star0[site(0)] = 1.0;
  spec.a = 0.0;
  spec.b = 1.0;
  spec.kappa = 1;
  spec.n_list = {100};
  spec.t_end = 1.0;
  spec.times = {0.5, 1.0};
  spec.sites = {site(0)};
  spec.window = {site(0)};
  spec.em_replicas = 0;  // oracle only
  spec.mean_oracle = [](double t, const SiteId&) { return std::exp(-t); };
  AnalysisOptions opt;
  opt.master_seed = 18;
  opt.threads = 2;
  const StatReport rep = fluid_limit_test(spec, g, 2000, opt);
  CHECK(rep.passed());
}

TEST_CASE("report CSV shape") {
  StatReport rep;
  rep.name = "demo";
  rep.rows.push_back({"stat", "t=1", 0.5, 0.01, 1.0, true});
  rep.rows.push_back({"stat", "t=2", 2.0, 0.01, 1.0, false});
  rep.finish();
  CHECK_FALSE(rep.passed());
  std::ostringstream os;
  write_csv(rep, os);
  CHECK(os.str() ==
        "statistic,checkpoint,estimate,se,bound,verdict\n"
        "stat,t=1,0.5,0.01,1,pass\n"
        "stat,t=2,2,0.01,1,fail\n");
}

TEST_CASE("ks statistic on identical and disjoint samples") {
  std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(ks_statistic(a, a) == 0.0);
  std::vector<double> b{10, 11, 12};
  CHECK(ks_statistic(a, b) == doctest::Approx(1.0));
}

TEST_CASE("replica parallelism is deterministic across thread counts") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  const ScalingFamily fam(1.0, 1.0, 1, 1, 10);
  Configuration eta = delta(site(0), 2);
  Configuration etab = eta;
  etab.add(site(1), 1);
  AnalysisOptions opt1;
  opt1.master_seed = 19;
  opt1.threads = 1;
  AnalysisOptions opt4 = opt1;
  opt4.threads = 4;
  const StatReport r1 = distance_supermartingale_test(eta, etab, fam, g, kTimes, 400, opt1);
  const StatReport r4 = distance_supermartingale_test(eta, etab, fam, g, kTimes, 400, opt4);
  REQUIRE(r1.rows.size() == r4.rows.size());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].estimate == r4.rows[i].estimate);
    CHECK(r1.rows[i].se == r4.rows[i].se);
  }
}
