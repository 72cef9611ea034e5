#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rdsim/configuration.hpp"
#include "rdsim/graph.hpp"

using namespace rdsim;

TEST_CASE("kernel rows of the presets") {
  const GraphKernel z1 = GraphKernel::zd_nn(1, 1.0);
  const auto row0 = z1.kernel_row(site(0));
  REQUIRE(row0.size() == 2);
  CHECK(row0[0].to == site(-1));
  CHECK(row0[0].p == 0.5);
  CHECK(row0[1].to == site(1));
  CHECK(row0[1].p == 0.5);

  const GraphKernel loop = GraphKernel::self_loop();
  const auto self = loop.kernel_row(site(0));
  REQUIRE(self.size() == 1);
  CHECK(self[0].to == site(0));
  CHECK(self[0].p == 1.0);

  const GraphKernel path = GraphKernel::finite_path(3);
  const auto endpoint = path.kernel_row(site(0));
  REQUIRE(endpoint.size() == 1);
  CHECK(endpoint[0].to == site(1));
  CHECK(endpoint[0].p == 1.0);

  CHECK_THROWS_AS((void)path.kernel_row(site(7)), std::domain_error);
}

TEST_CASE("rows are stochastic on random sites") {
  std::mt19937_64 rng(7);
  const GraphKernel z2 = GraphKernel::zd_nn(2, 0.7);
  const GraphKernel torus = GraphKernel::torus(5, 2);
  const GraphKernel complete = GraphKernel::finite_complete(9);
  std::uniform_int_distribution<int> coord(-50, 50);
  std::uniform_int_distribution<int> idx(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    double sum = 0.0;
    for (const Edge& e : z2.kernel_row(site(coord(rng), coord(rng)))) sum += e.p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    sum = 0.0;
    for (const Edge& e : torus.kernel_row(site(idx(rng), idx(rng)))) sum += e.p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    sum = 0.0;
    for (const Edge& e : complete.kernel_row(site(trial % 9))) sum += e.p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("localization ratios on Z^1 with exponential weights") {
  // hand evaluation: interior ratio (e^{-1} + e^{1})/2, origin ratio e^{-1}
  const double interior = (std::exp(-1.0) + std::exp(1.0)) / 2.0;
  const double origin = std::exp(-1.0);

  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  std::vector<SiteId> window;
  for (int x = -10; x <= 10; ++x)
    if (x != 0) window.push_back(site(x));

  const auto res = g.verify_localization(window);
  CHECK(res.c_estimate == doctest::Approx(interior).epsilon(1e-12));
  CHECK(res.c_estimate == doctest::Approx(1.5430806348152437).epsilon(1e-9));
  CHECK(res.pass);  // C = cosh(1) equals the interior ratio

  const SiteId zero[] = {site(0)};
  const auto at0 = g.verify_localization(zero);
  CHECK(at0.c_estimate == doctest::Approx(origin).epsilon(1e-12));
  CHECK(at0.pass);

  const GraphKernel loop = GraphKernel::self_loop();
  const SiteId s0[] = {site(0)};
  CHECK(loop.verify_localization(s0).c_estimate == doctest::Approx(1.0));
}

TEST_CASE("localization fails when the constant is understated") {
  GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  g.set_c_constant(1.0);  // below cosh(1)
  std::vector<SiteId> window{site(1), site(2)};
  CHECK_FALSE(g.verify_localization(window).pass);
}

TEST_CASE("alpha balls") {
  const GraphKernel g = GraphKernel::zd_nn(1, std::log(2.0));  // alpha = 2^{-|x|}
  const auto b5 = g.alpha_ball(5.0);
  REQUIRE(b5.size() == 5);
  CHECK(b5.front() == site(-2));
  CHECK(b5.back() == site(2));

  const auto b15 = g.alpha_ball(1.5);
  REQUIRE(b15.size() == 1);
  CHECK(b15[0] == site(0));

  CHECK(g.alpha_ball(1.0).empty());  // r <= 1/max alpha
  CHECK(g.alpha_ball(0.5).empty());

  // monotone in r
  double prev = 0;
  for (double r : {1.2, 2.0, 3.0, 9.0, 33.0, 1000.0}) {
    const auto ball = g.alpha_ball(r);
    CHECK(ball.size() >= prev);
    prev = static_cast<double>(ball.size());
    for (std::size_t i = 1; i < ball.size(); ++i) CHECK(ball[i - 1] < ball[i]);
  }

  // alpha_sum matches the geometric series for beta = ln 2: coth(beta/2) = 3
  CHECK(g.alpha_sum() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(g.c_constant() == doctest::Approx(1.25).epsilon(1e-12));  // cosh(ln 2)
}

TEST_CASE("discrete laplacian on delta configurations") {
  const GraphKernel g = GraphKernel::zd_nn(1, 1.0);
  ScaledConfiguration z;
  z.base.set(site(0), 1);
  z.scale_n = 1;
  CHECK(g.discrete_laplacian(z, site(0)) == doctest::Approx(-1.0));
  CHECK(g.discrete_laplacian(z, site(1)) == doctest::Approx(0.5));
  CHECK(g.abs_laplacian(z, site(0)) == doctest::Approx(1.0));
  CHECK(g.abs_laplacian(z, site(1)) == doctest::Approx(0.5));

  const GraphKernel loop = GraphKernel::self_loop();
  ScaledConfiguration w;
  w.base.set(site(0), 4);
  w.scale_n = 2;
  CHECK(loop.discrete_laplacian(w, site(0)) == doctest::Approx(0.0));

  const ScaledConfiguration empty;
  CHECK(g.abs_laplacian(empty, site(0)) == doctest::Approx(0.0));
}

TEST_CASE("laplacian conserves mass on finite graphs") {
  std::mt19937_64 rng(21);
  const GraphKernel g = GraphKernel::finite_path(7);
  std::uniform_int_distribution<int> count(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    ScaledConfiguration z;
    z.scale_n = 3;
    for (int i = 0; i < 7; ++i) {
      const int k = count(rng);
      if (k > 0) z.base.set(site(i), k);
    }
    double total = 0.0;
    for (const SiteId& s : g.all_sites()) total += g.discrete_laplacian(z, s);
    CHECK(std::abs(total) <= 1e-10);
  }
}

TEST_CASE("localization holds on every shipped pair") {
  {
    const GraphKernel g = GraphKernel::zd_nn(2, 0.5);
    std::vector<SiteId> window;
    for (int x = -6; x <= 6; ++x)
      for (int y = -6 + std::abs(x); y <= 6 - std::abs(x); ++y) window.push_back(site(x, y));
    CHECK(g.verify_localization(window).pass);
  }
  for (int n : {2, 5, 9}) {
    const GraphKernel g = GraphKernel::finite_path(n);
    const auto sites = g.all_sites();
    CHECK(g.verify_localization(sites).pass);
    CHECK(g.c_constant() == doctest::Approx(1.0));
  }
  {
    const GraphKernel g = GraphKernel::torus(4, 2);
    const auto sites = g.all_sites();
    CHECK(g.verify_localization(sites).pass);
  }
}
