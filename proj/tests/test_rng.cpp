#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdsim/rng.hpp"

using namespace rdsim;

TEST_CASE("blocks are reproducible and keyed") {
  const rng::Key k = rng::derive(rng::Key{42, 0}, 7);
  CHECK(rng::block(k, 0) == rng::block(k, 0));
  CHECK(rng::block(k, 0) != rng::block(k, 1));
  const rng::Key other = rng::derive(rng::Key{42, 0}, 8);
  CHECK(rng::block(k, 0) != rng::block(other, 0));
  CHECK(rng::derive(k, 3) == rng::derive(k, 3));
}

TEST_CASE("uniforms live strictly inside (0,1) with the right moments") {
  rng::Sequence seq(rng::derive(rng::Key{1, 2}, 3));
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = seq.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.005);          // se ~ 0.00065
  CHECK(std::abs(var - 1.0 / 12.0) < 0.003);
}

TEST_CASE("exponential and normal moments") {
  rng::Sequence seq(rng::derive(rng::Key{9, 9}, 1));
  const int n = 200000;
  double esum = 0.0, nsum = 0.0, nsum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    esum += seq.exponential();
    const double g = seq.gaussian();
    nsum += g;
    nsum2 += g * g;
  }
  CHECK(std::abs(esum / n - 1.0) < 0.01);
  CHECK(std::abs(nsum / n) < 0.01);
  CHECK(std::abs(nsum2 / n - 1.0) < 0.02);
}
