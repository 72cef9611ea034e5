#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/engine.hpp"
#include "rdsim/graph.hpp"
#include "rdsim/reaction.hpp"

namespace rdsim {

// Function of finitely many coordinates: eval receives the counts at the
// support sites, in support order.
struct LocalFunction {
  std::vector<SiteId> support;  // sorted, unique
  std::function<double(std::span<const std::int64_t>)> eval;

  double operator()(const Configuration& eta) const;
};

LocalFunction coordinate_fn(const SiteId& i);                    // eta(i)
LocalFunction product_fn(const SiteId& i, const SiteId& j);      // eta(i) * eta(j)
LocalFunction constant_fn(double c);
LocalFunction squared(const LocalFunction& f);

// Generator sum L f(eta) = sum over marks R(eta) [f(Gamma eta) - f(eta)].
// Birth/death terms are enumerated over the support (elsewhere the
// difference vanishes); jump terms over kernel edges touching the support.
double generator_L(const LocalFunction& f, const Configuration& eta, const Reaction& fam,
                   const GraphKernel& g);

// Quadratic counterpart with squared differences; equals L(f^2) - 2 f L(f).
double quadratic_Q(const LocalFunction& f, const Configuration& eta, const Reaction& fam,
                   const GraphKernel& g);

// Closed forms of the rescaled generator on coordinate functions.
// L_n f_i(zeta)    = Delta_p zeta(i) + (F+ - F-)(n zeta(i)) / n
// Q_n f_i(zeta)    = |Delta_p|' zeta(i) / n + (F+ + F-)(n zeta(i)) / n^2
//                    (|Delta_p|' is the absolute transport without the kernel
//                    diagonal: a self-jump leaves the state unchanged)
// L_n f_ij(zeta)   = L_n f_i * zeta(j) + L_n f_j * zeta(i)
//                    - [zeta(i) p(i,j) + zeta(j) p(j,i)] / n       (i != j)
// L_n f_ii(zeta)   = Q_n f_i + 2 zeta(i) L_n f_i
double coordinate_L_n(const ScaledConfiguration& zeta, const SiteId& i,
                      const ScalingFamily& fam, const GraphKernel& g);
double coordinate_Q_n(const ScaledConfiguration& zeta, const SiteId& i,
                      const ScalingFamily& fam, const GraphKernel& g);
double pair_L_n(const ScaledConfiguration& zeta, const SiteId& i, const SiteId& j,
                const ScalingFamily& fam, const GraphKernel& g);

// Limiting second-order operator on the same functions:
// L* f_i = Delta_p zeta(i) - b zeta(i)^kappa; products follow the product
// rule plus the diffusion term a zeta(i)^ell when i = j.
double limit_L_star_coordinate(const ScaledConfiguration& zeta, const SiteId& i, double b,
                               int kappa, const GraphKernel& g);
double limit_L_star_pair(const ScaledConfiguration& zeta, const SiteId& i, const SiteId& j,
                         double a, double b, int kappa, int ell, const GraphKernel& g);

struct ContractionResult {
  double value = 0.0;  // coupled generator applied to the alpha-distance
  double bound = 0.0;  // (C + 1) * alpha-distance
  bool pass = false;
};

// Coupled generator of the m-truncated pair dynamics acting on
// g(eta, eta') = ||eta - eta'||_alpha, by exact enumeration of the joint
// min / residual-max rate split. Requires both states <= m sitewise.
ContractionResult coupled_L_hat_m(const Configuration& eta, const Configuration& etab,
                                  std::int64_t m, const Reaction& fam, const GraphKernel& g);

}  // namespace rdsim
