#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/site.hpp"

namespace rdsim {

struct Edge {
  SiteId to;
  double p = 0.0;
};

// Vertex space V with a finite-range row-stochastic transition kernel p, a
// positive summable weight alpha, and the contraction constant C satisfying
// sum_j p(i,j) alpha(j) <= C alpha(i) on every site. Immutable after
// construction and safe to share across threads.
class GraphKernel {
 public:
  // Explicit finite presets (sites are indices 0..n-1, alpha uniform unless
  // a table is supplied).
  static GraphKernel finite_path(int n);      // reflecting nearest-neighbor
  static GraphKernel finite_complete(int n);  // uniform over the other sites
  static GraphKernel torus(int n, int d);     // (Z/nZ)^d nearest-neighbor
  static GraphKernel self_loop();             // single site, p(0,0) = 1

  // Infinite lattice Z^d with nearest-neighbor kernel p = 1/(2d) per
  // neighbor and alpha(x) = exp(-beta |x|_1). The contraction constant is
  // cosh(beta): each axis contributes (e^{-beta} + e^{beta})/2 at worst, and
  // the kernel averages the axis ratios.
  static GraphKernel zd_nn(int d, double beta);

  // Replaces the alpha table of a finite graph (positive entries, one per
  // site). Recomputes alpha_sum and the exact contraction constant.
  void set_alpha_table(std::span<const double> alpha);

  // Overrides the contraction constant (verify_localization still reports
  // whether the override actually holds).
  void set_c_constant(double c);

  int dim() const { return dim_; }
  bool is_finite() const { return finite_; }
  std::size_t finite_size() const { return rows_.size(); }
  bool contains(const SiteId& s) const;
  double alpha(const SiteId& s) const;
  double alpha_sum() const { return alpha_sum_; }
  double c_constant() const { return c_; }
  const std::string& preset_name() const { return preset_; }

  // Out-edges of a site, sorted by target. Probabilities sum to 1.
  std::vector<Edge> kernel_row(const SiteId& s) const;

  // Sites with alpha(x) > 1/r, sorted. Finite by summability of alpha.
  std::vector<SiteId> alpha_ball(double r) const;

  // All sites of a finite graph, sorted.
  std::vector<SiteId> all_sites() const;

  struct LocalizationResult {
    double c_estimate = 0.0;
    bool pass = false;
  };

  // Checks sum_j p(i,j) alpha(j) <= C alpha(i) over a window of sites;
  // c_estimate is the largest observed ratio.
  LocalizationResult verify_localization(std::span<const SiteId> window) const;

  // Discrete transport operator sum_j [p(j,i) zeta(j) - p(i,j) zeta(i)] and
  // its absolute-value counterpart sum_j [p(j,i) zeta(j) + p(i,j) zeta(i)].
  double discrete_laplacian(const ScaledConfiguration& zeta, const SiteId& i) const;
  double abs_laplacian(const ScaledConfiguration& zeta, const SiteId& i) const;

  // p(from, to); zero when there is no edge.
  double edge_probability(const SiteId& from, const SiteId& to) const;

 private:
  GraphKernel() = default;
  void finalize_finite();
  std::size_t finite_index(const SiteId& s) const;

  bool finite_ = true;
  int dim_ = 1;
  std::string preset_;

  // finite representation; site_list_ is sorted and parallels rows_
  std::vector<std::vector<Edge>> rows_;
  std::vector<SiteId> site_list_;
  std::vector<double> alpha_table_;

  // lattice representation
  int lattice_dim_ = 1;
  double beta_ = 1.0;

  double alpha_sum_ = 0.0;
  double c_ = 1.0;
};

}  // namespace rdsim
