#pragma once

#include <cstdint>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/engine.hpp"
#include "rdsim/graph.hpp"

namespace rdsim {

struct SdeConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  std::uint64_t replicas = 1000;
  std::vector<double> sample_times;  // ascending, within [0, t_end]
  // positivity policy: clamp at zero after every step (the only one shipped)
};

// Ensemble of sampled paths; paths[r][k][s] is replica r at sample_times[k],
// window[s].
struct SdeEnsemble {
  std::vector<SiteId> window;  // sorted
  std::vector<double> sample_times;
  std::vector<std::vector<std::vector<double>>> paths;
};

// Euler-Maruyama integration of
//   d zeta(i) = (Delta_p zeta(i) - b zeta(i)^kappa) dt + sqrt(a zeta(i)^ell) dB_i
// on a finite site window with independent per-site drivers. Inflow is
// restricted to the window; mass diffusing outside is removed. States are
// clamped at zero after every step.
SdeEnsemble euler_maruyama(const std::vector<double>& zeta0, std::span<const SiteId> window,
                           double a, double b, int kappa, int ell, const GraphKernel& g,
                           const SdeConfig& cfg, const EventStream& stream);

struct MomentRow {
  double t = 0.0;
  SiteId site{};
  double mean = 0.0;
  double second_moment = 0.0;
  double se = 0.0;  // standard error of the mean
  std::uint64_t replicas = 0;
};

// Monte Carlo moments per (time, site) cell. Throws on an empty ensemble.
std::vector<MomentRow> moment_profile(const SdeEnsemble& ens);

}  // namespace rdsim
