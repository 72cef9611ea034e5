#include "rdsim/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rdsim/reaction.hpp"

namespace rdsim {

namespace {

struct InEdge {
  std::size_t src;
  double p;
};

void validate(const SdeConfig& cfg) {
  if (!(cfg.dt > 0.0) || cfg.dt > cfg.t_end)
    throw std::invalid_argument("sde: need 0 < dt <= t_end");
  if (cfg.replicas == 0) throw std::invalid_argument("sde: replicas must be positive");
  double prev = 0.0;
  for (double t : cfg.sample_times) {
    if (t < prev || t > cfg.t_end)
      throw std::invalid_argument("sde: sample_times must be ascending within [0, t_end]");
    prev = t;
  }
}

}  // namespace

SdeEnsemble euler_maruyama(const std::vector<double>& zeta0, std::span<const SiteId> window,
                           double a, double b, int kappa, int ell, const GraphKernel& g,
                           const SdeConfig& cfg, const EventStream& stream) {
  validate(cfg);
  if (zeta0.size() != window.size())
    throw std::invalid_argument("sde: initial state and window sizes differ");
  for (double v : zeta0)
    if (v < 0.0) throw std::invalid_argument("sde: initial state must be nonnegative");
  if (!std::is_sorted(window.begin(), window.end()))
    throw std::invalid_argument("sde: window must be sorted");

  const std::size_t n_sites = window.size();

  // inflow adjacency restricted to the window; mass leaving it is dropped
  std::vector<std::vector<InEdge>> inflow(n_sites);
  for (std::size_t j = 0; j < n_sites; ++j) {
    for (const Edge& e : g.kernel_row(window[j])) {
      const auto it = std::lower_bound(window.begin(), window.end(), e.to);
      if (it != window.end() && *it == e.to)
        inflow[static_cast<std::size_t>(it - window.begin())].push_back({j, e.p});
    }
  }

  double initial_mass = 0.0;
  for (double v : zeta0) initial_mass += v;
  const double mass_cap = 1e6 * std::max(initial_mass, 1.0);

  SdeEnsemble ens;
  ens.window.assign(window.begin(), window.end());
  ens.sample_times = cfg.sample_times;
  ens.paths.resize(cfg.replicas);

  const std::uint64_t n_steps =
      static_cast<std::uint64_t>(std::ceil(cfg.t_end / cfg.dt - 1e-12));

  std::vector<double> state(n_sites), drift(n_sites);
  for (std::uint64_t rep = 0; rep < cfg.replicas; ++rep) {
    state = zeta0;
    auto& samples = ens.paths[rep];
    samples.resize(cfg.sample_times.size());
    std::size_t cursor = 0;
    const rng::Key rep_key =
        EventStream{stream.master_seed, stream.replica_id + rep}.sde_key();

    double t = 0.0;
    const auto flush_below = [&](double limit) {
      while (cursor < cfg.sample_times.size() && cfg.sample_times[cursor] <= limit + 1e-12) {
        samples[cursor] = state;
        ++cursor;
      }
    };
    flush_below(0.0);  // t = 0 sample, if requested

    for (std::uint64_t step = 0; step < n_steps; ++step) {
      const double dt = std::min(cfg.dt, cfg.t_end - t);
      for (std::size_t i = 0; i < n_sites; ++i) {
        double in = 0.0;
        for (const InEdge& e : inflow[i]) in += e.p * state[e.src];
        drift[i] = in - state[i] - b * ipow(state[i], kappa);
      }
      if (a > 0.0) {
        const rng::Key step_key = rng::derive(rep_key, step);
        for (std::size_t i = 0; i < n_sites; ++i) {
          const auto words = rng::block(rng::derive(step_key, site_tag(window[i])), 0);
          const double xi = rng::normal(words[0], words[1]);
          state[i] += dt * drift[i] + std::sqrt(dt * a * ipow(state[i], ell)) * xi;
        }
      } else {
        for (std::size_t i = 0; i < n_sites; ++i) state[i] += dt * drift[i];
      }
      for (double& v : state) v = std::max(v, 0.0);  // positivity policy: clamp_zero

      t += dt;
      double mass = 0.0;
      for (double v : state) mass += v;
      if (!(mass <= mass_cap))
        throw std::runtime_error("sde: ensemble diverged (mass " + std::to_string(mass) +
                                 " at t=" + std::to_string(t) + ")");
      flush_below(t);
    }
    flush_below(cfg.t_end);
  }
  return ens;
}

std::vector<MomentRow> moment_profile(const SdeEnsemble& ens) {
  if (ens.paths.empty()) throw std::invalid_argument("moment_profile: empty ensemble");
  const std::size_t n_reps = ens.paths.size();
  std::vector<MomentRow> rows;
  for (std::size_t k = 0; k < ens.sample_times.size(); ++k) {
    for (std::size_t s = 0; s < ens.window.size(); ++s) {
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t r = 0; r < n_reps; ++r) {
        const double v = ens.paths[r][k][s];
        sum += v;
        sum2 += v * v;
      }
      MomentRow row;
      row.t = ens.sample_times[k];
      row.site = ens.window[s];
      row.replicas = n_reps;
      row.mean = sum / static_cast<double>(n_reps);
      row.second_moment = sum2 / static_cast<double>(n_reps);
      const double var = std::max(0.0, row.second_moment - row.mean * row.mean);
      row.se = n_reps > 1 ? std::sqrt(var / static_cast<double>(n_reps - 1)) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace rdsim
