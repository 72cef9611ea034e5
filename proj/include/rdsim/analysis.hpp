#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/engine.hpp"
#include "rdsim/generator.hpp"
#include "rdsim/graph.hpp"
#include "rdsim/reaction.hpp"
#include "rdsim/sde.hpp"

namespace rdsim {

struct CheckRow {
  std::string statistic;
  std::string checkpoint;
  double estimate = 0.0;
  double se = 0.0;
  double bound = 0.0;  // scenario-derived right-hand side; NaN for info rows
  bool pass = true;
};

enum class Verdict { pass, fail, inconclusive };

struct StatReport {
  std::string name;
  std::vector<CheckRow> rows;
  Verdict verdict = Verdict::pass;

  bool passed() const { return verdict == Verdict::pass; }
  void finish();  // derives the verdict from the rows
};

// CSV columns: statistic, checkpoint, estimate, se, bound, verdict.
void write_csv(const StatReport& report, std::ostream& os);

const char* to_string(Verdict v);

struct AnalysisOptions {
  std::uint64_t master_seed = 0;
  int threads = 1;
  std::uint64_t event_cap = 100'000'000;
  // Analytic per-checkpoint oracle for the discounted mean, when one exists:
  // pairs (t, expected value), checked to 3 SE.
  std::vector<std::pair<double, double>> mean_oracle;
};

// Runs fn(replica) for replica = 0..count-1 across threads. Results must be
// written to per-replica slots; reductions afterwards run in replica order,
// so the outcome is independent of the thread count.
void parallel_replicas(std::uint64_t count, int threads,
                       const std::function<void(std::uint64_t)>& fn);

// Discounted coupling distance e^{-(C+1)t} E||Phi_t(eta) - Phi_t(eta')|| is
// non-increasing over the checkpoints (paired differences, 3 SE), and the
// running maximum obeys the maximal-inequality tail bound
// P(sup_{t<=T} d > A) <= e^{(C+1)T} d(0) / A on a grid of levels.
StatReport distance_supermartingale_test(const Configuration& eta, const Configuration& etab,
                                         const Reaction& fam, const GraphKernel& g,
                                         std::span<const double> times, std::uint64_t replicas,
                                         const AnalysisOptions& opt);

// E||Phi_t(eta)||_1 is non-increasing and P(sup ||.||_1 > A) <= ||eta||_1/A.
// With a balanced reaction (F+ = F-) the mean is constant; pass an oracle to
// pin that case.
StatReport one_norm_supermartingale_test(const Configuration& eta, const Reaction& fam,
                                         const GraphKernel& g, std::span<const double> times,
                                         std::uint64_t replicas, const AnalysisOptions& opt);

// Site profile for ball-restricted initial data.
using CountProfile = std::function<std::int64_t(const SiteId&)>;

struct BallTestSpec {
  CountProfile profile;       // counts of the untruncated initial state
  double t_end = 1.0;
  std::vector<double> r_list; // ascending ball radii; max is the reference
  std::vector<double> escape_R;       // radii for the escape statistic
  std::vector<double> epsilon_grid;   // thresholds; empty = auto from bounds
};

// Coupled runs from eta 1_{B(r)} against the reference eta 1_{B(r_max)}:
// tail of sup_t ||difference||_alpha against e^{(C+1)T} ||initial gap|| / eps,
// plus the escape bound P(sup_t ||zeta^r 1_{B(R)^c}||_alpha > eps) <=
// ||zeta^r_0||_1 / (R eps).
StatReport ball_truncation_test(const BallTestSpec& spec, const ScalingFamily& fam,
                                const GraphKernel& g, std::uint64_t replicas,
                                const AnalysisOptions& opt);

// Consecutive-radius coupling distances along an increasing ball ladder:
// means decrease (paired, 3 SE) and tails obey the same geometric bound.
StatReport thermodynamic_limit_test(const BallTestSpec& spec, const ScalingFamily& fam,
                                    const GraphKernel& g, std::uint64_t replicas,
                                    const AnalysisOptions& opt);

struct DynkinSpec {
  double t = 1.0;
  double derivative_h = 0.02;  // short-time window for the generator check
};

// Dynkin residual M_t = f(Phi_t) - f(eta) - int_0^t Lf(Phi_s) ds with the
// integral evaluated exactly along the piecewise-constant path:
// E M_t = 0, Var M_t = E int_0^t Qf, and the short-time mean derivative
// matches Lf(eta), all to 3 SE.
StatReport dynkin_residual_test(const LocalFunction& f, const Configuration& eta,
                                const Reaction& fam, const GraphKernel& g,
                                const DynkinSpec& spec, std::uint64_t replicas,
                                const AnalysisOptions& opt);

struct FluidLimitSpec {
  std::map<SiteId, double> zeta_star0;  // macroscopic initial condition
  double a = 1.0, b = 1.0;
  int kappa = 1, ell = 1;
  std::vector<std::int64_t> n_list;     // ascending scaling levels
  double t_end = 1.0;
  std::vector<double> times;            // moment checkpoints
  std::vector<SiteId> sites;            // moment sites (cells = times x sites)
  std::vector<SiteId> window;           // simulation window (finite)
  double em_dt = 1e-3;
  std::uint64_t em_replicas = 0;        // 0 = skip the SDE ensemble
  // Optional exact mean oracle (t, site) -> E zeta_t(site).
  std::function<double(double, const SiteId&)> mean_oracle;
};

// Mass-scaled IPS moments against the Euler-Maruyama ensemble (and/or an
// exact oracle): per n the cell metric max |mean gap| / (3 combined SE) must
// not increase along n_list, and the final n must sit within combined error.
StatReport fluid_limit_test(const FluidLimitSpec& spec, const GraphKernel& g,
                            std::uint64_t replicas, const AnalysisOptions& opt);

// --- path statistics -------------------------------------------------------
// Replays an event tape, maintaining pairwise and per-flow statistics that
// the tests above consume.

struct PairPathStats {
  std::vector<double> dist_at_times;  // alpha distance at the sample times
  double sup_dist = 0.0;              // running maximum over [0, t_end]
};

PairPathStats pair_path_stats(const MultiFlowResult& run, std::size_t flow_a,
                              std::size_t flow_b, const Configuration& init_a,
                              const Configuration& init_b, const GraphKernel& g,
                              std::span<const double> times);

struct NormPathStats {
  std::vector<double> one_norm_at_times;
  double sup_one_norm = 0.0;
  std::vector<double> outside_norm_at_times;  // alpha norm outside a site set
  double sup_outside_norm = 0.0;
};

NormPathStats norm_path_stats(const MultiFlowResult& run, std::size_t flow,
                              const Configuration& init, const GraphKernel& g,
                              std::span<const double> times,
                              std::span<const SiteId> inside_sorted);

// Two-sample Kolmogorov-Smirnov statistic (for distribution-equality checks).
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace rdsim
