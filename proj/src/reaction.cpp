#include "rdsim/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdsim {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

ScalingFamily::ScalingFamily(double a, double b, int kappa, int ell, std::int64_t n)
    : a_(a), b_(b), kappa_(kappa), ell_(ell), n_(n) {
  if (a < 0.0 || b < 0.0) throw std::invalid_argument("scaling family: a, b must be >= 0");
  if (kappa < 1 || ell < 1)
    throw std::invalid_argument("scaling family: kappa, ell must be positive integers");
  if (n < 1) throw std::invalid_argument("scaling family: n must be a positive integer");
}

Rates ScalingFamily::rates(std::int64_t k) const {
  if (k < 0) throw std::invalid_argument("rates: negative count");
  if (k == 0) return {0.0, 0.0};
  const double nd = static_cast<double>(n_);
  const double zeta = static_cast<double>(k) / nd;
  const double drift = nd * b_ * ipow(zeta, kappa_);
  if (a_ == 0.0) return {0.0, drift};  // degenerate family: pure death, exact drift
  const double sum = nd * nd * a_ * ipow(zeta, ell_);
  const double plus = std::max(sum - drift, 0.0) / 2.0;
  return {plus, sum - plus};
}

double ScalingFamily::drift_target(double zeta) const { return -b_ * ipow(zeta, kappa_); }

double ScalingFamily::diffusion_target(double zeta) const { return a_ * ipow(zeta, ell_); }

double ScalingFamily::drift_gap(std::int64_t k) const {
  const double nd = static_cast<double>(n_);
  const double zeta = static_cast<double>(k) / nd;
  const Rates r = rates(k);
  return std::abs((r.plus - r.minus) / nd - drift_target(zeta));
}

double ScalingFamily::diffusion_gap(std::int64_t k) const {
  const double nd = static_cast<double>(n_);
  const double zeta = static_cast<double>(k) / nd;
  const Rates r = rates(k);
  return std::abs((r.plus + r.minus) / (nd * nd) - diffusion_target(zeta));
}

std::pair<double, double> ScalingFamily::sup_gap(double A) const {
  if (A < 0.0) throw std::invalid_argument("sup_gap: A must be >= 0");
  const std::int64_t k_max = static_cast<std::int64_t>(std::floor(A * static_cast<double>(n_) + 1e-9));
  double d = 0.0, q = 0.0;
  for (std::int64_t k = 0; k <= k_max; ++k) {
    d = std::max(d, drift_gap(k));
    q = std::max(q, diffusion_gap(k));
  }
  return {d, q};
}

LinearReaction::LinearReaction(double cp, double cm) : cp_(cp), cm_(cm) {
  if (cp < 0.0 || cp > cm)
    throw std::invalid_argument("linear reaction: needs 0 <= cp <= cm");
}

Rates LinearReaction::rates(std::int64_t k) const {
  if (k < 0) throw std::invalid_argument("rates: negative count");
  const double kd = static_cast<double>(k);
  return {cp_ * kd, cm_ * kd};
}

TableReaction::TableReaction(std::vector<Rates> table) : table_(std::move(table)) {
  if (table_.empty()) throw std::invalid_argument("reaction table: empty");
  if (table_[0].plus != 0.0 || table_[0].minus != 0.0)
    throw std::invalid_argument("reaction table violates nullF: F+(0) = F-(0) = 0 required");
  double prev_diff = 0.0;
  for (std::size_t k = 0; k < table_.size(); ++k) {
    const Rates& r = table_[k];
    if (r.plus < 0.0 || r.plus > r.minus)
      throw std::invalid_argument("reaction table violates orderF: 0 <= F+ <= F- required at k=" +
                                  std::to_string(k));
    const double diff = r.plus - r.minus;
    if (k > 0 && diff > prev_diff + 1e-12)
      throw std::invalid_argument(
          "reaction table violates decreasingF: F+ - F- must be non-increasing at k=" +
          std::to_string(k));
    prev_diff = diff;
  }
}

Rates TableReaction::rates(std::int64_t k) const {
  if (k < 0) throw std::invalid_argument("rates: negative count");
  if (static_cast<std::size_t>(k) >= table_.size())
    throw std::out_of_range("reaction table: count " + std::to_string(k) +
                            " beyond table size " + std::to_string(table_.size()));
  return table_[static_cast<std::size_t>(k)];
}

}  // namespace rdsim
