#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace rdsim {

// Integer power with nonnegative exponent.
double ipow(double x, int e);

struct Rates {
  double plus = 0.0;   // birth rate F+(k)
  double minus = 0.0;  // death rate F-(k)
};

// Reaction rate pair (F+, F-) on particle counts. Admissible functions
// vanish at zero, satisfy 0 <= F+ <= F-, and have non-increasing F+ - F-.
class Reaction {
 public:
  virtual ~Reaction() = default;
  virtual Rates rates(std::int64_t k) const = 0;
  double birth_rate(std::int64_t k) const { return rates(k).plus; }
  double death_rate(std::int64_t k) const { return rates(k).minus; }
};

// The n-indexed family driving the fluid limit. With zeta = k/n,
//   2 F+(k) = max(n^2 a zeta^ell - n b zeta^kappa, 0),
//   F-(k)   = n^2 a zeta^ell - F+(k),
// so F+ + F- recovers the squared mass oscillation n^2 a zeta^ell exactly
// and F+ - F- recovers the net mass drift -n b zeta^kappa wherever the
// positive-part clamp is inactive. For a = 0 that closed form collapses to
// the zero reaction, so the family degenerates to the pure-death rates
// F+ = 0, F- = n b zeta^kappa whose drift still matches the target.
class ScalingFamily final : public Reaction {
 public:
  ScalingFamily(double a, double b, int kappa, int ell, std::int64_t n);

  Rates rates(std::int64_t k) const override;

  // Macroscopic targets F(zeta) = -b zeta^kappa and G(zeta) = a zeta^ell.
  double drift_target(double zeta) const;
  double diffusion_target(double zeta) const;

  // |(F+ - F-)(n zeta)/n - F(zeta)| and |(F+ + F-)(n zeta)/n^2 - G(zeta)|,
  // evaluated on the attainable lattice zeta = k/n.
  double drift_gap(std::int64_t k) const;
  double diffusion_gap(std::int64_t k) const;

  // Maxima of the two gaps over all attainable zeta = k/n <= A.
  std::pair<double, double> sup_gap(double A) const;

  double a() const { return a_; }
  double b() const { return b_; }
  int kappa() const { return kappa_; }
  int ell() const { return ell_; }
  std::int64_t n() const { return n_; }

 private:
  double a_, b_;
  int kappa_, ell_;
  std::int64_t n_;
};

// F+(k) = cp k, F-(k) = cm k with 0 <= cp <= cm. The cp = 0 case is the
// pure-death dynamics; cp = cm makes the total mass a martingale.
class LinearReaction final : public Reaction {
 public:
  LinearReaction(double cp, double cm);
  Rates rates(std::int64_t k) const override;

 private:
  double cp_, cm_;
};

// Explicit rate table for counts 0..size-1. Construction validates the three
// admissibility conditions and names the violated one ("nullF", "orderF",
// "decreasingF"); evaluation beyond the table aborts the run.
class TableReaction final : public Reaction {
 public:
  explicit TableReaction(std::vector<Rates> table);
  Rates rates(std::int64_t k) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::vector<Rates> table_;
};

inline LinearReaction pure_death() { return LinearReaction(0.0, 1.0); }
inline LinearReaction balanced_walk(double c = 1.0) { return LinearReaction(c, c); }

}  // namespace rdsim
