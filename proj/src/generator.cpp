#include "rdsim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdsim {

double LocalFunction::operator()(const Configuration& eta) const {
  std::vector<std::int64_t> counts(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) counts[i] = eta.at(support[i]);
  return eval(counts);
}

LocalFunction coordinate_fn(const SiteId& i) {
  return LocalFunction{{i}, [](std::span<const std::int64_t> k) {
                         return static_cast<double>(k[0]);
                       }};
}

LocalFunction product_fn(const SiteId& i, const SiteId& j) {
  if (i == j)
    return LocalFunction{{i}, [](std::span<const std::int64_t> k) {
                           const double v = static_cast<double>(k[0]);
                           return v * v;
                         }};
  std::vector<SiteId> sup{i, j};
  std::sort(sup.begin(), sup.end());
  return LocalFunction{sup, [](std::span<const std::int64_t> k) {
                         return static_cast<double>(k[0]) * static_cast<double>(k[1]);
                       }};
}

LocalFunction constant_fn(double c) {
  return LocalFunction{{}, [c](std::span<const std::int64_t>) { return c; }};
}

LocalFunction squared(const LocalFunction& f) {
  auto inner = f.eval;
  return LocalFunction{f.support, [inner](std::span<const std::int64_t> k) {
                         const double v = inner(k);
                         return v * v;
                       }};
}

namespace {

// Accumulates sum of rate * w(f(Gamma eta) - f(eta)) over every mark whose
// transition can change f. Birth/death marks outside the support contribute
// nothing (f is local); jump marks matter when either endpoint meets the
// support.
template <typename Weight>
double generator_sum(const LocalFunction& f, const Configuration& eta, const Reaction& fam,
                     const GraphKernel& g, Weight&& weight) {
  std::vector<std::int64_t> base(f.support.size());
  for (std::size_t i = 0; i < f.support.size(); ++i) base[i] = eta.at(f.support[i]);
  const double f0 = f.eval(base);

  const auto index_of = [&](const SiteId& s) -> int {
    const auto it = std::lower_bound(f.support.begin(), f.support.end(), s);
    if (it == f.support.end() || *it != s) return -1;
    return static_cast<int>(it - f.support.begin());
  };

  std::vector<std::int64_t> work = base;
  const auto eval_shift = [&](int ia, std::int64_t da, int ib, std::int64_t db) {
    work = base;
    if (ia >= 0) work[static_cast<std::size_t>(ia)] += da;
    if (ib >= 0) work[static_cast<std::size_t>(ib)] += db;
    return f.eval(work);
  };

  double sum = 0.0;

  for (std::size_t i = 0; i < f.support.size(); ++i) {
    const std::int64_t k = base[i];
    const Rates r = fam.rates(k);
    const int idx = static_cast<int>(i);
    if (r.plus > 0.0) sum += r.plus * weight(eval_shift(idx, +1, -1, 0) - f0);
    if (r.minus > 0.0 && k > 0) sum += r.minus * weight(eval_shift(idx, -1, -1, 0) - f0);
  }

  for (const auto& [s, k] : eta.sites()) {
    const int is = index_of(s);
    for (const Edge& e : g.kernel_row(s)) {
      const int it = index_of(e.to);
      if (is < 0 && it < 0) continue;
      const double rate = e.p * static_cast<double>(k);
      if (rate <= 0.0) continue;
      double diff;
      if (e.to == s) {
        diff = 0.0;  // self-jump leaves the state unchanged
      } else {
        diff = eval_shift(is, -1, it, +1) - f0;
      }
      sum += rate * weight(diff);
    }
  }
  return sum;
}

}  // namespace

double generator_L(const LocalFunction& f, const Configuration& eta, const Reaction& fam,
                   const GraphKernel& g) {
  return generator_sum(f, eta, fam, g, [](double d) { return d; });
}

double quadratic_Q(const LocalFunction& f, const Configuration& eta, const Reaction& fam,
                   const GraphKernel& g) {
  return generator_sum(f, eta, fam, g, [](double d) { return d * d; });
}

double coordinate_L_n(const ScaledConfiguration& zeta, const SiteId& i,
                      const ScalingFamily& fam, const GraphKernel& g) {
  const double nd = static_cast<double>(fam.n());
  const Rates r = fam.rates(zeta.base.at(i));
  return g.discrete_laplacian(zeta, i) + (r.plus - r.minus) / nd;
}

double coordinate_Q_n(const ScaledConfiguration& zeta, const SiteId& i,
                      const ScalingFamily& fam, const GraphKernel& g) {
  const double nd = static_cast<double>(fam.n());
  const Rates r = fam.rates(zeta.base.at(i));
  // Self-jumps do not move mass, so the quadratic transport term is the
  // absolute transport with the kernel diagonal removed.
  double inflow = 0.0;
  for (const auto& [j, k] : zeta.base.sites()) {
    if (j == i) continue;
    const double p = g.edge_probability(j, i);
    if (p > 0.0) inflow += p * static_cast<double>(k);
  }
  inflow /= static_cast<double>(zeta.scale_n);
  const double outflow = (1.0 - g.edge_probability(i, i)) * zeta.value(i);
  return (inflow + outflow) / nd + (r.plus + r.minus) / (nd * nd);
}

double pair_L_n(const ScaledConfiguration& zeta, const SiteId& i, const SiteId& j,
                const ScalingFamily& fam, const GraphKernel& g) {
  const double li = coordinate_L_n(zeta, i, fam, g);
  if (i == j) return coordinate_Q_n(zeta, i, fam, g) + 2.0 * zeta.value(i) * li;
  const double lj = coordinate_L_n(zeta, j, fam, g);
  const double correction = (zeta.value(i) * g.edge_probability(i, j) +
                             zeta.value(j) * g.edge_probability(j, i)) /
                            static_cast<double>(fam.n());
  return li * zeta.value(j) + lj * zeta.value(i) - correction;
}

double limit_L_star_coordinate(const ScaledConfiguration& zeta, const SiteId& i, double b,
                               int kappa, const GraphKernel& g) {
  return g.discrete_laplacian(zeta, i) - b * ipow(zeta.value(i), kappa);
}

double limit_L_star_pair(const ScaledConfiguration& zeta, const SiteId& i, const SiteId& j,
                         double a, double b, int kappa, int ell, const GraphKernel& g) {
  const double li = limit_L_star_coordinate(zeta, i, b, kappa, g);
  if (i == j) return 2.0 * zeta.value(i) * li + a * ipow(zeta.value(i), ell);
  const double lj = limit_L_star_coordinate(zeta, j, b, kappa, g);
  return li * zeta.value(j) + lj * zeta.value(i);
}

namespace {

// alpha-distance change at the affected sites when eta and etab are
// transformed by the (possibly truncated) transition operators.
double distance_delta(const Configuration& eta, const Configuration& etab, const Mark& mk,
                      bool move_a, bool move_b, std::int64_t m, const GraphKernel& g) {
  const auto site_delta = [&](const SiteId& s, std::int64_t da, std::int64_t db) {
    const double before = std::abs(static_cast<double>(eta.at(s) - etab.at(s)));
    const double after =
        std::abs(static_cast<double>((eta.at(s) + da) - (etab.at(s) + db)));
    return g.alpha(s) * (after - before);
  };

  std::int64_t da_src = 0, db_src = 0, da_dst = 0, db_dst = 0;
  const auto plan = [&](const Configuration& c, std::int64_t& d_src, std::int64_t& d_dst) {
    switch (mk.kind) {
      case MarkKind::birth:
        if (c.at(mk.site) < m) d_src += 1;
        break;
      case MarkKind::death:
        d_src -= 1;
        break;
      case MarkKind::jump:
        if (mk.target == mk.site) break;  // self-jump: no change, never truncated
        d_src -= 1;
        if (c.at(mk.target) < m) d_dst += 1;
        break;
    }
  };
  if (move_a) plan(eta, da_src, da_dst);
  if (move_b) plan(etab, db_src, db_dst);

  if (mk.kind == MarkKind::jump && mk.target != mk.site)
    return site_delta(mk.site, da_src, db_src) + site_delta(mk.target, da_dst, db_dst);
  return site_delta(mk.site, da_src + da_dst, db_src + db_dst);
}

}  // namespace

ContractionResult coupled_L_hat_m(const Configuration& eta, const Configuration& etab,
                                  std::int64_t m, const Reaction& fam, const GraphKernel& g) {
  if (m < 1) throw std::invalid_argument("coupled_L_hat_m: m must be >= 1");
  for (const auto& [s, k] : eta.sites())
    if (k > m) throw std::invalid_argument("coupled_L_hat_m: first state above the cap");
  for (const auto& [s, k] : etab.sites())
    if (k > m) throw std::invalid_argument("coupled_L_hat_m: second state above the cap");

  std::vector<SiteId> sites;
  for (const auto& [s, k] : eta.sites()) sites.push_back(s);
  for (const auto& [s, k] : etab.sites()) sites.push_back(s);
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());

  double value = 0.0;
  const auto accumulate = [&](const Mark& mk, double ra, double rb) {
    if (ra <= 0.0 && rb <= 0.0) return;
    const double joint = std::min(ra, rb);
    if (joint > 0.0) value += joint * distance_delta(eta, etab, mk, true, true, m, g);
    if (ra > joint) value += (ra - joint) * distance_delta(eta, etab, mk, true, false, m, g);
    if (rb > joint) value += (rb - joint) * distance_delta(eta, etab, mk, false, true, m, g);
  };

  for (const SiteId& s : sites) {
    const std::int64_t ka = eta.at(s);
    const std::int64_t kb = etab.at(s);
    const Rates ra = fam.rates(ka);
    const Rates rb = fam.rates(kb);
    accumulate(birth_mark(s), ra.plus, rb.plus);
    accumulate(death_mark(s), ra.minus, rb.minus);
    for (const Edge& e : g.kernel_row(s))
      accumulate(jump_mark(s, e.to), e.p * static_cast<double>(ka),
                 e.p * static_cast<double>(kb));
  }

  const double dist = alpha_distance(eta, etab, g);
  const double bound = (g.c_constant() + 1.0) * dist;
  return {value, bound, value <= bound + 1e-9};
}

}  // namespace rdsim
