#include "rdsim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdsim {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_site_count(int n) {
  if (n < 1) throw std::invalid_argument("graph preset: site count must be >= 1");
}

}  // namespace

GraphKernel GraphKernel::finite_path(int n) {
  check_site_count(n);
  GraphKernel g;
  g.preset_ = "finite_path(" + std::to_string(n) + ")";
  g.rows_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& row = g.rows_[static_cast<std::size_t>(i)];
    if (n == 1) {
      row.push_back({site(i), 1.0});
    } else if (i == 0) {
      row.push_back({site(1), 1.0});
    } else if (i == n - 1) {
      row.push_back({site(n - 2), 1.0});
    } else {
      row.push_back({site(i - 1), 0.5});
      row.push_back({site(i + 1), 0.5});
    }
  }
  g.alpha_table_.assign(static_cast<std::size_t>(n), 1.0);
  g.finalize_finite();
  return g;
}

GraphKernel GraphKernel::finite_complete(int n) {
  check_site_count(n);
  if (n < 2) throw std::invalid_argument("finite_complete: needs at least 2 sites");
  GraphKernel g;
  g.preset_ = "finite_complete(" + std::to_string(n) + ")";
  g.rows_.resize(static_cast<std::size_t>(n));
  const double p = 1.0 / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) g.rows_[static_cast<std::size_t>(i)].push_back({site(j), p});
  g.alpha_table_.assign(static_cast<std::size_t>(n), 1.0);
  g.finalize_finite();
  return g;
}

GraphKernel GraphKernel::torus(int n, int d) {
  check_site_count(n);
  if (d < 1 || d > 3) throw std::invalid_argument("torus: dimension must be 1..3");
  GraphKernel g;
  g.preset_ = "torus(" + std::to_string(n) + "," + std::to_string(d) + ")";
  g.dim_ = d;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(n);
  g.rows_.resize(total);

  // index <-> coordinate in row-major order
  const auto to_site = [&](std::size_t idx) {
    SiteId s{};
    for (int k = d - 1; k >= 0; --k) {
      s.c[static_cast<std::size_t>(k)] = static_cast<std::int32_t>(idx % static_cast<std::size_t>(n));
      idx /= static_cast<std::size_t>(n);
    }
    return s;
  };
  const auto to_index = [&](const SiteId& s) {
    std::size_t idx = 0;
    for (int k = 0; k < d; ++k)
      idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(s.c[static_cast<std::size_t>(k)]);
    return idx;
  };

  const double p = 1.0 / (2.0 * d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const SiteId s = to_site(idx);
    std::vector<Edge> row;
    for (int k = 0; k < d; ++k) {
      for (int dir : {-1, +1}) {
        SiteId t = s;
        auto& coord = t.c[static_cast<std::size_t>(k)];
        coord = static_cast<std::int32_t>((coord + dir + n) % n);
        row.push_back({t, p});
      }
    }
    // merge duplicate targets (small n wraps onto the same neighbor)
    std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    std::vector<Edge> merged;
    for (const Edge& e : row) {
      if (!merged.empty() && merged.back().to == e.to)
        merged.back().p += e.p;
      else
        merged.push_back(e);
    }
    g.rows_[to_index(s)] = std::move(merged);
  }
  g.alpha_table_.assign(total, 1.0);

  // finite graphs with multi-axis coordinates need an index map; rebuild rows
  // keyed by site order instead. Sites of a torus are coordinates, so store
  // them sorted and remap rows.
  std::vector<SiteId> order(total);
  for (std::size_t idx = 0; idx < total; ++idx) order[idx] = to_site(idx);
  std::vector<std::size_t> perm(total);
  for (std::size_t i = 0; i < total; ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
  std::vector<std::vector<Edge>> rows(total);
  std::vector<SiteId> sites(total);
  for (std::size_t i = 0; i < total; ++i) {
    rows[i] = std::move(g.rows_[perm[i]]);
    sites[i] = order[perm[i]];
  }
  g.rows_ = std::move(rows);
  g.site_list_ = std::move(sites);
  g.finalize_finite();
  return g;
}

GraphKernel GraphKernel::self_loop() {
  GraphKernel g;
  g.preset_ = "self_loop";
  g.rows_.push_back({{site(0), 1.0}});
  g.alpha_table_.assign(1, 1.0);
  g.finalize_finite();
  return g;
}

GraphKernel GraphKernel::zd_nn(int d, double beta) {
  if (d < 1 || d > 3) throw std::invalid_argument("zd_nn: dimension must be 1..3");
  if (!(beta > 0.0)) throw std::invalid_argument("zd_nn: beta must be positive");
  GraphKernel g;
  g.preset_ = "zd_nn(" + std::to_string(d) + ")";
  g.finite_ = false;
  g.dim_ = d;
  g.lattice_dim_ = d;
  g.beta_ = beta;
  // per axis: sum_x e^{-beta |x|} = (1 + e^{-beta}) / (1 - e^{-beta})
  const double axis = (1.0 + std::exp(-beta)) / (1.0 - std::exp(-beta));
  g.alpha_sum_ = std::pow(axis, d);
  g.c_ = std::cosh(beta);
  return g;
}

void GraphKernel::finalize_finite() {
  finite_ = true;
  if (site_list_.empty()) {
    site_list_.resize(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i)
      site_list_[i] = site(static_cast<int>(i));
  }
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    double sum = 0.0;
    for (const Edge& e : row) {
      if (e.p < 0.0) throw std::invalid_argument("kernel: negative probability");
      sum += e.p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("kernel: row probabilities must sum to 1");
  }
  alpha_sum_ = 0.0;
  for (double a : alpha_table_) {
    if (!(a > 0.0)) throw std::invalid_argument("alpha: weights must be positive");
    alpha_sum_ += a;
  }
  // exact contraction constant
  double c = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    double s = 0.0;
    for (const Edge& e : rows_[i]) s += e.p * alpha(e.to);
    c = std::max(c, s / alpha_table_[i]);
  }
  c_ = c;
}

void GraphKernel::set_alpha_table(std::span<const double> alpha) {
  if (!finite_) throw std::logic_error("set_alpha_table: only for finite graphs");
  if (alpha.size() != rows_.size())
    throw std::invalid_argument("alpha table size must match the site count");
  alpha_table_.assign(alpha.begin(), alpha.end());
  finalize_finite();
}

void GraphKernel::set_c_constant(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("c_constant must be positive");
  c_ = c;
}

std::size_t GraphKernel::finite_index(const SiteId& s) const {
  const auto it = std::lower_bound(site_list_.begin(), site_list_.end(), s);
  if (it == site_list_.end() || *it != s)
    throw std::domain_error("graph: unknown site " + format_site(s, dim_));
  return static_cast<std::size_t>(it - site_list_.begin());
}

bool GraphKernel::contains(const SiteId& s) const {
  if (!finite_) {
    for (int k = lattice_dim_; k < 3; ++k)
      if (s.c[static_cast<std::size_t>(k)] != 0) return false;
    return true;
  }
  const auto it = std::lower_bound(site_list_.begin(), site_list_.end(), s);
  return it != site_list_.end() && *it == s;
}

double GraphKernel::alpha(const SiteId& s) const {
  if (!finite_) {
    double norm1 = 0.0;
    for (int k = 0; k < lattice_dim_; ++k) norm1 += std::abs(s.c[static_cast<std::size_t>(k)]);
    return std::exp(-beta_ * norm1);
  }
  return alpha_table_[finite_index(s)];
}

std::vector<Edge> GraphKernel::kernel_row(const SiteId& s) const {
  if (!contains(s)) throw std::domain_error("graph: unknown site " + format_site(s, dim_));
  if (finite_) return rows_[finite_index(s)];
  std::vector<Edge> row;
  const double p = 1.0 / (2.0 * lattice_dim_);
  for (int k = 0; k < lattice_dim_; ++k) {
    for (int dir : {-1, +1}) {
      SiteId t = s;
      t.c[static_cast<std::size_t>(k)] += dir;
      row.push_back({t, p});
    }
  }
  std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
  return row;
}

std::vector<SiteId> GraphKernel::all_sites() const {
  if (!finite_) throw std::logic_error("all_sites: infinite graph");
  return site_list_;
}

std::vector<SiteId> GraphKernel::alpha_ball(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("alpha_ball: radius must be positive");
  std::vector<SiteId> ball;
  const double threshold = 1.0 / r;
  if (finite_) {
    for (const SiteId& s : site_list_)
      if (alpha(s) > threshold) ball.push_back(s);
    return ball;  // site_list_ is sorted
  }
  if (std::log(r) <= 0.0) return ball;  // alpha <= 1 everywhere
  const int cap = static_cast<int>(std::floor(std::log(r) / beta_ + 1e-9));
  // enumerate |x|_1 <= cap and keep the exact condition alpha(x) > 1/r
  const auto emit = [&](const SiteId& x) {
    if (alpha(x) > threshold) ball.push_back(x);
  };
  if (lattice_dim_ == 1) {
    for (int x = -cap; x <= cap; ++x) emit(site(x));
  } else if (lattice_dim_ == 2) {
    for (int x = -cap; x <= cap; ++x)
      for (int y = -(cap - std::abs(x)); y <= cap - std::abs(x); ++y) emit(site(x, y));
  } else {
    for (int x = -cap; x <= cap; ++x)
      for (int y = -(cap - std::abs(x)); y <= cap - std::abs(x); ++y) {
        const int rem = cap - std::abs(x) - std::abs(y);
        for (int z = -rem; z <= rem; ++z) emit(site(x, y, z));
      }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

GraphKernel::LocalizationResult GraphKernel::verify_localization(
    std::span<const SiteId> window) const {
  if (window.empty()) throw std::invalid_argument("verify_localization: empty window");
  double worst = 0.0;
  for (const SiteId& i : window) {
    const double ai = alpha(i);
    if (!(ai > 0.0)) throw std::logic_error("verify_localization: alpha vanished");
    double s = 0.0;
    for (const Edge& e : kernel_row(i)) s += e.p * alpha(e.to);
    worst = std::max(worst, s / ai);
  }
  return {worst, worst <= c_ + 1e-9};
}

double GraphKernel::edge_probability(const SiteId& from, const SiteId& to) const {
  for (const Edge& e : kernel_row(from))
    if (e.to == to) return e.p;
  return 0.0;
}

double GraphKernel::discrete_laplacian(const ScaledConfiguration& zeta, const SiteId& i) const {
  // inflow from the support minus full outflow (rows sum to 1)
  double inflow = 0.0;
  for (const auto& [j, k] : zeta.base.sites()) {
    const double p = edge_probability(j, i);
    if (p > 0.0) inflow += p * static_cast<double>(k);
  }
  inflow /= static_cast<double>(zeta.scale_n);
  return inflow - zeta.value(i);
}

double GraphKernel::abs_laplacian(const ScaledConfiguration& zeta, const SiteId& i) const {
  double inflow = 0.0;
  for (const auto& [j, k] : zeta.base.sites()) {
    const double p = edge_probability(j, i);
    if (p > 0.0) inflow += p * static_cast<double>(k);
  }
  inflow /= static_cast<double>(zeta.scale_n);
  return inflow + zeta.value(i);
}

}  // namespace rdsim
