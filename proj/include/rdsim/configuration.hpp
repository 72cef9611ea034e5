#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>

#include "rdsim/site.hpp"

namespace rdsim {

class GraphKernel;

// Sparse occupation state eta: site -> particle count. Zeros are never
// stored, so the map holds exactly the support.
class Configuration {
 public:
  Configuration() = default;
  Configuration(std::initializer_list<std::pair<SiteId, std::int64_t>> init);

  std::int64_t at(const SiteId& s) const;

  // Stores a count; zero erases, negative throws.
  void set(const SiteId& s, std::int64_t count);

  // Adds delta with overflow/negativity checks. A run whose occupancy would
  // leave the int64 range aborts loudly rather than wrapping.
  void add(const SiteId& s, std::int64_t delta);

  const std::map<SiteId, std::int64_t>& sites() const { return counts_; }
  bool empty() const { return counts_.empty(); }
  std::size_t support_size() const { return counts_.size(); }

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  std::map<SiteId, std::int64_t> counts_;
};

// Total particle count (1-norm).
std::int64_t one_norm(const Configuration& c);

// Sitewise partial order: a(i) <= b(i) for every site.
bool leq(const Configuration& a, const Configuration& b);

// Zeroes every site outside the given sorted site list.
Configuration restrict_to(const Configuration& c, std::span<const SiteId> sites_sorted);

// Mass-scaled state zeta = base / n, represented exactly.
struct ScaledConfiguration {
  Configuration base;
  std::int64_t scale_n = 1;

  double value(const SiteId& s) const {
    return static_cast<double>(base.at(s)) / static_cast<double>(scale_n);
  }
  friend bool operator==(const ScaledConfiguration&, const ScaledConfiguration&) = default;
};

double one_norm(const ScaledConfiguration& z);

// alpha-weighted norm and metric; weights come from the kernel's
// localization function.
double alpha_norm(const Configuration& c, const GraphKernel& g);
double alpha_norm(const ScaledConfiguration& z, const GraphKernel& g);
double alpha_distance(const Configuration& a, const Configuration& b, const GraphKernel& g);
double alpha_distance(const ScaledConfiguration& a, const ScaledConfiguration& b,
                      const GraphKernel& g);

// Text format: one "site count" line per occupied site; the scaled form is
// prefixed by a "n=<int>" header line.
void write_configuration(std::ostream& os, const Configuration& c, int dim);
void write_configuration(std::ostream& os, const ScaledConfiguration& z, int dim);
Configuration read_configuration(std::istream& is, int dim);
ScaledConfiguration read_scaled_configuration(std::istream& is, int dim);

}  // namespace rdsim
