#include "rdsim/configuration.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rdsim/graph.hpp"

namespace rdsim {

Configuration::Configuration(std::initializer_list<std::pair<SiteId, std::int64_t>> init) {
  for (const auto& [s, k] : init) add(s, k);
}

std::int64_t Configuration::at(const SiteId& s) const {
  const auto it = counts_.find(s);
  return it == counts_.end() ? 0 : it->second;
}

void Configuration::set(const SiteId& s, std::int64_t count) {
  if (count < 0) throw std::invalid_argument("configuration: negative occupancy");
  if (count == 0) {
    counts_.erase(s);
  } else {
    counts_[s] = count;
  }
}

void Configuration::add(const SiteId& s, std::int64_t delta) {
  if (delta == 0) return;
  const std::int64_t cur = at(s);
  if (delta > 0 && cur > std::numeric_limits<std::int64_t>::max() - delta)
    throw std::overflow_error("configuration: site occupancy overflows int64");
  const std::int64_t next = cur + delta;
  if (next < 0) throw std::invalid_argument("configuration: occupancy would go negative");
  set(s, next);
}

std::int64_t one_norm(const Configuration& c) {
  std::int64_t total = 0;
  for (const auto& [s, k] : c.sites()) {
    if (total > std::numeric_limits<std::int64_t>::max() - k)
      throw std::overflow_error("configuration: total mass overflows int64");
    total += k;
  }
  return total;
}

bool leq(const Configuration& a, const Configuration& b) {
  for (const auto& [s, k] : a.sites())
    if (k > b.at(s)) return false;
  return true;
}

Configuration restrict_to(const Configuration& c, std::span<const SiteId> sites_sorted) {
  Configuration out;
  for (const auto& [s, k] : c.sites())
    if (std::binary_search(sites_sorted.begin(), sites_sorted.end(), s)) out.set(s, k);
  return out;
}

double one_norm(const ScaledConfiguration& z) {
  return static_cast<double>(one_norm(z.base)) / static_cast<double>(z.scale_n);
}

double alpha_norm(const Configuration& c, const GraphKernel& g) {
  double total = 0.0;
  for (const auto& [s, k] : c.sites()) total += g.alpha(s) * static_cast<double>(k);
  return total;
}

double alpha_norm(const ScaledConfiguration& z, const GraphKernel& g) {
  return alpha_norm(z.base, g) / static_cast<double>(z.scale_n);
}

double alpha_distance(const Configuration& a, const Configuration& b, const GraphKernel& g) {
  double total = 0.0;
  auto ia = a.sites().begin(), ea = a.sites().end();
  auto ib = b.sites().begin(), eb = b.sites().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      total += g.alpha(ia->first) * static_cast<double>(ia->second);
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      total += g.alpha(ib->first) * static_cast<double>(ib->second);
      ++ib;
    } else {
      total += g.alpha(ia->first) *
               static_cast<double>(std::abs(ia->second - ib->second));
      ++ia;
      ++ib;
    }
  }
  return total;
}

double alpha_distance(const ScaledConfiguration& a, const ScaledConfiguration& b,
                      const GraphKernel& g) {
  if (a.scale_n == b.scale_n)
    return alpha_distance(a.base, b.base, g) / static_cast<double>(a.scale_n);
  // different scales: compare the real-valued profiles site by site
  double total = 0.0;
  auto ia = a.base.sites().begin(), ea = a.base.sites().end();
  auto ib = b.base.sites().begin(), eb = b.base.sites().end();
  const double na = static_cast<double>(a.scale_n), nb = static_cast<double>(b.scale_n);
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      total += g.alpha(ia->first) * static_cast<double>(ia->second) / na;
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      total += g.alpha(ib->first) * static_cast<double>(ib->second) / nb;
      ++ib;
    } else {
      total += g.alpha(ia->first) *
               std::abs(static_cast<double>(ia->second) / na -
                        static_cast<double>(ib->second) / nb);
      ++ia;
      ++ib;
    }
  }
  return total;
}

void write_configuration(std::ostream& os, const Configuration& c, int dim) {
  for (const auto& [s, k] : c.sites()) os << format_site(s, dim) << ' ' << k << '\n';
}

void write_configuration(std::ostream& os, const ScaledConfiguration& z, int dim) {
  os << "n=" << z.scale_n << '\n';
  write_configuration(os, z.base, dim);
}

namespace {

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

Configuration read_configuration(std::istream& is, int dim) {
  Configuration c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (blank(line) || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string site_text;
    std::int64_t count = 0;
    if (!(ls >> site_text >> count))
      throw std::runtime_error("configuration line " + std::to_string(lineno) +
                               ": expected 'site count'");
    SiteId s;
    if (!parse_site(site_text, dim, s))
      throw std::runtime_error("configuration line " + std::to_string(lineno) +
                               ": bad site '" + site_text + "'");
    c.add(s, count);
  }
  return c;
}

ScaledConfiguration read_scaled_configuration(std::istream& is, int dim) {
  std::string header;
  while (std::getline(is, header) && (blank(header) || header[0] == '#')) {
  }
  if (header.rfind("n=", 0) != 0)
    throw std::runtime_error("scaled configuration: missing 'n=<int>' header");
  ScaledConfiguration z;
  z.scale_n = std::stoll(header.substr(2));
  if (z.scale_n <= 0) throw std::runtime_error("scaled configuration: n must be positive");
  z.base = read_configuration(is, dim);
  return z;
}

}  // namespace rdsim
