#include "rdsim/site.hpp"

#include <charconv>
#include <cstdio>

namespace rdsim {

std::string format_site(const SiteId& s, int dim) {
  char buf[48];
  int len = 0;
  switch (dim) {
    case 1: len = std::snprintf(buf, sizeof buf, "%d", s.c[0]); break;
    case 2: len = std::snprintf(buf, sizeof buf, "%d,%d", s.c[0], s.c[1]); break;
    default: len = std::snprintf(buf, sizeof buf, "%d,%d,%d", s.c[0], s.c[1], s.c[2]); break;
  }
  return std::string(buf, static_cast<std::size_t>(len));
}

bool parse_site(std::string_view text, int dim, SiteId& out) {
  SiteId s{};
  const char* p = text.data();
  const char* end = p + text.size();
  for (int k = 0; k < dim; ++k) {
    if (k > 0) {
      if (p >= end || *p != ',') return false;
      ++p;
    }
    auto [next, ec] = std::from_chars(p, end, s.c[static_cast<std::size_t>(k)]);
    if (ec != std::errc{}) return false;
    p = next;
  }
  if (p != end) return false;
  out = s;
  return true;
}

}  // namespace rdsim
