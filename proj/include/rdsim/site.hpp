#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "rdsim/rng.hpp"

namespace rdsim {

// A point of the vertex space: lattice coordinate (up to 3 axes) or, for
// explicit finite graphs, an index stored in c[0]. Lexicographic order makes
// all site iteration deterministic.
struct SiteId {
  std::array<std::int32_t, 3> c{0, 0, 0};
  friend constexpr auto operator<=>(const SiteId&, const SiteId&) = default;
};

constexpr SiteId site(int x) { return SiteId{{x, 0, 0}}; }
constexpr SiteId site(int x, int y) { return SiteId{{x, y, 0}}; }
constexpr SiteId site(int x, int y, int z) { return SiteId{{x, y, z}}; }

// Stable identity for RNG keying; depends only on the coordinates.
inline std::uint64_t site_tag(const SiteId& s) {
  std::uint64_t h = 0x5ca1ab1e0ddba11ull;
  for (std::int32_t v : s.c) h = rng::mix64(h ^ static_cast<std::uint32_t>(v));
  return h;
}

// Text form "x" / "x,y" / "x,y,z" depending on the graph dimension.
std::string format_site(const SiteId& s, int dim);

// Parses the text form; returns false on malformed input.
bool parse_site(std::string_view text, int dim, SiteId& out);

}  // namespace rdsim
