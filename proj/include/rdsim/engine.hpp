#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rdsim/configuration.hpp"
#include "rdsim/graph.hpp"
#include "rdsim/reaction.hpp"
#include "rdsim/rng.hpp"

namespace rdsim {

enum class MarkKind : std::uint8_t { birth = 0, death = 1, jump = 2 };

// Transition label: birth/death at a site, or a jump along a kernel edge.
struct Mark {
  MarkKind kind = MarkKind::birth;
  SiteId site{};
  SiteId target{};  // equals site except for jumps
  friend constexpr auto operator<=>(const Mark&, const Mark&) = default;
};

inline Mark birth_mark(const SiteId& s) { return Mark{MarkKind::birth, s, s}; }
inline Mark death_mark(const SiteId& s) { return Mark{MarkKind::death, s, s}; }
inline Mark jump_mark(const SiteId& from, const SiteId& to) {
  return Mark{MarkKind::jump, from, to};
}

// Stable stream identity of a mark; a lattice mark keeps the same points in
// every run and window.
std::uint64_t mark_tag(const Mark& mk);

// What a mark did to one flow when its clock fired.
enum class Effect : std::uint8_t {
  none = 0,          // rate of this flow was below the point
  applied = 1,       // full transition
  blocked_birth = 2, // m-truncation: site already at m, birth dropped
  jump_killed = 3,   // m-truncation: target at m, moving particle removed
};

// Applies a transition in place. Death/jump require an occupied source; the
// optional cap m applies the truncated operators (births into a full site
// are dropped, jumps into a full site kill the moving particle).
Effect apply_transition_in_place(Configuration& eta, const Mark& mk,
                                 std::optional<std::int64_t> m = std::nullopt);

// Pure forms of the transition operators.
Configuration apply_transition(const Configuration& eta, const Mark& mk);
Configuration apply_transition_m(const Configuration& eta, const Mark& mk, std::int64_t m);

// Sum of all transition rates out of eta: per occupied site
// F+(k) + F-(k) + k (the jump rates of a site total its count).
double total_rate(const Configuration& eta, const Reaction& fam, const GraphKernel& g);

// Deterministic realization of the per-mark planar Poisson point processes.
// Each mark's process is split into unit stripes of the u-axis; stripe
// points are regenerated on demand from (master_seed, replica_id, mark,
// stripe, draw index), so every flow driven by the same stream reads the
// same randomness.
struct EventStream {
  std::uint64_t master_seed = 0;
  std::uint64_t replica_id = 0;

  rng::Key flow_key() const {
    return rng::derive(rng::derive(rng::Key{master_seed, 0x7261696e626f77ull}, replica_id), 1);
  }
  rng::Key direct_key() const {
    return rng::derive(rng::derive(rng::Key{master_seed, 0x7261696e626f77ull}, replica_id), 2);
  }
  rng::Key sde_key() const {
    return rng::derive(rng::derive(rng::Key{master_seed, 0x7261696e626f77ull}, replica_id), 3);
  }
};

enum class Mode : std::uint8_t {
  coupled,      // stripe thinning; exact pathwise coupling across flows
  independent,  // direct method; same law, no coupling guarantees
};

struct EngineConfig {
  Mode mode = Mode::coupled;
  std::optional<std::int64_t> truncation_m;  // single-flow truncation
  double t_end = 1.0;
  std::vector<double> sample_times;          // ascending, within [0, t_end]
  std::uint64_t event_cap = 100'000'000;
  bool record_events = false;  // keep the event tape
  bool record_states = false;  // keep full states after every event
};

// One event of a (possibly multi-flow) run: the point that fired and what it
// did to each flow.
struct EventEntry {
  double t = 0.0;
  Mark mark{};
  std::vector<Effect> effects;  // per flow
};

// Time-stamped realization of one flow.
struct Trajectory {
  std::vector<double> times;                 // accepted event times (record_events)
  std::vector<Configuration> states;         // after each accepted event (record_states)
  std::vector<EventEntry> log;               // all run events with per-flow effects (record_events)
  std::vector<std::pair<double, Configuration>> samples;  // right-continuous samples
  Configuration final_state;
  std::uint64_t event_count = 0;             // events this flow accepted
};

struct FlowSpec {
  Configuration initial;
  const Reaction* reaction = nullptr;
  std::optional<std::int64_t> truncation_m;
};

// Joint result of several flows driven by the same event stream.
struct MultiFlowResult {
  std::vector<EventEntry> events;  // record_events
  std::vector<Trajectory> flows;   // per-flow samples / states / finals
  std::uint64_t event_count = 0;   // points that fired for at least one flow
};

// Core driver: evolves every flow from the shared stripe realization. Each
// point (t, u) of a mark's process fires for exactly the flows whose current
// rate for that mark exceeds u.
MultiFlowResult run_flows(const std::vector<FlowSpec>& flows, const GraphKernel& g,
                          const EngineConfig& cfg, const EventStream& stream);

// Single flow; honors cfg.mode and cfg.truncation_m.
Trajectory run_flow(const Configuration& eta0, const Reaction& fam, const GraphKernel& g,
                    const EngineConfig& cfg, const EventStream& stream);

// Two flows from the same randomness (coupled mode only).
std::pair<Trajectory, Trajectory> run_coupled_pair(const Configuration& eta0,
                                                   const Configuration& eta0b,
                                                   const Reaction& fam, const GraphKernel& g,
                                                   const EngineConfig& cfg,
                                                   const EventStream& stream);

struct LadderResult {
  std::vector<std::int64_t> m_list;
  std::vector<Trajectory> truncated;           // one per m, same order as m_list
  Trajectory untruncated;
  // Smallest listed m whose flow matched the untruncated one event-for-event.
  std::optional<std::int64_t> smallest_stable_m;
  std::vector<bool> stable;                    // per m
};

// Truncation ladder plus the untruncated flow, all from one stream.
LadderResult run_truncation_ladder(const Configuration& eta0, const Reaction& fam,
                                   const GraphKernel& g, const EngineConfig& cfg,
                                   std::span<const std::int64_t> m_list,
                                   const EventStream& stream);

}  // namespace rdsim
