#include "rdsim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>

namespace rdsim {

std::uint64_t mark_tag(const Mark& mk) {
  std::uint64_t h = rng::mix64(static_cast<std::uint64_t>(mk.kind) + 0x6d61726bull);
  h = rng::mix64(h ^ site_tag(mk.site));
  if (mk.kind == MarkKind::jump) h = rng::mix64(h ^ site_tag(mk.target));
  return h;
}

Effect apply_transition_in_place(Configuration& eta, const Mark& mk,
                                 std::optional<std::int64_t> m) {
  switch (mk.kind) {
    case MarkKind::birth: {
      if (m && eta.at(mk.site) >= *m) return Effect::blocked_birth;
      eta.add(mk.site, +1);
      return Effect::applied;
    }
    case MarkKind::death: {
      if (eta.at(mk.site) < 1)
        throw std::invalid_argument("apply_transition: death from an empty site");
      eta.add(mk.site, -1);
      return Effect::applied;
    }
    case MarkKind::jump: {
      if (eta.at(mk.site) < 1)
        throw std::invalid_argument("apply_transition: jump from an empty site");
      // a self-jump never raises the occupation, so the cap cannot kill it
      if (mk.target == mk.site) return Effect::applied;
      if (m && eta.at(mk.target) >= *m) {  // target full: the mover is killed
        eta.add(mk.site, -1);
        return Effect::jump_killed;
      }
      eta.add(mk.site, -1);
      eta.add(mk.target, +1);
      return Effect::applied;
    }
  }
  return Effect::none;
}

Configuration apply_transition(const Configuration& eta, const Mark& mk) {
  Configuration out = eta;
  apply_transition_in_place(out, mk);
  return out;
}

Configuration apply_transition_m(const Configuration& eta, const Mark& mk, std::int64_t m) {
  Configuration out = eta;
  apply_transition_in_place(out, mk, m);
  return out;
}

double total_rate(const Configuration& eta, const Reaction& fam, const GraphKernel&) {
  // jump rates of an occupied site sum to its count (rows are stochastic)
  double total = 0.0;
  for (const auto& [s, k] : eta.sites()) {
    const Rates r = fam.rates(k);
    total += r.plus + r.minus + static_cast<double>(k);
  }
  return total;
}

namespace {

void validate_config(const EngineConfig& cfg) {
  if (!(cfg.t_end > 0.0)) throw std::invalid_argument("engine: t_end must be positive");
  double prev = 0.0;
  for (double t : cfg.sample_times) {
    if (t < prev || t > cfg.t_end)
      throw std::invalid_argument("engine: sample_times must be ascending within [0, t_end]");
    prev = t;
  }
}

void validate_flows(const std::vector<FlowSpec>& flows) {
  if (flows.empty()) throw std::invalid_argument("engine: no flows");
  for (const FlowSpec& f : flows) {
    if (f.reaction == nullptr) throw std::invalid_argument("engine: flow without a reaction");
    if (f.truncation_m) {
      if (*f.truncation_m < 1)
        throw std::invalid_argument("engine: truncation level must be >= 1");
      for (const auto& [s, k] : f.initial.sites())
        if (k > *f.truncation_m)
          throw std::invalid_argument("engine: truncated flow must start below the cap");
    }
  }
}

double mark_rate(const Configuration& eta, const Reaction& fam, const Mark& mk, double p_edge) {
  const std::int64_t k = eta.at(mk.site);
  switch (mk.kind) {
    case MarkKind::birth: return fam.birth_rate(k);
    case MarkKind::death: return k == 0 ? 0.0 : fam.death_rate(k);
    case MarkKind::jump: return p_edge * static_cast<double>(k);
  }
  return 0.0;
}

struct Point {
  double t = 0.0;
  double u = 0.0;
};

struct Stripe {
  rng::Key key;
  std::uint64_t drawn = 0;  // points generated so far
  double t_last = 0.0;      // time of the last generated point
  std::vector<Point> buf;   // generated, unconsumed points (ascending times)
  std::size_t head = 0;     // consumed prefix of buf
  std::uint64_t gen = 0;    // candidate generation (heap invalidation)
};

struct MarkState {
  double p_edge = 0.0;
  rng::Key key;
  std::vector<double> rate;  // per flow, current
  double rate_max = 0.0;
  std::map<std::uint32_t, Stripe> stripes;
};

struct Candidate {
  double t = 0.0;
  double u = 0.0;
  Mark mark{};
  std::uint32_t stripe = 0;
  std::uint64_t gen = 0;
};

// Min-heap over (t, mark, stripe); the key is unique for valid entries.
struct CandidateAfter {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.mark != b.mark) return b.mark < a.mark;
    return a.stripe > b.stripe;
  }
};

// Shared sample bookkeeping: emits (time, state) pairs by right-continuity.
class Sampler {
 public:
  Sampler(const std::vector<double>& times, std::size_t n_flows)
      : times_(times), cursor_(0), n_(n_flows) {}

  // records every pending sample time strictly below `limit`
  void flush_below(double limit, const std::vector<Configuration>& states,
                   std::vector<Trajectory>& out) {
    while (cursor_ < times_.size() && times_[cursor_] < limit) {
      for (std::size_t f = 0; f < n_; ++f)
        out[f].samples.emplace_back(times_[cursor_], states[f]);
      ++cursor_;
    }
  }

  void finish(const std::vector<Configuration>& states, std::vector<Trajectory>& out) {
    while (cursor_ < times_.size()) {
      for (std::size_t f = 0; f < n_; ++f)
        out[f].samples.emplace_back(times_[cursor_], states[f]);
      ++cursor_;
    }
  }

 private:
  const std::vector<double>& times_;
  std::size_t cursor_;
  std::size_t n_;
};

// Coupled multi-flow simulation by stripe thinning. Every mark owns a planar
// unit-intensity Poisson process, realized lazily one u-stripe at a time;
// a point (t, u) fires for the flows whose pre-event rate exceeds u. All
// flows read the same points, which is what couples them.
class StripeSimulator {
 public:
  StripeSimulator(const std::vector<FlowSpec>& flows, const GraphKernel& g,
                  const EngineConfig& cfg, const EventStream& stream)
      : g_(g), cfg_(cfg), flow_key_(stream.flow_key()), n_flows_(flows.size()) {
    for (const FlowSpec& f : flows) {
      state_.push_back(f.initial);
      reaction_.push_back(f.reaction);
      trunc_.push_back(f.truncation_m);
    }
  }

  MultiFlowResult run() {
    MultiFlowResult res;
    res.flows.resize(n_flows_);
    Sampler sampler(cfg_.sample_times, n_flows_);

    for (std::size_t f = 0; f < n_flows_; ++f)
      for (const auto& [s, k] : state_[f].sites()) register_site(s);
    for (auto& [mk, ms] : marks_) refresh_mark(mk, ms);

    while (true) {
      // next valid candidate
      bool have = false;
      Candidate cand;
      while (!heap_.empty()) {
        cand = heap_.top();
        auto& ms = marks_.at(cand.mark);
        auto st = ms.stripes.find(cand.stripe);
        if (st == ms.stripes.end() || st->second.gen != cand.gen) {
          heap_.pop();  // stale
          continue;
        }
        if (cand.t <= t_) {  // tie with the previous event: point is spent
          heap_.pop();
          rescan_stripe(cand.mark, ms, cand.stripe);
          continue;
        }
        have = true;
        break;
      }
      if (!have || cand.t > cfg_.t_end) break;
      heap_.pop();

      sampler.flush_below(cand.t, state_, res.flows);
      fire(cand, res);
    }

    sampler.finish(state_, res.flows);
    for (std::size_t f = 0; f < n_flows_; ++f) res.flows[f].final_state = state_[f];
    res.event_count = events_;
    return res;
  }

 private:
  const std::vector<Edge>& row(const SiteId& s) {
    auto it = row_cache_.find(s);
    if (it == row_cache_.end()) it = row_cache_.emplace(s, g_.kernel_row(s)).first;
    return it->second;
  }

  void register_site(const SiteId& s) {
    if (!registered_.insert(s).second) return;
    const auto add_mark = [&](const Mark& mk, double p_edge) {
      MarkState ms;
      ms.p_edge = p_edge;
      ms.key = rng::derive(flow_key_, mark_tag(mk));
      ms.rate.assign(n_flows_, 0.0);
      marks_.emplace(mk, std::move(ms));
    };
    add_mark(birth_mark(s), 0.0);
    add_mark(death_mark(s), 0.0);
    for (const Edge& e : row(s)) add_mark(jump_mark(s, e.to), e.p);
  }

  void refresh_mark(const Mark& mk, MarkState& ms) {
    const double old_max = ms.rate_max;
    double new_max = 0.0;
    for (std::size_t f = 0; f < n_flows_; ++f) {
      ms.rate[f] = mark_rate(state_[f], *reaction_[f], mk, ms.p_edge);
      new_max = std::max(new_max, ms.rate[f]);
    }
    ms.rate_max = new_max;

    // stripes fully below both ceilings keep their candidates; the boundary
    // stripes are rescanned, stripes above the new ceiling are retired
    const double min_r = std::min(old_max, new_max);
    const auto keep = static_cast<std::uint32_t>(std::floor(min_r));
    const auto n_new = static_cast<std::uint32_t>(std::ceil(new_max));
    const auto n_old = static_cast<std::uint32_t>(std::ceil(old_max));
    for (std::uint32_t k = keep; k < n_new; ++k) rescan_stripe(mk, ms, k);
    for (std::uint32_t k = std::max(n_new, keep); k < n_old; ++k) {
      auto it = ms.stripes.find(k);
      if (it != ms.stripes.end()) it->second.gen++;
    }
  }

  void rescan_stripe(const Mark& mk, MarkState& ms, std::uint32_t k) {
    auto [it, fresh] = ms.stripes.try_emplace(k);
    Stripe& st = it->second;
    if (fresh) st.key = rng::derive(ms.key, k);
    st.gen++;

    while (st.head < st.buf.size() && st.buf[st.head].t <= t_) ++st.head;  // consume the past
    if (st.head > 64) {
      st.buf.erase(st.buf.begin(), st.buf.begin() + static_cast<std::ptrdiff_t>(st.head));
      st.head = 0;
    }

    std::size_t i = st.head;
    while (true) {
      if (i == st.buf.size()) {
        if (st.t_last > cfg_.t_end) return;  // window exhausted, no candidate
        const auto words = rng::block(st.key, st.drawn);
        ++st.drawn;
        st.t_last += rng::exp1(words[0]);
        st.buf.push_back({st.t_last, static_cast<double>(k) + rng::u01(words[1])});
      }
      const Point& p = st.buf[i];
      if (p.t > cfg_.t_end) return;
      if (p.u < ms.rate_max) {
        heap_.push(Candidate{p.t, p.u, mk, k, st.gen});
        return;
      }
      ++i;  // point above the current ceiling stays pending
    }
  }

  void fire(const Candidate& cand, MultiFlowResult& res) {
    MarkState& ms = marks_.at(cand.mark);
    EventEntry entry;
    entry.t = cand.t;
    entry.mark = cand.mark;
    entry.effects.assign(n_flows_, Effect::none);

    bool any = false;
    for (std::size_t f = 0; f < n_flows_; ++f) {
      if (cand.u < ms.rate[f]) {
        entry.effects[f] = apply_transition_in_place(state_[f], cand.mark, trunc_[f]);
        any = true;
        Trajectory& tr = res.flows[f];
        ++tr.event_count;
        if (cfg_.record_events) tr.times.push_back(cand.t);
        if (cfg_.record_states) tr.states.push_back(state_[f]);
      }
    }
    assert(any);
    (void)any;

    t_ = cand.t;
    if (++events_ > cfg_.event_cap)
      throw std::runtime_error("engine: event cap (" + std::to_string(cfg_.event_cap) +
                               ") exceeded at t=" + std::to_string(t_) +
                               "; runaway run aborted");
    if (cfg_.record_events) res.events.push_back(std::move(entry));

    // new arrivals may occupy fresh sites
    std::set<SiteId> touched{cand.mark.site};
    if (cand.mark.kind == MarkKind::jump) touched.insert(cand.mark.target);
    for (const SiteId& s : touched) register_site(s);

    // rates sourced at touched sites changed; everything else is intact
    for (const SiteId& s : touched) {
      refresh_mark(birth_mark(s), marks_.at(birth_mark(s)));
      refresh_mark(death_mark(s), marks_.at(death_mark(s)));
      for (const Edge& e : row(s)) {
        const Mark jm = jump_mark(s, e.to);
        refresh_mark(jm, marks_.at(jm));
      }
    }
    rescan_stripe(cand.mark, ms, cand.stripe);  // consume the fired point
  }

  const GraphKernel& g_;
  const EngineConfig& cfg_;
  rng::Key flow_key_;
  std::size_t n_flows_;

  std::vector<Configuration> state_;
  std::vector<const Reaction*> reaction_;
  std::vector<std::optional<std::int64_t>> trunc_;

  std::map<Mark, MarkState> marks_;
  std::set<SiteId> registered_;
  std::map<SiteId, std::vector<Edge>> row_cache_;
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateAfter> heap_;
  double t_ = 0.0;
  std::uint64_t events_ = 0;
};

// Classical direct-method realization of a single flow: exponential waiting
// time at the total rate, mark chosen proportionally. Same law as the
// coupled construction, no pathwise guarantees.
MultiFlowResult run_direct(const FlowSpec& flow, const GraphKernel& g, const EngineConfig& cfg,
                           const EventStream& stream) {
  MultiFlowResult res;
  res.flows.resize(1);
  Trajectory& tr = res.flows[0];
  Sampler sampler(cfg.sample_times, 1);
  std::vector<Configuration> state{flow.initial};
  Configuration& eta = state[0];
  const Reaction& fam = *flow.reaction;

  std::map<SiteId, double> contrib;  // occupied site -> F+ + F- + k
  double total = 0.0;
  const auto site_weight = [&](std::int64_t k) {
    const Rates r = fam.rates(k);
    return r.plus + r.minus + static_cast<double>(k);
  };
  for (const auto& [s, k] : eta.sites()) {
    const double w = site_weight(k);
    contrib[s] = w;
    total += w;
  }

  std::map<SiteId, std::vector<Edge>> row_cache;
  const auto row = [&](const SiteId& s) -> const std::vector<Edge>& {
    auto it = row_cache.find(s);
    if (it == row_cache.end()) it = row_cache.emplace(s, g.kernel_row(s)).first;
    return it->second;
  };

  rng::Sequence seq(stream.direct_key());
  double t = 0.0;
  std::uint64_t events = 0;
  std::uint64_t since_rebuild = 0;

  while (total > 0.0) {
    t += seq.exponential() / total;
    if (t > cfg.t_end) break;

    // pick the site
    double x = seq.uniform() * total;
    auto pick = contrib.begin();
    while (pick != contrib.end() && x >= pick->second) {
      x -= pick->second;
      ++pick;
    }
    if (pick == contrib.end()) {  // float overshoot lands on the last site
      --pick;
      x = 0.0;
    }
    const SiteId picked = pick->first;
    const std::int64_t k = eta.at(picked);

    // pick the mark within the site
    const Rates r = fam.rates(k);
    Mark mk;
    if (x < r.plus) {
      mk = birth_mark(picked);
    } else if (x < r.plus + r.minus) {
      mk = death_mark(picked);
    } else {
      const double frac =
          std::min((x - r.plus - r.minus) / static_cast<double>(k), 0.9999999999999999);
      double cum = 0.0;
      const auto& edges = row(picked);
      mk = jump_mark(picked, edges.back().to);
      for (const Edge& e : edges) {
        cum += e.p;
        if (frac < cum) {
          mk = jump_mark(picked, e.to);
          break;
        }
      }
    }

    sampler.flush_below(t, state, res.flows);
    const Effect eff = apply_transition_in_place(eta, mk, flow.truncation_m);

    ++tr.event_count;
    if (++events > cfg.event_cap)
      throw std::runtime_error("engine: event cap (" + std::to_string(cfg.event_cap) +
                               ") exceeded at t=" + std::to_string(t) +
                               "; runaway run aborted");
    if (cfg.record_events) {
      tr.times.push_back(t);
      res.events.push_back(EventEntry{t, mk, {eff}});
    }
    if (cfg.record_states) tr.states.push_back(eta);

    // refresh the touched contributions
    for (const SiteId& s : {mk.site, mk.target}) {
      const std::int64_t ks = eta.at(s);
      const double nw = ks == 0 ? 0.0 : site_weight(ks);
      const auto it = contrib.find(s);
      const double ow = it == contrib.end() ? 0.0 : it->second;
      total += nw - ow;
      if (nw == 0.0) {
        if (it != contrib.end()) contrib.erase(it);
      } else {
        contrib[s] = nw;
      }
      if (mk.kind != MarkKind::jump) break;  // target == site
    }
    if (++since_rebuild == 4096) {  // shed accumulated float drift
      since_rebuild = 0;
      total = 0.0;
      for (const auto& [s, ws] : contrib) total += ws;
    }
  }

  sampler.finish(state, res.flows);
  tr.final_state = eta;
  res.event_count = events;
  return res;
}

}  // namespace

MultiFlowResult run_flows(const std::vector<FlowSpec>& flows, const GraphKernel& g,
                          const EngineConfig& cfg, const EventStream& stream) {
  validate_config(cfg);
  validate_flows(flows);
  if (cfg.mode == Mode::independent) {
    if (flows.size() != 1)
      throw std::invalid_argument("engine: independent mode cannot couple flows");
    return run_direct(flows[0], g, cfg, stream);
  }
  StripeSimulator sim(flows, g, cfg, stream);
  return sim.run();
}

namespace {

// The spec-level Trajectory carries the run's event log with this flow's
// effect; wrappers materialize it from the shared tape.
Trajectory extract_flow(MultiFlowResult& res, std::size_t f, bool copy_log) {
  Trajectory tr = std::move(res.flows[f]);
  if (copy_log) tr.log = res.events;
  return tr;
}

}  // namespace

Trajectory run_flow(const Configuration& eta0, const Reaction& fam, const GraphKernel& g,
                    const EngineConfig& cfg, const EventStream& stream) {
  FlowSpec spec{eta0, &fam, cfg.truncation_m};
  MultiFlowResult res = run_flows({spec}, g, cfg, stream);
  return extract_flow(res, 0, cfg.record_events);
}

std::pair<Trajectory, Trajectory> run_coupled_pair(const Configuration& eta0,
                                                   const Configuration& eta0b,
                                                   const Reaction& fam, const GraphKernel& g,
                                                   const EngineConfig& cfg,
                                                   const EventStream& stream) {
  if (cfg.mode != Mode::coupled)
    throw std::invalid_argument("run_coupled_pair: coupled mode required");
  std::vector<FlowSpec> flows{{eta0, &fam, cfg.truncation_m},
                              {eta0b, &fam, cfg.truncation_m}};
  MultiFlowResult res = run_flows(flows, g, cfg, stream);
  auto a = extract_flow(res, 0, cfg.record_events);
  auto b = extract_flow(res, 1, cfg.record_events);
  return {std::move(a), std::move(b)};
}

LadderResult run_truncation_ladder(const Configuration& eta0, const Reaction& fam,
                                   const GraphKernel& g, const EngineConfig& cfg,
                                   std::span<const std::int64_t> m_list,
                                   const EventStream& stream) {
  if (cfg.mode != Mode::coupled)
    throw std::invalid_argument("run_truncation_ladder: coupled mode required");
  if (m_list.empty()) throw std::invalid_argument("run_truncation_ladder: empty m list");
  for (std::size_t i = 1; i < m_list.size(); ++i)
    if (m_list[i] <= m_list[i - 1])
      throw std::invalid_argument("run_truncation_ladder: m list must be strictly ascending");

  EngineConfig jcfg = cfg;
  jcfg.record_events = true;  // event-for-event comparison needs the tape
  std::vector<FlowSpec> flows;
  for (std::int64_t m : m_list) flows.push_back({eta0, &fam, m});
  flows.push_back({eta0, &fam, std::nullopt});

  MultiFlowResult res = run_flows(flows, g, jcfg, stream);
  const std::size_t last = m_list.size();

  LadderResult out;
  out.m_list.assign(m_list.begin(), m_list.end());
  out.stable.assign(m_list.size(), true);
  for (const EventEntry& ev : res.events)
    for (std::size_t i = 0; i < m_list.size(); ++i)
      if (ev.effects[i] != ev.effects[last]) out.stable[i] = false;
  for (std::size_t i = 0; i < m_list.size(); ++i)
    if (out.stable[i]) {
      out.smallest_stable_m = m_list[i];
      break;
    }

  const bool keep_log = cfg.record_events;
  for (std::size_t i = 0; i < m_list.size(); ++i)
    out.truncated.push_back(extract_flow(res, i, keep_log));
  out.untruncated = extract_flow(res, last, keep_log);
  return out;
}

}  // namespace rdsim
