#include "rdsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rdsim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "name(arg1,arg2)" -> name + raw args
bool split_call(const std::string& text, std::string& name, std::string& args) {
  const auto open = text.find('(');
  if (open == std::string::npos) {
    name = text;
    args.clear();
    return true;
  }
  if (text.back() != ')') return false;
  name = text.substr(0, open);
  args = text.substr(open + 1, text.size() - open - 2);
  return true;
}

}  // namespace

bool parse_scenario(const std::string& text, Scenario& out, std::vector<ScenarioError>& errors) {
  Scenario s;
  // clear list-like defaults that the file overrides by assignment
  bool sample_times_set = false;

  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  bool seed_seen = false;

  const auto err = [&](int line, std::string msg) {
    errors.push_back({line, std::move(msg)});
  };

  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        err(lineno, "malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"graph", "reaction", "initial", "engine",
                                    "sde",   "fluid",    "thermo",  "dynkin", "run"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
            return section == k;
          }) == std::end(known))
        err(lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      err(lineno, "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto bad_value = [&] { err(lineno, "bad value for " + section + "." + key); };

    if (section == "graph") {
      if (key == "preset") {
        s.graph_preset = value;
      } else if (key == "alpha") {
        s.alpha_preset = value;
      } else if (key == "c_constant") {
        double v;
        if (parse_double(value, v) && v > 0.0)
          s.c_constant = v;
        else
          bad_value();
      } else if (key == "window_radius") {
        if (!parse_double(value, s.window_radius) || !(s.window_radius > 0.0)) bad_value();
      } else {
        err(lineno, "unknown key graph." + key);
      }
    } else if (section == "reaction") {
      if (key == "table") {
        s.f_table_path = value;
      } else if (key == "a" || key == "b" || key == "kappa" || key == "ell" || key == "n") {
        if (!s.family) s.family = FamilyParams{};
        if (key == "a" || key == "b") {
          double v;
          if (!parse_double(value, v) || v < 0.0) {
            bad_value();
          } else if (key == "a") {
            s.family->a = v;
          } else {
            s.family->b = v;
          }
        } else {
          std::int64_t v;
          if (!parse_i64(value, v) || v < 1) {
            bad_value();
          } else if (key == "kappa") {
            s.family->kappa = static_cast<int>(v);
          } else if (key == "ell") {
            s.family->ell = static_cast<int>(v);
          } else {
            s.family->n = v;
          }
        }
      } else {
        err(lineno, "unknown key reaction." + key);
      }
    } else if (section == "initial") {
      if (key == "state") {
        s.initial = value;
      } else if (key == "state_b") {
        s.initial_b = value;
      } else if (key == "radius") {
        if (!parse_double(value, s.initial_radius) || !(s.initial_radius > 0.0)) bad_value();
      } else {
        err(lineno, "unknown key initial." + key);
      }
    } else if (section == "engine") {
      if (key == "mode") {
        if (value == "coupled" || value == "independent")
          s.mode = value;
        else
          err(lineno, "engine.mode must be coupled or independent");
      } else if (key == "t_end") {
        if (!parse_double(value, s.t_end) || !(s.t_end > 0.0)) bad_value();
      } else if (key == "sample_times") {
        s.sample_times.clear();
        sample_times_set = true;
        for (const std::string& tok : split_ws(value)) {
          double v;
          if (!parse_double(tok, v)) {
            bad_value();
            break;
          }
          s.sample_times.push_back(v);
        }
      } else if (key == "truncation_m") {
        std::int64_t v;
        if (parse_i64(value, v) && v >= 1)
          s.truncation_m = v;
        else
          bad_value();
      } else if (key == "m_list") {
        s.m_list.clear();
        for (const std::string& tok : split_ws(value)) {
          std::int64_t v;
          if (!parse_i64(tok, v) || v < 1) {
            bad_value();
            break;
          }
          s.m_list.push_back(v);
        }
      } else if (key == "event_cap") {
        if (!parse_u64(value, s.event_cap) || s.event_cap == 0) bad_value();
      } else {
        err(lineno, "unknown key engine." + key);
      }
    } else if (section == "sde") {
      if (key == "dt") {
        if (!parse_double(value, s.sde_dt) || !(s.sde_dt > 0.0)) bad_value();
      } else if (key == "replicas") {
        if (!parse_u64(value, s.sde_replicas)) bad_value();
      } else {
        err(lineno, "unknown key sde." + key);
      }
    } else if (section == "fluid") {
      if (key == "n_list") {
        s.n_list.clear();
        for (const std::string& tok : split_ws(value)) {
          std::int64_t v;
          if (!parse_i64(tok, v) || v < 1) {
            bad_value();
            break;
          }
          s.n_list.push_back(v);
        }
      } else {
        err(lineno, "unknown key fluid." + key);
      }
    } else if (section == "thermo") {
      if (key == "r_list" || key == "escape_R") {
        auto& list = key == "r_list" ? s.r_list : s.escape_R;
        list.clear();
        for (const std::string& tok : split_ws(value)) {
          double v;
          if (!parse_double(tok, v) || !(v > 0.0)) {
            bad_value();
            break;
          }
          list.push_back(v);
        }
      } else {
        err(lineno, "unknown key thermo." + key);
      }
    } else if (section == "dynkin") {
      if (key == "sites") {
        s.dynkin_sites.clear();
        for (const std::string& tok : split_ws(value)) {
          SiteId sid;
          if (!parse_site(tok, 3, sid) && !parse_site(tok, 2, sid) && !parse_site(tok, 1, sid)) {
            bad_value();
            break;
          }
          s.dynkin_sites.push_back(sid);
        }
      } else if (key == "pairs") {
        s.dynkin_pairs.clear();
        for (const std::string& tok : split_ws(value)) {
          const auto colon = tok.find(':');
          SiteId a, b;
          if (colon == std::string::npos ||
              !parse_site(tok.substr(0, colon), 1, a) || !parse_site(tok.substr(colon + 1), 1, b)) {
            bad_value();
            break;
          }
          s.dynkin_pairs.emplace_back(a, b);
        }
      } else {
        err(lineno, "unknown key dynkin." + key);
      }
    } else if (section == "run") {
      if (key == "seed") {
        std::uint64_t v;
        if (parse_u64(value, v)) {
          s.seed = v;
          seed_seen = true;
        } else {
          bad_value();
        }
      } else if (key == "replicas") {
        if (!parse_u64(value, s.replicas) || s.replicas == 0) bad_value();
      } else if (key == "threads") {
        std::int64_t v;
        if (parse_i64(value, v) && v >= 1)
          s.threads = static_cast<int>(v);
        else
          bad_value();
      } else if (key == "tests") {
        s.tests = split_ws(value);
      } else {
        err(lineno, "unknown key run." + key);
      }
    } else {
      err(lineno, "key outside any section");
    }
  }

  // semantic validation
  if (!seed_seen) err(0, "seed required ([run] seed = <u64>)");
  if (!s.family && s.f_table_path.empty())
    err(0, "reaction family (a,b,kappa,ell,n) or table required");
  if (sample_times_set || !s.sample_times.empty()) {
    double prev = 0.0;
    for (double t : s.sample_times) {
      if (t < prev || t > s.t_end) {
        err(0, "sample_times must be ascending within [0, t_end]");
        break;
      }
      prev = t;
    }
  }
  if (!s.f_table_path.empty()) {
    try {
      load_reaction_table(s.f_table_path);
    } catch (const std::exception& e) {
      err(0, e.what());
    }
  }

  if (!errors.empty()) return false;
  out = std::move(s);
  return true;
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "[graph]\n";
  os << "preset = " << s.graph_preset << '\n';
  os << "alpha = " << s.alpha_preset << '\n';
  if (s.c_constant) os << "c_constant = " << fmt_double(*s.c_constant) << '\n';
  os << "window_radius = " << fmt_double(s.window_radius) << '\n';

  os << "\n[reaction]\n";
  if (s.family) {
    os << "a = " << fmt_double(s.family->a) << '\n';
    os << "b = " << fmt_double(s.family->b) << '\n';
    os << "kappa = " << s.family->kappa << '\n';
    os << "ell = " << s.family->ell << '\n';
    os << "n = " << s.family->n << '\n';
  }
  if (!s.f_table_path.empty()) os << "table = " << s.f_table_path << '\n';

  os << "\n[initial]\n";
  os << "state = " << s.initial << '\n';
  if (!s.initial_b.empty()) os << "state_b = " << s.initial_b << '\n';
  os << "radius = " << fmt_double(s.initial_radius) << '\n';

  os << "\n[engine]\n";
  os << "mode = " << s.mode << '\n';
  os << "t_end = " << fmt_double(s.t_end) << '\n';
  if (!s.sample_times.empty()) {
    os << "sample_times =";
    for (double t : s.sample_times) os << ' ' << fmt_double(t);
    os << '\n';
  }
  if (s.truncation_m) os << "truncation_m = " << *s.truncation_m << '\n';
  if (!s.m_list.empty()) {
    os << "m_list =";
    for (std::int64_t m : s.m_list) os << ' ' << m;
    os << '\n';
  }
  os << "event_cap = " << s.event_cap << '\n';

  os << "\n[sde]\n";
  os << "dt = " << fmt_double(s.sde_dt) << '\n';
  os << "replicas = " << s.sde_replicas << '\n';

  if (!s.n_list.empty()) {
    os << "\n[fluid]\n";
    os << "n_list =";
    for (std::int64_t n : s.n_list) os << ' ' << n;
    os << '\n';
  }

  if (!s.r_list.empty() || !s.escape_R.empty()) {
    os << "\n[thermo]\n";
    if (!s.r_list.empty()) {
      os << "r_list =";
      for (double r : s.r_list) os << ' ' << fmt_double(r);
      os << '\n';
    }
    if (!s.escape_R.empty()) {
      os << "escape_R =";
      for (double r : s.escape_R) os << ' ' << fmt_double(r);
      os << '\n';
    }
  }

  if (!s.dynkin_sites.empty() || !s.dynkin_pairs.empty()) {
    os << "\n[dynkin]\n";
    if (!s.dynkin_sites.empty()) {
      os << "sites =";
      for (const SiteId& x : s.dynkin_sites) os << ' ' << format_site(x, 1);
      os << '\n';
    }
    if (!s.dynkin_pairs.empty()) {
      os << "pairs =";
      for (const auto& [a, b] : s.dynkin_pairs)
        os << ' ' << format_site(a, 1) << ':' << format_site(b, 1);
      os << '\n';
    }
  }

  os << "\n[run]\n";
  if (s.seed) os << "seed = " << *s.seed << '\n';
  os << "replicas = " << s.replicas << '\n';
  os << "threads = " << s.threads << '\n';
  if (!s.tests.empty()) {
    os << "tests =";
    for (const std::string& t : s.tests) os << ' ' << t;
    os << '\n';
  }
  return os.str();
}

std::uint64_t scenario_hash(const Scenario& s) {
  const std::string text = serialize_scenario(s);
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

GraphKernel build_graph(const Scenario& s) {
  std::string name, args;
  if (!split_call(s.graph_preset, name, args))
    throw std::runtime_error("bad graph preset: " + s.graph_preset);
  std::vector<std::string> arg;
  {
    std::string tok;
    std::istringstream as(args);
    while (std::getline(as, tok, ',')) arg.push_back(trim(tok));
  }
  const auto int_arg = [&](std::size_t i) {
    std::int64_t v;
    if (i >= arg.size() || !parse_i64(arg[i], v))
      throw std::runtime_error("graph preset " + name + ": bad argument");
    return static_cast<int>(v);
  };

  GraphKernel g = [&] {
    if (name == "self_loop") return GraphKernel::self_loop();
    if (name == "finite_path") return GraphKernel::finite_path(int_arg(0));
    if (name == "finite_complete") return GraphKernel::finite_complete(int_arg(0));
    if (name == "torus") return GraphKernel::torus(int_arg(0), int_arg(1));
    if (name == "zd_nn") {
      std::string an, aa;
      if (!split_call(s.alpha_preset, an, aa) || an != "exp")
        throw std::runtime_error("zd_nn requires alpha = exp(beta)");
      double beta;
      if (!parse_double(aa, beta) || !(beta > 0.0))
        throw std::runtime_error("alpha exp(beta): bad beta");
      return GraphKernel::zd_nn(int_arg(0), beta);
    }
    throw std::runtime_error("unknown graph preset: " + name);
  }();

  if (g.is_finite()) {
    std::string an, aa;
    if (!split_call(s.alpha_preset, an, aa)) throw std::runtime_error("bad alpha preset");
    if (an == "uniform" || an.empty()) {
      // default table of ones is already in place
    } else if (an == "table") {
      std::ifstream in(aa);
      if (!in) throw std::runtime_error("alpha table: cannot open " + aa);
      std::vector<double> table(g.finite_size(), -1.0);
      std::string line;
      while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ls(t);
        std::string site_text;
        double a;
        if (!(ls >> site_text >> a))
          throw std::runtime_error("alpha table: expected 'site alpha' lines");
        SiteId sid;
        if (!parse_site(site_text, g.dim(), sid))
          throw std::runtime_error("alpha table: bad site " + site_text);
        const auto sites = g.all_sites();
        const auto it = std::lower_bound(sites.begin(), sites.end(), sid);
        if (it == sites.end() || *it != sid)
          throw std::runtime_error("alpha table: unknown site " + site_text);
        table[static_cast<std::size_t>(it - sites.begin())] = a;
      }
      for (double& a : table)
        if (a < 0.0) throw std::runtime_error("alpha table: missing sites");
      g.set_alpha_table(table);
    } else {
      throw std::runtime_error("finite graphs take alpha = uniform or table(path)");
    }
  }
  if (s.c_constant) g.set_c_constant(*s.c_constant);
  return g;
}

std::unique_ptr<Reaction> load_reaction_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("reaction table: cannot open " + path);
  std::vector<Rates> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::int64_t k;
    double fp, fm;
    if (!(ls >> k >> fp >> fm))
      throw std::runtime_error("reaction table line " + std::to_string(lineno) +
                               ": expected 'k f+ f-'");
    if (k != static_cast<std::int64_t>(rows.size()))
      throw std::runtime_error("reaction table line " + std::to_string(lineno) +
                               ": counts must be consecutive from 0");
    rows.push_back({fp, fm});
  }
  return std::make_unique<TableReaction>(std::move(rows));  // validates the conditions
}

std::unique_ptr<Reaction> build_reaction(const Scenario& s) {
  if (!s.f_table_path.empty()) return load_reaction_table(s.f_table_path);
  if (!s.family) throw std::runtime_error("scenario has no reaction");
  return std::make_unique<ScalingFamily>(s.family->a, s.family->b, s.family->kappa,
                                         s.family->ell, s.family->n);
}

Configuration build_initial(const std::string& initial_spec, double radius,
                            const GraphKernel& g) {
  std::string name, args;
  if (!split_call(initial_spec, name, args))
    throw std::runtime_error("bad initial state: " + initial_spec);
  if (name == "delta") {
    SiteId s;
    if (!parse_site(args, g.dim(), s))
      throw std::runtime_error("initial delta: bad site " + args);
    Configuration c;
    c.set(s, 1);
    return c;
  }
  if (name == "constant") {
    std::int64_t count;
    if (!parse_i64(args, count) || count < 0)
      throw std::runtime_error("initial constant: bad count " + args);
    Configuration c;
    for (const SiteId& s : g.alpha_ball(radius))
      if (count > 0) c.set(s, count);
    return c;
  }
  if (name == "file") {
    std::ifstream in(args);
    if (!in) throw std::runtime_error("initial file: cannot open " + args);
    return read_configuration(in, g.dim());
  }
  throw std::runtime_error("unknown initial state kind: " + name);
}

EngineConfig build_engine_config(const Scenario& s) {
  EngineConfig cfg;
  cfg.mode = s.mode == "independent" ? Mode::independent : Mode::coupled;
  cfg.truncation_m = s.truncation_m;
  cfg.t_end = s.t_end;
  cfg.sample_times = s.sample_times;
  cfg.event_cap = s.event_cap;
  return cfg;
}

}  // namespace rdsim
