#include "rrw/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rrw/estimators.hpp"
#include "rrw/oracle.hpp"
#include "rrw/replicate.hpp"

namespace rrw {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Speed: return "speed";
    case ExperimentKind::UpperTail: return "upper-tail";
    case ExperimentKind::LowerTail: return "lower-tail";
    case ExperimentKind::RegenStats: return "regen-stats";
    case ExperimentKind::OracleCheck: return "oracle-check";
  }
  return "?";
}

namespace {

ExperimentKind parse_kind(const std::string& s, int line) {
  for (auto k : {ExperimentKind::Speed, ExperimentKind::UpperTail, ExperimentKind::LowerTail,
                 ExperimentKind::RegenStats, ExperimentKind::OracleCheck})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s +
                        "' (expected speed, upper-tail, lower-tail, regen-stats, oracle-check)",
                    line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line = 0;
};
using Entries = std::map<std::string, Entry>;

template <class T>
T parse_int(const std::string& key, const Entry& e) {
  T v{};
  const auto* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // Accept integral values written in floating point form, e.g. 1e5.
    try {
      std::size_t pos = 0;
      const double d = std::stod(e.value, &pos);
      if (pos == e.value.size() && d == std::floor(d) && d >= 0) return static_cast<T>(d);
    } catch (const std::exception&) {
    }
    throw ConfigError("field '" + key + "' expects an integer, got '" + e.value + "'", e.line);
  }
  return v;
}

double parse_real(const std::string& key, const Entry& e) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(e.value, &pos);
    if (pos == e.value.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("field '" + key + "' expects a number, got '" + e.value + "'", e.line);
}

bool parse_bool(const std::string& key, const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError("field '" + key + "' expects true/false, got '" + e.value + "'", e.line);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Entries entries_from_text(const std::string& text) {
  Entries out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string l = trim(raw);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value', got '" + l + "'", line);
    const std::string key = trim(std::string_view(l).substr(0, eq));
    const std::string value = trim(std::string_view(l).substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    if (out.count(key)) throw ConfigError("duplicate field '" + key + "'", line);
    out[key] = {value, line};
  }
  return out;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) {
      if (!s.empty()) s += ',';
      s += json_scalar(x);
    }
    return s;
  }
  return v.dump();
}

Entries entries_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON spec must be an object");
  Entries out;
  for (const auto& [k, v] : j.items())
    if (!v.is_null()) out[k] = {json_scalar(v), 0};
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "name",   "kind",     "b",         "scheme",       "c",          "k_max",
      "horizon", "seed",    "n_grid",    "replicas",     "epsilon",    "level",
      "speed",  "speed_horizon", "speed_replicas", "N", "M",         "margin",
      "tilts",  "pilot_replicas", "family", "lookahead",  "audit",      "iid_max_pairs",
      "iid_permutations", "out", "workers"};
  return keys;
}

ExperimentSpec build_spec(const Entries& e) {
  for (const auto& [k, v] : e)
    if (std::find(known_keys().begin(), known_keys().end(), k) == known_keys().end())
      throw ConfigError("unknown field '" + k + "'", v.line);
  for (const char* req : {"kind", "b", "scheme", "c"})
    if (!e.count(req)) throw ConfigError(std::string("missing required field '") + req + "'");

  auto get = [&](const char* k) -> const Entry* {
    auto it = e.find(k);
    return it == e.end() ? nullptr : &it->second;
  };

  ExperimentSpec s;
  s.kind = parse_kind(get("kind")->value, get("kind")->line);
  if (auto v = get("name")) s.name = v->value;
  s.walk.b = parse_int<std::uint32_t>("b", *get("b"));
  try {
    s.walk.scheme.kind = parse_scheme_kind(get("scheme")->value);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what(), get("scheme")->line);
  }
  s.walk.scheme.c = parse_real("c", *get("c"));
  if (auto v = get("k_max")) s.walk.scheme.k_max = parse_int<std::uint32_t>("k_max", *v);
  if (auto v = get("horizon")) s.walk.horizon = parse_int<std::uint64_t>("horizon", *v);
  if (auto v = get("seed")) s.walk.seed = parse_int<std::uint64_t>("seed", *v);
  if (auto v = get("n_grid")) {
    for (const auto& item : split_list(v->value))
      s.n_grid.push_back(parse_int<std::uint64_t>("n_grid", {item, v->line}));
  }
  if (auto v = get("replicas")) s.replicas = parse_int<std::size_t>("replicas", *v);
  if (auto v = get("epsilon")) s.epsilon = parse_real("epsilon", *v);
  if (auto v = get("level")) s.level = parse_real("level", *v);
  if (auto v = get("speed")) s.speed = parse_real("speed", *v);
  if (auto v = get("speed_horizon")) s.speed_horizon = parse_int<std::uint64_t>("speed_horizon", *v);
  if (auto v = get("speed_replicas")) s.speed_replicas = parse_int<std::size_t>("speed_replicas", *v);
  if (auto v = get("N")) s.truncation.N = parse_int<std::int64_t>("N", *v);
  if (auto v = get("M")) s.truncation.M = parse_int<std::int64_t>("M", *v);
  s.truncation.margin = kDefaultMargin;
  if (auto v = get("margin")) s.truncation.margin = parse_int<std::uint32_t>("margin", *v);
  if (auto v = get("tilts")) {
    s.tilts.clear();
    for (const auto& item : split_list(v->value)) s.tilts.push_back(parse_real("tilts", {item, v->line}));
  }
  if (auto v = get("pilot_replicas")) s.pilot_replicas = parse_int<std::size_t>("pilot_replicas", *v);
  if (auto v = get("family")) s.family = v->value;
  if (auto v = get("lookahead")) s.lookahead = parse_int<std::uint64_t>("lookahead", *v);
  if (auto v = get("audit")) s.audit = parse_bool("audit", *v);
  if (auto v = get("iid_max_pairs")) s.iid_max_pairs = parse_int<std::size_t>("iid_max_pairs", *v);
  if (auto v = get("iid_permutations")) s.iid_permutations = parse_int<int>("iid_permutations", *v);
  if (auto v = get("out")) s.out_dir = v->value;
  if (auto v = get("workers")) s.workers = parse_int<int>("workers", *v);
  return s;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace

ExperimentSpec parse_spec(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return build_spec(entries_from_json(text));
  return build_spec(entries_from_text(text));
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read spec file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

void ExperimentSpec::validate() const {
  try {
    walk.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (family != "endpoint" && family != "regenerated")
    throw ConfigError("family must be 'endpoint' or 'regenerated'");
  if (truncation.N < 1 || truncation.M < 1) throw ConfigError("N and M must be >= 1");
  if (iid_permutations < 0) throw ConfigError("iid_permutations must be >= 0");
  auto need_grid = [&] {
    if (n_grid.empty()) throw ConfigError("field 'n_grid' is required for " + to_string(kind));
    if (std::any_of(n_grid.begin(), n_grid.end(), [](std::uint64_t n) { return n == 0; }))
      throw ConfigError("n_grid entries must be >= 1");
  };
  switch (kind) {
    case ExperimentKind::Speed:
    case ExperimentKind::RegenStats:
      if (walk.horizon < 1) throw ConfigError("field 'horizon' must be >= 1");
      if (replicas < 2) throw ConfigError("field 'replicas' must be >= 2");
      break;
    case ExperimentKind::UpperTail:
      need_grid();
      if (replicas < 1) throw ConfigError("field 'replicas' must be >= 1");
      if (!(epsilon > 0.0)) throw ConfigError("field 'epsilon' must be > 0");
      if (speed && !(*speed + epsilon <= 1.0))
        throw ConfigError("speed + epsilon must be <= 1 for the upper tail");
      if (!speed && speed_replicas < 2) throw ConfigError("speed_replicas must be >= 2");
      if (std::any_of(tilts.begin(), tilts.end(), [](double t) { return !(t >= 0.0); }))
        throw ConfigError("upper-tail tilts must be >= 0");
      break;
    case ExperimentKind::LowerTail:
      need_grid();
      if (replicas < 1) throw ConfigError("field 'replicas' must be >= 1");
      if (level && !(*level >= 0.0)) throw ConfigError("field 'level' must be >= 0");
      if (!level && !(epsilon > 0.0)) throw ConfigError("field 'epsilon' must be > 0");
      if (!level && !speed && speed_replicas < 2) throw ConfigError("speed_replicas must be >= 2");
      break;
    case ExperimentKind::OracleCheck:
      need_grid();
      if (replicas < 1) throw ConfigError("field 'replicas' must be >= 1");
      for (auto n : n_grid)
        if (n > oracle::kDefaultMaxSteps)
          throw ResourceLimitError("oracle-check n = " + std::to_string(n) +
                                   " exceeds the exact-enumeration limit " +
                                   std::to_string(oracle::kDefaultMaxSteps));
      break;
  }
}

json ExperimentSpec::to_json() const {
  json j;
  j["name"] = name;
  j["kind"] = to_string(kind);
  j["b"] = walk.b;
  j["scheme"] = std::string(rrw::to_string(walk.scheme.kind));
  j["c"] = walk.scheme.c;
  j["k_max"] = walk.scheme.k_max;
  j["horizon"] = walk.horizon;
  j["seed"] = walk.seed;
  j["n_grid"] = n_grid;
  j["replicas"] = replicas;
  j["epsilon"] = epsilon;
  j["level"] = level ? json(*level) : json(nullptr);
  j["speed"] = speed ? json(*speed) : json(nullptr);
  j["speed_horizon"] = speed_horizon;
  j["speed_replicas"] = speed_replicas;
  j["N"] = truncation.N;
  j["M"] = truncation.M;
  j["margin"] = truncation.margin;
  j["tilts"] = tilts;
  j["pilot_replicas"] = pilot_replicas;
  j["family"] = family;
  j["lookahead"] = lookahead;
  j["audit"] = audit;
  j["iid_max_pairs"] = iid_max_pairs;
  j["iid_permutations"] = iid_permutations;
  return j;
}

std::string ExperimentSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

// ------------------------------------------------------------- presets

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list{
      {"thm1-upper-linear",
       "Upper-tail rate curve, linearly reinforced walk (c = 2, b = 2); h(X_n) >= (T + 0.1) n",
       "kind = upper-tail\nb = 2\nscheme = linear\nc = 2\nseed = 101\n"
       "epsilon = 0.1\nn_grid = 25, 50, 100, 200, 400\nreplicas = 20000\n"
       "speed_horizon = 100000\nspeed_replicas = 40\ntilts = 0, 0.25, 0.5, 1.0\npilot_replicas = 2000\n"},
      {"thm2-upper-orrw",
       "Upper-tail rate curve, once-reinforced walk (c = 2, b = 2); h(Y_n) >= (S + 0.1) n",
       "kind = upper-tail\nb = 2\nscheme = once\nc = 2\nseed = 102\n"
       "epsilon = 0.1\nn_grid = 10, 20, 40, 80, 160\nreplicas = 20000\n"
       "speed_horizon = 100000\nspeed_replicas = 40\ntilts = 0, 0.25, 0.5, 1.0\npilot_replicas = 2000\n"},
      {"thm3-lower-orrw",
       "Lower tail P(h(Y_n) <= 1), once-reinforced walk (c = 2, b = 2); expected exponential decay",
       "kind = lower-tail\nb = 2\nscheme = once\nc = 2\nseed = 103\nlevel = 1\n"
       "n_grid = 10, 20, 40, 80, 160\nreplicas = 20000\ntilts = 0, -0.25, -0.5, -1\n"
       "pilot_replicas = 2000\n"},
      {"eq13-lower-linear",
       "Lower tail P(h(X_n) <= 1), linearly reinforced walk (c = 2, b = 2); expected polynomial decay",
       "kind = lower-tail\nb = 2\nscheme = linear\nc = 2\nseed = 104\nlevel = 1\n"
       "n_grid = 10, 20, 40, 80, 160\nreplicas = 20000\ntilts = 0, -0.25, -0.5, -1\n"
       "pilot_replicas = 2000\n"},
      {"lemma21-tail",
       "Regeneration increments for c = 2, b = 70: moments, tail of H against 0.115^k, i.i.d. checks",
       "kind = regen-stats\nb = 70\nscheme = linear\nc = 2\nseed = 105\nhorizon = 100000\n"
       "replicas = 20\nN = 5\nM = 50\n"},
      {"speed-sanity",
       "Simple random walk (c = 1, b = 2): speed should match (b - 1) / (b + 1) = 1/3",
       "kind = speed\nb = 2\nscheme = linear\nc = 1\nseed = 106\nhorizon = 100000\nreplicas = 100\n"},
  };
  return list;
}

std::optional<Preset> find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  return std::nullopt;
}

// ------------------------------------------------------------ running

namespace {

struct Writer {
  const ExperimentSpec& spec;
  std::string hash;
  ResultBundle& bundle;

  std::ofstream open(const std::string& file) {
    const auto path = spec.out_dir / file;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.precision(17);
    bundle.files.push_back(path);
    return out;
  }
  std::string tag() const { return "," + std::to_string(spec.walk.seed) + "," + hash; }
};

json speed_json(const SpeedEstimate& s) {
  return {{"estimate", s.estimate},
          {"stderr", s.std_error},
          {"method", s.method == SpeedMethod::Direct ? "direct" : "ratio"},
          {"count", s.replicas},
          {"horizon", s.horizon}};
}

json tail_json(const TailEstimate& t) {
  return {{"n", t.n},           {"threshold", t.threshold},
          {"p_hat", t.p_hat},   {"stderr", t.std_error},
          {"method", std::string(to_string(t.method))},
          {"replicas", t.replicas}, {"tilt", t.tilt},
          {"hits", t.hits},     {"ess", t.ess},
          {"zero_hit", t.zero_hit}, {"degenerate_ess", t.degenerate_ess}};
}

int workers_for(const ExperimentSpec& spec) {
  return spec.workers > 0 ? spec.workers : default_workers();
}

double pilot_speed(const ExperimentSpec& spec, json& summary) {
  if (spec.speed) {
    summary["speed"] = {{"estimate", *spec.speed}, {"method", "given"}};
    return *spec.speed;
  }
  WalkConfig cfg = spec.walk;
  cfg.horizon = spec.speed_horizon;
  cfg.seed = splitmix64(spec.walk.seed ^ 0x5beedULL);
  const auto s = speed_direct(cfg, spec.speed_replicas, workers_for(spec));
  summary["speed"] = speed_json(s);
  return s.estimate;
}

void write_tail_tables(Writer& w, const std::vector<TailEstimate>& tails) {
  auto csv = w.open("tail.csv");
  csv << "n,p_hat,stderr,method,replicas,seed,spec_hash\n";
  for (const auto& t : tails)
    csv << t.n << ',' << t.p_hat << ',' << t.std_error << ',' << to_string(t.method) << ','
        << t.replicas << w.tag() << '\n';
  auto dat = w.open("tail.dat");
  dat << "# n p_hat\n";
  for (const auto& t : tails)
    if (!t.zero_hit) dat << t.n << ' ' << t.p_hat << '\n';
}

void write_rate_tables(Writer& w, const RateCurve& curve) {
  auto csv = w.open("rate_curve.csv");
  csv << "n,rate,ci_lo,ci_hi,seed,spec_hash\n";
  for (const auto& p : curve.points)
    csv << p.n << ',' << p.rate << ',' << p.ci_lo << ',' << p.ci_hi << w.tag() << '\n';
  auto dat = w.open("rate_curve.dat");
  dat << "# n rate\n";
  for (const auto& p : curve.points) dat << p.n << ' ' << p.rate << '\n';
}

json rate_json(const RateCurve& curve) {
  json pts = json::array();
  for (const auto& p : curve.points)
    pts.push_back({{"n", p.n}, {"rate", p.rate}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}});
  return {{"points", pts},
          {"plateau", curve.plateau},
          {"plateau_ci", {curve.plateau_lo, curve.plateau_hi}},
          {"spread", {curve.spread_min, curve.spread_max}},
          {"too_few_points", curve.too_few_points}};
}

std::vector<TailEstimate> run_tails(const ExperimentSpec& spec, TailSide side,
                                    const std::function<double(std::uint64_t)>& threshold,
                                    ResultBundle& bundle) {
  const int workers = workers_for(spec);
  std::vector<TailEstimate> tails;
  for (auto n : spec.n_grid) {
    TailEvent ev;
    ev.side = side;
    ev.threshold = threshold(n);
    ev.family = spec.family == "regenerated" ? HeightFamily::Regenerated : HeightFamily::Endpoint;
    ev.lookahead = spec.lookahead;
    ev.margin = spec.truncation.margin;
    const double tilt = spec.tilts.size() > 1
                            ? select_tilt(spec.walk, ev, n, spec.tilts, spec.pilot_replicas, workers)
                            : spec.tilts.front();
    auto est = estimate_tail(spec.walk, ev, n, spec.replicas, workers, tilt);
    if (est.zero_hit)
      bundle.notes.push_back("n = " + std::to_string(n) +
                             ": no replica hit the event; p_hat is the 3/replicas upper bound");
    if (est.degenerate_ess)
      bundle.notes.push_back("n = " + std::to_string(n) + ": effective sample size below " +
                             std::to_string(static_cast<int>(kMinEss)));
    tails.push_back(est);
  }
  return tails;
}

void run_speed(const ExperimentSpec& spec, Writer& w, json& summary) {
  const auto sample = collect_regeneration(spec.walk, spec.replicas, workers_for(spec),
                                           spec.truncation.margin);
  const auto direct = speed_direct(sample.final_heights, spec.walk.horizon);
  summary["speed_direct"] = speed_json(direct);
  auto csv = w.open("speed.csv");
  csv << "method,estimate,stderr,count,horizon,seed,spec_hash\n";
  csv << "direct," << direct.estimate << ',' << direct.std_error << ',' << direct.replicas << ','
      << direct.horizon << w.tag() << '\n';
  if (sample.pairs.size() >= kMinDiagnosticPairs) {
    const auto ratio = speed_ratio(sample.pairs);
    summary["speed_ratio"] = speed_json(ratio);
    csv << "ratio," << ratio.estimate << ',' << ratio.std_error << ',' << ratio.replicas << ','
        << spec.walk.horizon << w.tag() << '\n';
  } else {
    w.bundle.notes.push_back("too few regeneration increments for the ratio estimator");
  }
}

void run_upper(const ExperimentSpec& spec, Writer& w, json& summary) {
  const double speed = pilot_speed(spec, summary);
  if (!(speed + spec.epsilon <= 1.0))
    throw std::invalid_argument("estimated speed + epsilon exceeds 1; choose a smaller epsilon");
  const auto tails = run_tails(
      spec, TailSide::Upper,
      [&](std::uint64_t n) { return (speed + spec.epsilon) * static_cast<double>(n); }, w.bundle);
  json jt = json::array();
  for (const auto& t : tails) jt.push_back(tail_json(t));
  summary["tails"] = jt;
  const auto curve = rate_curve(tails, spec.walk.seed);
  summary["rate_curve"] = rate_json(curve);
  write_tail_tables(w, tails);
  write_rate_tables(w, curve);

  if (spec.audit) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> nm;
    for (auto n : spec.n_grid)
      for (auto m : spec.n_grid)
        if (n <= m) nm.emplace_back(n, m);
    const auto N = spec.truncation.N == kUnbounded ? 1 : spec.truncation.N;
    const auto checks = subadditivity_audit(curve, spec.walk.b, N, nm);
    json ja = json::array();
    for (const auto& c : checks)
      ja.push_back({{"n", c.n}, {"m", c.m}, {"lhs", c.lhs}, {"rhs", c.rhs},
                    {"mc_error", c.mc_error}, {"ok", c.ok}});
    summary["subadditivity_audit"] = ja;
  }
}

void run_lower(const ExperimentSpec& spec, Writer& w, json& summary) {
  std::function<double(std::uint64_t)> threshold;
  if (spec.level) {
    const double level = *spec.level;
    threshold = [level](std::uint64_t) { return level; };
  } else {
    const double speed = pilot_speed(spec, summary);
    threshold = [speed, eps = spec.epsilon](std::uint64_t n) {
      return std::max(0.0, (speed - eps) * static_cast<double>(n));
    };
  }
  const auto tails = run_tails(spec, TailSide::Lower, threshold, w.bundle);
  json jt = json::array();
  for (const auto& t : tails) jt.push_back(tail_json(t));
  summary["tails"] = jt;
  const auto curve = rate_curve(tails, spec.walk.seed);
  summary["rate_curve"] = rate_json(curve);
  write_tail_tables(w, tails);
  write_rate_tables(w, curve);

  std::vector<DecayPoint> pts;
  for (const auto& t : tails)
    if (!t.zero_hit) pts.push_back({static_cast<double>(t.n), t.p_hat, t.std_error});
  try {
    const auto fit = decay_classify(pts);
    summary["decay"] = {{"decision", std::string(to_string(fit.decision))},
                        {"poly_slope", fit.poly_slope},
                        {"poly_slope_se", fit.poly_slope_se},
                        {"poly_r2", fit.poly_r2},
                        {"exp_rate", fit.exp_rate},
                        {"exp_rate_se", fit.exp_rate_se},
                        {"exp_r2", fit.exp_r2},
                        {"ic_gap", fit.ic_gap}};
  } catch (const std::invalid_argument& e) {
    w.bundle.notes.push_back(std::string("decay classification skipped: ") + e.what());
  }
}

json tail_fit_json(const IncrementTailFit& f) {
  json checks = json::array();
  for (const auto& c : f.bound_checks)
    checks.push_back({{"k", c.k}, {"survival", c.survival}, {"stderr", c.std_error},
                      {"bound", c.bound}, {"ok", c.ok}});
  return {{"hazard", f.hazard},
          {"rate", f.rate},
          {"rate_ci", {f.rate_lo, f.rate_hi}},
          {"hazard_slope", f.hazard_slope},
          {"hazard_slope_se", f.hazard_slope_se},
          {"curvature_violation", f.curvature_violation},
          {"degenerate", f.degenerate},
          {"insufficient_data", f.insufficient_data},
          {"bound_checks", checks},
          {"bound_violation", f.bound_violation}};
}

void run_regen(const ExperimentSpec& spec, Writer& w, json& summary) {
  const auto sample = collect_regeneration(spec.walk, spec.replicas, workers_for(spec),
                                           spec.truncation.margin);
  summary["margin"] = sample.margin;
  summary["pairs"] = sample.pairs.size();
  summary["speed_direct"] = speed_json(speed_direct(sample.final_heights, spec.walk.horizon));
  if (sample.pairs.size() < kMinDiagnosticPairs) {
    w.bundle.notes.push_back("too few regeneration increments for regeneration statistics");
    return;
  }
  summary["speed_ratio"] = speed_json(speed_ratio(sample.pairs));

  const auto full = regen_moments(sample.pairs);
  const auto filtered = filter_short_tight(sample.pairs, spec.truncation);
  const auto trunc = regen_moments(filtered.pairs);
  summary["moments"] = {{"A", full.A}, {"B", full.B}, {"var_A", full.var_A},
                        {"var_B", full.var_B}, {"cov_AB", full.cov_AB}};
  summary["truncated"] = {{"N", spec.truncation.N}, {"M", spec.truncation.M},
                          {"kept", filtered.kept}, {"dropped", filtered.dropped},
                          {"A_NM", trunc.A}, {"B_NM", trunc.B}};

  const bool bound_regime = spec.walk.scheme.kind == SchemeKind::Linear &&
                            spec.walk.scheme.c == 2.0 && spec.walk.b >= 70;
  const auto fit_h = increment_tail_fit(sample.pairs, IncrementField::Height,
                                        bound_regime ? std::optional(0.115) : std::nullopt);
  const auto fit_t = increment_tail_fit(sample.pairs, IncrementField::DeltaT);
  summary["tail_fit"] = {{"H", tail_fit_json(fit_h)}, {"delta_t", tail_fit_json(fit_t)}};

  auto csv = w.open("survival.csv");
  csv << "field,m,survival,stderr,at_risk,seed,spec_hash\n";
  for (const auto& [name, fit] : {std::pair{"H", &fit_h}, std::pair{"delta_t", &fit_t}})
    for (const auto& s : fit->survival)
      csv << name << ',' << s.m << ',' << s.survival << ',' << s.std_error << ',' << s.at_risk
          << w.tag() << '\n';
  auto dat = w.open("survival_H.dat");
  dat << "# m P(H>=m)\n";
  for (const auto& s : fit_h.survival) dat << s.m << ' ' << s.survival << '\n';

  // Per-replica i.i.d. diagnostics on a prefix of each replica's increments.
  std::size_t eligible = 0, passed = 0;
  json reps = json::array();
  for (std::size_t r = 0; r < spec.replicas; ++r) {
    auto pairs = sample.replica_pairs(r);
    if (pairs.size() > spec.iid_max_pairs) pairs = pairs.first(spec.iid_max_pairs);
    const auto rep = iid_diagnostics(pairs, splitmix64(spec.walk.seed + r), spec.iid_permutations);
    if (rep.insufficient_data) continue;
    ++eligible;
    passed += rep.autocorr_pass;
    reps.push_back({{"replica", r},
                    {"m", rep.m},
                    {"acf_delta_t", rep.delta_t.autocorr},
                    {"acf_H", rep.height.autocorr},
                    {"band", rep.band},
                    {"outside_band", rep.outside_band},
                    {"ks_delta_t", rep.delta_t.ks_statistic},
                    {"ks_delta_t_p", rep.delta_t.ks_p_value},
                    {"ks_H", rep.height.ks_statistic},
                    {"ks_H_p", rep.height.ks_p_value},
                    {"pass", rep.autocorr_pass}});
  }
  summary["iid"] = {{"eligible_replicas", eligible},
                    {"passed", passed},
                    {"pass_rate", eligible ? static_cast<double>(passed) / eligible : 0.0},
                    {"replicas", reps}};
}

void run_oracle_check(const ExperimentSpec& spec, Writer& w, json& summary) {
  const int workers = workers_for(spec);
  auto csv = w.open("oracle_check.csv");
  csv << "n,height,exact,mc,stderr,diff,within_3se,seed,spec_hash\n";
  bool all_ok = true;
  double worst = 0.0;
  json rows = json::array();
  for (auto n : spec.n_grid) {
    const auto law = oracle::exact_distribution(spec.walk.b, spec.walk.scheme,
                                                static_cast<std::uint32_t>(n));
    WalkConfig cfg = spec.walk;
    cfg.horizon = n;
    cfg.record_heights = false;
    const auto heights = map_replicas(spec.replicas, workers, [&](std::size_t r) {
      WalkConfig c = cfg;
      c.replica = r;
      return run_endpoint(c).final_height;
    });
    std::vector<std::size_t> counts(n + 1, 0);
    for (auto h : heights) ++counts[static_cast<std::size_t>(h)];
    for (std::size_t h = 0; h <= n; ++h) {
      const double p = law.at(h);
      const double mc = static_cast<double>(counts[h]) / static_cast<double>(spec.replicas);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(spec.replicas));
      const double diff = std::abs(mc - p);
      const bool ok = diff <= 3.0 * se;
      all_ok = all_ok && ok;
      if (se > 0) worst = std::max(worst, diff / se);
      csv << n << ',' << h << ',' << p << ',' << mc << ',' << se << ',' << diff << ','
          << (ok ? "true" : "false") << w.tag() << '\n';
      rows.push_back({{"n", n}, {"height", h}, {"exact", p}, {"mc", mc}, {"stderr", se},
                      {"within_3se", ok}});
    }
  }
  summary["oracle_check"] = {{"all_within_3se", all_ok}, {"max_z", worst}, {"atoms", rows}};
}

}  // namespace

ResultBundle run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  ResultBundle bundle;
  fs::create_directories(spec.out_dir);
  Writer w{spec, spec.hash(), bundle};

  json summary;
  summary["spec"] = spec.to_json();
  summary["spec_hash"] = w.hash;
  summary["seed"] = spec.walk.seed;
  summary["version"] = kVersion;
  switch (spec.kind) {
    case ExperimentKind::Speed: run_speed(spec, w, summary); break;
    case ExperimentKind::UpperTail: run_upper(spec, w, summary); break;
    case ExperimentKind::LowerTail: run_lower(spec, w, summary); break;
    case ExperimentKind::RegenStats: run_regen(spec, w, summary); break;
    case ExperimentKind::OracleCheck: run_oracle_check(spec, w, summary); break;
  }
  summary["notes"] = bundle.notes;
  bundle.summary = summary;

  {
    auto out = w.open("summary.json");
    out << summary.dump(2) << '\n';
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  {
    auto out = w.open("run_info.json");
    out << json{{"spec_hash", w.hash}, {"wall_clock_seconds", wall},
                {"workers", workers_for(spec)}, {"version", kVersion}}
               .dump(2)
        << '\n';
  }
  return bundle;
}

}  // namespace rrw
