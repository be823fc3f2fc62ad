#include "stockdp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stockdp/io.hpp"

namespace stockdp {

using json = nlohmann::json;

ConfigError::ConfigError(const std::string& message, int line, int column)
    : std::runtime_error(message), line_(line), column_(column) {}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.tol = solver.tol;
  o.v_max = solver.v_max;
  o.max_iterations = solver.max_iterations;
  return o;
}

namespace {

struct Position {
  int line = 0;
  int column = 0;
};

Position position_at(std::string_view text, std::size_t offset) {
  Position p{1, 1};
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

class Parser {
 public:
  Parser(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    // Finds each key of the dotted path in turn; array indices are skipped.
    std::size_t pos = 0;
    bool found = true;
    std::stringstream ss(path);
    std::string key;
    while (std::getline(ss, key, '.')) {
      if (key.empty() || key[0] == '[') continue;
      const std::size_t at = text_.find("\"" + key + "\"", pos);
      if (at == std::string_view::npos) {
        found = false;
        break;
      }
      pos = at;
    }
    std::ostringstream os;
    if (found && !path.empty()) {
      const Position p = position_at(text_, pos);
      os << source_ << ":" << p.line << ":" << p.column << ": " << path << ": " << message;
      throw ConfigError(os.str(), p.line, p.column);
    }
    os << source_ << ": " << (path.empty() ? "" : path + ": ") << message;
    throw ConfigError(os.str());
  }

  const json& object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!keys.count(it.key())) fail(join(path, it.key()), "unknown key");
    return j;
  }

  const json& member(const json& j, const std::string& path, const char* key) const {
    if (!j.contains(key)) fail(path, std::string("missing key \"") + key + "\"");
    return j.at(key);
  }

  double number(const json& j, const std::string& path, bool allow_inf = false) const {
    if (j.is_number()) return j.get<double>();
    if (allow_inf && j.is_string() && j.get<std::string>() == "inf") return kInf;
    fail(path, allow_inf ? "expected a number or \"inf\"" : "expected a number");
  }

  std::int64_t integer(const json& j, const std::string& path) const {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
      const double v = j.get<double>();
      if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    fail(path, "expected an integer");
  }

  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::string_view text_;
  std::string source_;
};

HoldingCost parse_holding(const Parser& P, const json& j) {
  const std::string path = "model.holding";
  P.object(j, path, {"kind", "pieces", "points"});
  const std::string kind = P.string(P.member(j, path, "kind"), path + ".kind");
  if (kind == "piecewise_linear") {
    const json& arr = P.member(j, path, "pieces");
    if (!arr.is_array()) P.fail(path + ".pieces", "expected an array of [slope, intercept]");
    std::vector<HoldingCost::Piece> pieces;
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 2) P.fail(path + ".pieces", "each piece is [slope, intercept]");
      pieces.push_back({P.number(e[0], path + ".pieces"), P.number(e[1], path + ".pieces")});
    }
    return HoldingCost::piecewise_linear(std::move(pieces));
  }
  if (kind == "tabulated") {
    const json& arr = P.member(j, path, "points");
    if (!arr.is_array()) P.fail(path + ".points", "expected an array of [x, h]");
    std::vector<HoldingCost::Node> nodes;
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 2) P.fail(path + ".points", "each point is [x, h]");
      nodes.push_back({P.number(e[0], path + ".points"), P.number(e[1], path + ".points", true)});
    }
    return HoldingCost::tabulated(std::move(nodes));
  }
  P.fail(path + ".kind", "expected \"piecewise_linear\" or \"tabulated\"");
}

ConstraintRegime parse_regime(const Parser& P, const json& m) {
  const std::string name = P.string(P.member(m, "model", "regime"), "model.regime");
  const double a_bar = m.contains("a_bar") ? P.number(m.at("a_bar"), "model.a_bar", true) : kInf;
  const double x_bar = m.contains("x_bar") ? P.number(m.at("x_bar"), "model.x_bar", true) : kInf;
  ConstraintRegime r;
  if (name == "U")
    r.kind = ConstraintRegime::Kind::U;
  else if (name == "BO")
    r.kind = ConstraintRegime::Kind::BO;
  else if (name == "BS")
    r.kind = ConstraintRegime::Kind::BS;
  else if (name == "BOS")
    r.kind = ConstraintRegime::Kind::BOS;
  else
    P.fail("model.regime", "expected one of U, BO, BS, BOS");
  r.a_bar = a_bar;
  r.x_bar = x_bar;
  return r;
}

// Maps a model violation message to the config key it concerns.
std::string violation_path(const std::string& msg) {
  if (msg.rfind("h:", 0) == 0) return "model.holding";
  if (msg.rfind("demand", 0) == 0) return "model.demand";
  if (msg.rfind("regime", 0) == 0) {
    if (msg.find("a_bar") != std::string::npos) return "model.a_bar";
    if (msg.find("x_bar") != std::string::npos) return "model.x_bar";
    return "model.regime";
  }
  if (msg.rfind("K ", 0) == 0) return "model.K";
  if (msg.rfind("c_bar", 0) == 0) return "model.c_bar";
  if (msg.rfind("alpha", 0) == 0) return "model.alpha";
  if (msg.find("x_min") != std::string::npos) return "grid.x_min";
  if (msg.find("x_max") != std::string::npos) return "grid.x_max";
  if (msg.find("step") != std::string::npos) return "grid.step";
  return "model";
}

RunConfig parse_tree(const Parser& P, const json& root) {
  RunConfig cfg;
  P.object(root, "", {"model", "grid", "solver", "sim", "output"});

  const json& m = P.object(P.member(root, "", "model"), "model",
                           {"K", "c_bar", "alpha", "holding", "demand", "regime", "a_bar", "x_bar", "shortfall"});
  cfg.model.K = P.number(P.member(m, "model", "K"), "model.K");
  cfg.model.c_bar = P.number(P.member(m, "model", "c_bar"), "model.c_bar");
  cfg.model.alpha = P.number(P.member(m, "model", "alpha"), "model.alpha");
  cfg.model.h = parse_holding(P, P.member(m, "model", "holding"));
  const json& dem = P.member(m, "model", "demand");
  if (!dem.is_array()) P.fail("model.demand", "expected an array of [d, p]");
  std::vector<DemandDistribution::Atom> atoms;
  for (const auto& e : dem) {
    if (!e.is_array() || e.size() != 2) P.fail("model.demand", "each atom is [d, p]");
    atoms.push_back({P.number(e[0], "model.demand"), P.number(e[1], "model.demand")});
  }
  cfg.model.demand = DemandDistribution(std::move(atoms));
  cfg.model.regime = parse_regime(P, m);
  const std::string shortfall = m.contains("shortfall") ? P.string(m.at("shortfall"), "model.shortfall") : "backorders";
  if (shortfall == "backorders")
    cfg.model.shortfall = Shortfall::Backorders;
  else if (shortfall == "lost_sales")
    cfg.model.shortfall = Shortfall::LostSales;
  else
    P.fail("model.shortfall", "expected \"backorders\" or \"lost_sales\"");

  const json& g = P.object(P.member(root, "", "grid"), "grid", {"x_min", "x_max", "step"});
  cfg.grid.x_min = P.number(P.member(g, "grid", "x_min"), "grid.x_min");
  cfg.grid.x_max = P.number(P.member(g, "grid", "x_max"), "grid.x_max");
  cfg.grid.step = P.number(P.member(g, "grid", "step"), "grid.step");

  if (root.contains("solver")) {
    const json& s = P.object(root.at("solver"), "solver", {"tol", "v_max", "max_iterations", "horizon"});
    if (s.contains("tol")) cfg.solver.tol = P.number(s.at("tol"), "solver.tol");
    if (s.contains("v_max") && !s.at("v_max").is_null()) cfg.solver.v_max = P.number(s.at("v_max"), "solver.v_max");
    if (s.contains("max_iterations"))
      cfg.solver.max_iterations = static_cast<int>(P.integer(s.at("max_iterations"), "solver.max_iterations"));
    if (s.contains("horizon")) {
      const json& h = s.at("horizon");
      if (h.is_string() && h.get<std::string>() == "inf")
        cfg.solver.horizon = std::nullopt;
      else
        cfg.solver.horizon = static_cast<int>(P.integer(h, "solver.horizon"));
    }
    if (!(cfg.solver.tol > 0.0)) P.fail("solver.tol", "tol must be > 0");
    if (cfg.solver.v_max && !(*cfg.solver.v_max > 0.0)) P.fail("solver.v_max", "v_max must be > 0");
    if (cfg.solver.max_iterations < 1) P.fail("solver.max_iterations", "max_iterations must be >= 1");
    if (cfg.solver.horizon && *cfg.solver.horizon < 0) P.fail("solver.horizon", "horizon must be >= 0 or \"inf\"");
  }

  if (root.contains("sim")) {
    const json& s = P.object(root.at("sim"), "sim",
                             {"seed", "n_paths", "horizon_cap", "discount_tail_epsilon", "start_states"});
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) P.fail("sim.seed", "expected a nonnegative integer");
      cfg.sim.seed = s.at("seed").get<std::uint64_t>();
    }
    if (s.contains("n_paths")) cfg.sim.n_paths = P.integer(s.at("n_paths"), "sim.n_paths");
    if (s.contains("horizon_cap")) cfg.sim.horizon_cap = static_cast<int>(P.integer(s.at("horizon_cap"), "sim.horizon_cap"));
    if (s.contains("discount_tail_epsilon"))
      cfg.sim.discount_tail_epsilon = P.number(s.at("discount_tail_epsilon"), "sim.discount_tail_epsilon");
    if (s.contains("start_states")) {
      const json& xs = s.at("start_states");
      if (!xs.is_array() || xs.empty()) P.fail("sim.start_states", "expected a nonempty array of states");
      cfg.sim.start_states.clear();
      for (const auto& x : xs) cfg.sim.start_states.push_back(P.number(x, "sim.start_states"));
    }
    if (cfg.sim.n_paths < 1) P.fail("sim.n_paths", "n_paths must be >= 1");
    if (cfg.sim.horizon_cap < 0) P.fail("sim.horizon_cap", "horizon_cap must be >= 0");
    if (!(cfg.sim.discount_tail_epsilon > 0.0))
      P.fail("sim.discount_tail_epsilon", "discount_tail_epsilon must be > 0");
  }

  if (root.contains("output")) {
    const json& o = P.object(root.at("output"), "output", {"dir", "format"});
    if (o.contains("dir")) cfg.output.dir = P.string(o.at("dir"), "output.dir");
    if (o.contains("format")) cfg.output.format = P.string(o.at("format"), "output.format");
    if (cfg.output.format != "csv" && cfg.output.format != "jsonl")
      P.fail("output.format", "expected \"csv\" or \"jsonl\"");
  }

  for (const auto& msg : validate(cfg.model)) P.fail(violation_path(msg), msg);
  std::optional<Grid> grid;
  try {
    grid.emplace(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.step);
  } catch (const std::invalid_argument& e) {
    P.fail(violation_path(e.what()), e.what());
  }
  for (const auto& msg : grid_violations(*grid, cfg.model)) P.fail(violation_path(msg), msg);
  if (cfg.model.regime.bounded_orders_flag() && !grid->steps(cfg.model.regime.a_bar))
    P.fail("model.a_bar", "a_bar must be a multiple of the grid step");
  for (double x : cfg.sim.start_states)
    if (!grid->index_of(x)) P.fail("sim.start_states", "start state " + format_double(x) + " is not a grid point");
  return cfg;
}

json number_or_inf(double v) { return std::isinf(v) ? json("inf") : json(v); }

json to_tree(const RunConfig& cfg) {
  json m;
  m["K"] = cfg.model.K;
  m["c_bar"] = cfg.model.c_bar;
  m["alpha"] = cfg.model.alpha;
  json h;
  if (cfg.model.h.kind() == HoldingCost::Kind::PiecewiseLinear) {
    h["kind"] = "piecewise_linear";
    h["pieces"] = json::array();
    for (const auto& p : cfg.model.h.pieces()) h["pieces"].push_back({p.slope, p.intercept});
  } else {
    h["kind"] = "tabulated";
    h["points"] = json::array();
    for (const auto& n : cfg.model.h.nodes()) h["points"].push_back({n.x, number_or_inf(n.h)});
  }
  m["holding"] = h;
  m["demand"] = json::array();
  for (const auto& a : cfg.model.demand.atoms()) m["demand"].push_back({a.d, a.p});
  m["regime"] = to_string(cfg.model.regime.kind);
  m["a_bar"] = number_or_inf(cfg.model.regime.a_bar);
  m["x_bar"] = number_or_inf(cfg.model.regime.x_bar);
  m["shortfall"] = to_string(cfg.model.shortfall);

  json root;
  root["model"] = m;
  root["grid"] = {{"x_min", cfg.grid.x_min}, {"x_max", cfg.grid.x_max}, {"step", cfg.grid.step}};
  root["solver"] = {{"tol", cfg.solver.tol},
                    {"v_max", cfg.solver.v_max ? json(*cfg.solver.v_max) : json(nullptr)},
                    {"max_iterations", cfg.solver.max_iterations},
                    {"horizon", cfg.solver.horizon ? json(*cfg.solver.horizon) : json("inf")}};
  root["sim"] = {{"seed", cfg.sim.seed},
                 {"n_paths", cfg.sim.n_paths},
                 {"horizon_cap", cfg.sim.horizon_cap},
                 {"discount_tail_epsilon", cfg.sim.discount_tail_epsilon},
                 {"start_states", cfg.sim.start_states}};
  root["output"] = {{"dir", cfg.output.dir}, {"format", cfg.output.format}};
  return root;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  Parser P(text, source);
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const Position p = position_at(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream os;
    os << source << ":" << p.line << ":" << p.column << ": malformed JSON: " << e.what();
    throw ConfigError(os.str(), p.line, p.column);
  }
  return parse_tree(P, root);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) { return to_tree(cfg).dump(2) + "\n"; }

void save_config(const RunConfig& cfg, const std::string& path) { write_file_atomic(path, dump_config(cfg)); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(dump_config(cfg)); }

}  // namespace stockdp
