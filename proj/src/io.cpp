#include "sso/io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace sso {

using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(what + ": not a number: '" + s + "'");
  }
}

// One CSV pass shared by fields and masks.
Eigen::VectorXd read_node_csv(const Grid& g, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const std::string expected = g.dimension() == 1 ? "ix,value" : "ix,iy,value";
  if (split(line, ',') != split(expected, ',')) throw InvalidArgument(path.string() + ": expected header " + expected);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.size());
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cols = split(line, ',');
    if (int(cols.size()) != g.dimension() + 1) throw InvalidArgument(path.string() + ": malformed row '" + line + "'");
    const int ix = int(to_double(cols[0], path.string()));
    const int iy = g.dimension() == 2 ? int(to_double(cols[1], path.string())) : 0;
    if (ix < 0 || iy < 0 || ix >= g.nx() || iy >= g.ny()) throw InvalidArgument(path.string() + ": node out of range");
    v[g.index(ix, iy)] = to_double(cols.back(), path.string());
  }
  return v;
}

void write_node_csv(const fs::path& path, const Grid& g, const std::function<std::string(Index)>& value) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << (g.dimension() == 1 ? "ix,value\n" : "ix,iy,value\n");
  for (Index i = 0; i < g.size(); ++i) {
    out << g.ix(i) << ',';
    if (g.dimension() == 2) out << g.iy(i) << ',';
    out << value(i) << '\n';
  }
}

json grid_json(const Grid& g) {
  json j;
  j["dimension"] = g.dimension();
  j["extents"] = g.dimension() == 1 ? json::array({g.extent()[0]}) : json::array({g.extent()[0], g.extent()[1]});
  j["nodes"] = g.dimension() == 1 ? json::array({g.nx()}) : json::array({g.nx(), g.ny()});
  j["h"] = g.h();
  j["origin"] = g.dimension() == 1 ? json::array({g.origin()[0]}) : json::array({g.origin()[0], g.origin()[1]});
  j["geometry"] = g.is_disk() ? "disk" : "box";
  return j;
}

// Config values -------------------------------------------------------------

struct Value {
  enum Kind { number, text, list } kind = text;
  double num = 0;
  std::string str;
  std::vector<Value> items;
};

class ValueParser {
 public:
  ValueParser(std::string_view s, std::string key) : s_(s), key_(std::move(key)) {}

  Value parse() {
    Value v = value();
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidArgument("config key '" + key_ + "': " + why);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  Value value() {
    skip();
    if (pos_ >= s_.size()) fail("missing value");
    Value v;
    if (s_[pos_] == '[') {
      v.kind = Value::list;
      ++pos_;
      skip();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(value());
        skip();
        if (pos_ >= s_.size()) fail("unterminated list");
        if (s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        fail("expected ',' or ']'");
      }
    }
    if (s_[pos_] == '"' || s_[pos_] == '\'') {
      const char q = s_[pos_++];
      const std::size_t end = s_.find(q, pos_);
      if (end == std::string_view::npos) fail("unterminated string");
      v.str = std::string(s_.substr(pos_, end - pos_));
      pos_ = end + 1;
      return v;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']') ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.pop_back();
    if (tok.empty()) fail("missing value");
    char* end = nullptr;
    const double d = std::strtod(tok.c_str(), &end);
    if (end && *end == '\0') {
      v.kind = Value::number;
      v.num = d;
    } else {
      v.str = tok;
    }
    return v;
  }

  std::string_view s_;
  std::string key_;
  std::size_t pos_ = 0;
};

double as_number(const Value& v, const std::string& key) {
  if (v.kind != Value::number) throw InvalidArgument("config key '" + key + "': expected a number");
  return v.num;
}

int as_int(const Value& v, const std::string& key) {
  const double d = as_number(v, key);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw InvalidArgument("config key '" + key + "': expected an integer");
  return int(d);
}

std::string as_text(const Value& v, const std::string& key) {
  if (v.kind != Value::text) throw InvalidArgument("config key '" + key + "': expected a string");
  return v.str;
}

std::vector<double> as_numbers(const Value& v, const std::string& key) {
  if (v.kind == Value::number) return {v.num};
  if (v.kind != Value::list) throw InvalidArgument("config key '" + key + "': expected a list of numbers");
  std::vector<double> out;
  for (const Value& item : v.items) out.push_back(as_number(item, key));
  return out;
}

std::string list_text(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + format_double(xs[i]);
  return s + "]";
}

std::string backend_name(Backend b) { return b == Backend::multiphase ? "multiphase" : "relaxed"; }

std::string init_name(InitKind k) {
  switch (k) {
    case InitKind::two_balls:
      return "two_balls";
    case InitKind::random:
      return "random";
    default:
      return "file";
  }
}

json state_scalars(const PhaseState& s) {
  const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j;
  j["lambda1_plus"] = s.lambda1_plus;
  j["lambda1_minus"] = s.lambda1_minus;
  j["lambda2"] = s.lambda2;
  j["a_plus"] = s.a_plus;
  j["a_minus"] = s.a_minus;
  j["a_plus_raw"] = num(s.a_plus_raw);
  j["a_minus_raw"] = num(s.a_minus_raw);
  j["lambda"] = s.lambda;
  j["objective"] = s.objective;
  j["volume"] = s.volume();
  j["volume_plus"] = double(s.mask_plus.count()) * s.grid().cell_volume();
  j["volume_minus"] = double(s.mask_minus.count()) * s.grid().cell_volume();
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  return j;
}

double scalar_or_nan(const json& j, const char* key) {
  return j.contains(key) && j[key].is_number() ? j[key].get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_field_csv(const fs::path& path, const Field& f) {
  write_node_csv(path, f.grid(), [&](Index i) { return format_double(f[i]); });
}

Field read_field_csv(const GridPtr<double>& grid, const fs::path& path) {
  Eigen::VectorXd v = read_node_csv(*grid, path);
  for (Index i = 0; i < v.size(); ++i)
    if (!grid->inside()[i] && v[i] != 0) throw InvalidArgument(path.string() + ": nonzero value outside the domain");
  return Field(grid, std::move(v));
}

void write_mask_csv(const fs::path& path, const Grid& grid, const Mask& mask) {
  write_node_csv(path, grid, [&](Index i) { return std::string(mask[i] ? "1" : "0"); });
}

Mask read_mask_csv(const GridPtr<double>& grid, const fs::path& path) {
  const Eigen::VectorXd v = read_node_csv(*grid, path);
  return v.array() != 0;
}

void write_grid_json(const fs::path& path, const Grid& grid) { spit(path, grid_json(grid).dump(2) + "\n"); }

GridPtr<double> read_grid_json(const fs::path& path) {
  const json j = json::parse(slurp(path));
  Geometry geo;
  geo.dimension = j.at("dimension").get<int>();
  const auto ext = j.at("extents").get<std::vector<double>>();
  const auto nodes = j.at("nodes").get<std::vector<int>>();
  if (int(ext.size()) != geo.dimension || int(nodes.size()) != geo.dimension)
    throw InvalidArgument(path.string() + ": extents/nodes do not match dimension");
  geo.extent = Point(ext[0], geo.dimension == 2 ? ext[1] : 0.0);
  if (j.contains("origin")) {
    const auto o = j["origin"].get<std::vector<double>>();
    geo.origin = Point(o.at(0), geo.dimension == 2 ? o.at(1) : 0.0);
  }
  geo.disk = j.value("geometry", std::string("box")) == "disk";
  return build_grid(geo, {nodes[0], geo.dimension == 2 ? nodes[1] : 1});
}

Field read_field_for_init(const GridPtr<double>& grid, const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "u.csv";
  if (!fs::exists(p)) throw InvalidArgument("init file not found: " + p.string());
  return read_field_csv(grid, p);
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::vector<double> box, origin, resolution;
  std::string geometry = "box";
  bool have_dimension = false;
  std::vector<Value> centers;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    char q = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == q) quoted = false;
      } else if (ch == '"' || ch == '\'') {
        quoted = true;
        q = ch;
      } else if (ch == '#') {
        line.resize(i);
        break;
      }
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const Value v = ValueParser(trim(line.substr(eq + 1)), key).parse();
    auto& s = c.solver;
    if (key == "dimension") {
      c.geometry.dimension = as_int(v, key);
      have_dimension = true;
    } else if (key == "box") {
      box = as_numbers(v, key);
    } else if (key == "origin") {
      origin = as_numbers(v, key);
    } else if (key == "geometry") {
      geometry = as_text(v, key);
      if (geometry != "box" && geometry != "disk") throw InvalidArgument("config key 'geometry': expected box or disk");
    } else if (key == "resolution") {
      resolution = as_numbers(v, key);
    } else if (key == "lambda") {
      s.lambda = as_number(v, key);
    } else if (key == "lambdas") {
      c.lambdas = as_numbers(v, key);
    } else if (key == "backend") {
      const std::string b = as_text(v, key);
      if (b == "multiphase")
        s.backend = Backend::multiphase;
      else if (b == "relaxed")
        s.backend = Backend::relaxed;
      else
        throw InvalidArgument("config key 'backend': expected multiphase or relaxed");
    } else if (key == "p_schedule") {
      s.p_schedule = as_numbers(v, key);
    } else if (key == "eps_vol") {
      s.eps_vol = as_number(v, key);
    } else if (key == "fidelity_weight") {
      s.fidelity_weight = as_number(v, key);
    } else if (key == "step_size") {
      s.step_size = as_number(v, key);
    } else if (key == "max_outer_iters") {
      s.max_outer_iters = as_int(v, key);
    } else if (key == "max_inner_iters") {
      s.max_inner_iters = as_int(v, key);
    } else if (key == "tol_objective") {
      s.tol_objective = as_number(v, key);
    } else if (key == "kappa") {
      s.kappa = as_number(v, key);
    } else if (key == "seed") {
      const int seed = as_int(v, key);
      if (seed < 0) throw InvalidArgument("config key 'seed': must be nonnegative");
      s.seed = unsigned(seed);
    } else if (key == "init") {
      const std::string k = as_text(v, key);
      if (k == "two_balls")
        s.init = InitKind::two_balls;
      else if (k == "random")
        s.init = InitKind::random;
      else if (k == "file")
        s.init = InitKind::file;
      else
        throw InvalidArgument("config key 'init': expected two_balls, random or file");
    } else if (key == "centers") {
      if (v.kind != Value::list) throw InvalidArgument("config key 'centers': expected a list");
      centers = v.items;
    } else if (key == "radius") {
      s.radius = as_number(v, key);
    } else if (key == "init_path") {
      s.init_path = as_text(v, key);
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }

  const int d = c.geometry.dimension;
  if (!have_dimension) throw InvalidArgument("config key 'dimension' is required");
  if (d != 1 && d != 2) throw InvalidArgument("config key 'dimension': must be 1 or 2");
  if (int(box.size()) != d) throw InvalidArgument("config key 'box': expected " + std::to_string(d) + " extents");
  c.geometry.extent = Point(box[0], d == 2 ? box[1] : 0.0);
  if (!origin.empty()) {
    if (int(origin.size()) != d) throw InvalidArgument("config key 'origin': expected " + std::to_string(d) + " values");
    c.geometry.origin = Point(origin[0], d == 2 ? origin[1] : 0.0);
  }
  c.geometry.disk = geometry == "disk";
  if (d == 1 && c.geometry.disk) throw InvalidArgument("config key 'geometry': disk requires dimension 2");
  if (resolution.empty() || int(resolution.size()) > d)
    throw InvalidArgument("config key 'resolution': expected nodes per axis");
  for (double r : resolution)
    if (r != std::floor(r) || r < 3) throw InvalidArgument("config key 'resolution': need integers >= 3");
  c.resolution = {int(resolution[0]), 1};
  if (d == 2) {
    if (resolution.size() == 2) {
      c.resolution[1] = int(resolution[1]);
    } else {
      // One entry: the y count follows from uniform spacing.
      const double h = box[0] / (resolution[0] - 1);
      c.resolution[1] = int(std::lround(box[1] / h)) + 1;
    }
  }
  for (const Value& item : centers) {
    std::vector<double> xy = as_numbers(item, "centers");
    if (int(xy.size()) != d) throw InvalidArgument("config key 'centers': each center needs " + std::to_string(d) + " coordinates");
    c.solver.centers.emplace_back(xy[0], d == 2 ? xy[1] : 0.0);
  }
  return c;
}

RunConfig load_config(const fs::path& path) { return parse_config(slurp(path)); }

GridPtr<double> build_grid(const RunConfig& config) { return build_grid(config.geometry, config.resolution); }

std::string config_text(const RunConfig& c) {
  const int d = c.geometry.dimension;
  const auto& s = c.solver;
  std::ostringstream o;
  auto axes = [&](const Point& p) {
    return d == 1 ? list_text({p[0]}) : list_text({p[0], p[1]});
  };
  o << "dimension = " << d << "\n";
  o << "box = " << axes(c.geometry.extent) << "\n";
  o << "origin = " << axes(c.geometry.origin) << "\n";
  o << "geometry = \"" << (c.geometry.disk ? "disk" : "box") << "\"\n";
  o << "resolution = "
    << (d == 1 ? list_text({double(c.resolution[0])}) : list_text({double(c.resolution[0]), double(c.resolution[1])}))
    << "\n";
  o << "lambda = " << format_double(s.lambda) << "\n";
  if (!c.lambdas.empty()) o << "lambdas = " << list_text(c.lambdas) << "\n";
  o << "backend = \"" << backend_name(s.backend) << "\"\n";
  o << "p_schedule = " << list_text(s.p_schedule) << "\n";
  o << "eps_vol = " << format_double(s.eps_vol) << "\n";
  o << "fidelity_weight = " << format_double(s.fidelity_weight) << "\n";
  o << "step_size = " << format_double(s.step_size) << "\n";
  o << "max_outer_iters = " << s.max_outer_iters << "\n";
  o << "max_inner_iters = " << s.max_inner_iters << "\n";
  o << "tol_objective = " << format_double(s.tol_objective) << "\n";
  o << "kappa = " << format_double(s.kappa) << "\n";
  o << "seed = " << s.seed << "\n";
  o << "init = \"" << init_name(s.init) << "\"\n";
  if (!s.centers.empty()) {
    o << "centers = [";
    for (std::size_t i = 0; i < s.centers.size(); ++i)
      o << (i ? ", " : "") << (d == 1 ? format_double(s.centers[i][0]) : axes(s.centers[i]));
    o << "]\n";
  }
  o << "radius = " << format_double(s.radius) << "\n";
  if (!s.init_path.empty()) o << "init_path = \"" << s.init_path << "\"\n";
  return o.str();
}

void save_run(const fs::path& dir, const RunConfig& config, const PhaseState& s, const RunFiles& info) {
  fs::create_directories(dir);
  const Grid& g = s.grid();
  write_grid_json(dir / "grid.json", g);
  write_field_csv(dir / "u.csv", s.u);
  write_mask_csv(dir / "mask_plus.csv", g, s.mask_plus);
  write_mask_csv(dir / "mask_minus.csv", g, s.mask_minus);
  spit(dir / "config.toml", config_text(config));
  {
    std::ofstream h(dir / "history.csv");
    h << "iteration,stage,objective\n";
    std::size_t stage = 0;
    for (std::size_t i = 0; i < s.history.size(); ++i) {
      while (stage + 1 < s.stage_breaks.size() && int(i) >= s.stage_breaks[stage + 1]) ++stage;
      h << i << ',' << stage << ',' << format_double(s.history[i]) << '\n';
    }
  }
  json state;
  state["scalars"] = state_scalars(s);
  state["config"] = config_text(config);
  state["grid"] = grid_json(g);
  state["history"] = s.history;
  state["stage_breaks"] = s.stage_breaks;
  spit(dir / "state.json", state.dump(2) + "\n");

  json manifest;
  manifest["config"] = config_text(config);
  manifest["grid"] = grid_json(g);
  manifest["seed"] = config.solver.seed;
  manifest["timings"] = {{"solve_seconds", info.solve_seconds}};
  manifest["versions"] = {{"sso", SSO_VERSION},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                        std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__}};
  manifest["files"] = {"config.toml", "grid.json", "history.csv", "manifest.json",
                       "mask_minus.csv", "mask_plus.csv", "state.json", "u.csv"};
  spit(dir / "manifest.json", manifest.dump(2) + "\n");
}

void register_output(const fs::path& dir, const std::string& name) {
  const fs::path path = dir / "manifest.json";
  json manifest = json::parse(slurp(path));
  auto files = manifest["files"].get<std::vector<std::string>>();
  if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
  std::sort(files.begin(), files.end());
  manifest["files"] = files;
  spit(path, manifest.dump(2) + "\n");
}

void save_diagnostics(const fs::path& dir, const DiagnosticsReport& r) {
  const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  const auto point = [](const Point& p) { return json::array({p[0], p[1]}); };
  {
    std::ofstream w(dir / "weiss.csv");
    w << "center_x,center_y,r,W,C\n";
    for (const WeissCurve& c : r.weiss)
      for (std::size_t k = 0; k < c.radii.size(); ++k)
        w << format_double(c.center[0]) << ',' << format_double(c.center[1]) << ',' << format_double(c.radii[k]) << ','
          << format_double(c.values[k]) << ',' << format_double(c.slack) << '\n';
  }
  {
    std::ofstream f(dir / "fits.csv");
    f << "center_x,center_y,r,contact,beta_plus,beta_minus,nu_x,nu_y,residual\n";
    for (const FitRecord& fr : r.fits)
      f << format_double(fr.center[0]) << ',' << format_double(fr.center[1]) << ',' << format_double(fr.radius) << ','
        << int(fr.contact) << ',' << format_double(fr.fit.beta_plus) << ',' << format_double(fr.fit.beta_minus) << ','
        << format_double(fr.fit.nu[0]) << ',' << format_double(fr.fit.nu[1]) << ','
        << format_double(fr.fit.relative_residual) << '\n';
  }
  json j;
  j["energy_balance_residual"] = num(r.energy_balance_residual);
  j["eigen_match_residual"] = num(r.eigen_match_residual);
  j["lipschitz_estimate"] = num(r.lipschitz_estimate);
  j["contact_distance"] = num(r.contact_distance);  // null when the phases never meet
  j["nondegeneracy_eta"] = num(r.nondegeneracy_eta);
  j["slope_identity_residual"] = num(r.slope_identity_residual);
  j["slope_margin_plus"] = num(r.slope_margin_plus);
  j["slope_margin_minus"] = num(r.slope_margin_minus);
  j["contact_fit_residual"] = num(r.contact_fit_residual);
  j["contact_points"] = r.contact_points;
  j["gradient_trace_plus"] = num(r.gradient_trace_plus);
  j["gradient_trace_minus"] = num(r.gradient_trace_minus);
  j["removal_checks"] = r.removal_checks;
  j["removal_violations"] = r.removal_violations;
  j["min_removal_change"] = num(r.min_removal_change);
  j["weiss"] = json::array();
  for (const WeissCurve& c : r.weiss)
    j["weiss"].push_back({{"center", point(c.center)}, {"radii", c.radii}, {"values", c.values}, {"slack", num(c.slack)}});
  j["fits"] = json::array();
  for (const FitRecord& fr : r.fits)
    j["fits"].push_back({{"center", point(fr.center)},
                         {"radius", fr.radius},
                         {"contact", fr.contact},
                         {"beta_plus", fr.fit.beta_plus},
                         {"beta_minus", fr.fit.beta_minus},
                         {"nu", point(fr.fit.nu)},
                         {"residual", fr.fit.relative_residual}});
  j["flags"] = r.flags;
  spit(dir / "report.json", j.dump(2) + "\n");
  for (const char* name : {"weiss.csv", "fits.csv", "report.json"}) register_output(dir, name);
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "lambda,lambda2,volume,objective,contact_distance\n";
  for (const SweepRow& r : rows)
    out << format_double(r.lambda) << ',' << format_double(r.lambda2) << ',' << format_double(r.volume) << ','
        << format_double(r.objective) << ',' << format_double(r.contact_distance) << '\n';
}

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("run directory not found: " + dir.string());
  for (const char* f : {"state.json", "grid.json", "u.csv", "mask_plus.csv", "mask_minus.csv"})
    if (!fs::exists(dir / f)) throw InvalidArgument("run directory is missing " + std::string(f));
  const json state = json::parse(slurp(dir / "state.json"));
  const GridPtr<double> grid = read_grid_json(dir / "grid.json");
  LoadedRun run{parse_config(state.at("config").get<std::string>()), grid, PhaseState(grid)};
  PhaseState& s = run.state;
  s.u = read_field_csv(run.grid, dir / "u.csv");
  s.mask_plus = read_mask_csv(run.grid, dir / "mask_plus.csv");
  s.mask_minus = read_mask_csv(run.grid, dir / "mask_minus.csv");
  const json& sc = state.at("scalars");
  s.lambda1_plus = sc.at("lambda1_plus").get<double>();
  s.lambda1_minus = sc.at("lambda1_minus").get<double>();
  s.lambda2 = sc.at("lambda2").get<double>();
  s.a_plus = sc.at("a_plus").get<double>();
  s.a_minus = sc.at("a_minus").get<double>();
  s.a_plus_raw = scalar_or_nan(sc, "a_plus_raw");
  s.a_minus_raw = scalar_or_nan(sc, "a_minus_raw");
  s.lambda = sc.at("lambda").get<double>();
  s.objective = sc.at("objective").get<double>();
  s.converged = sc.at("converged").get<bool>();
  s.iterations = sc.at("iterations").get<int>();
  s.history = state.value("history", std::vector<double>{});
  s.stage_breaks = state.value("stage_breaks", std::vector<int>{});
  return run;
}

}  // namespace sso
