#include <magweyl/scenario.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace magweyl {

namespace {

bool is_name_char(char c, bool allow_dash) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || (allow_dash && c == '-');
}

std::size_t first_non_space(const std::string& s, std::size_t from = 0) {
  while (from < s.size() && std::isspace(static_cast<unsigned char>(s[from]))) ++from;
  return from;
}

std::size_t last_non_space(const std::string& s) {
  std::size_t e = s.size();
  while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return e;
}

}  // namespace

scenario_text parse_scenario_text(const std::string& text) {
  scenario_text t;
  t.sections[""];
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    const std::size_t c = first_non_space(raw);
    const std::size_t e = last_non_space(raw);
    if (c >= e) continue;
    if (raw[c] == '[') {
      const std::size_t close = raw.find(']', c);
      if (close == std::string::npos) throw parse_error(ln, static_cast<int>(e) + 1, "expected ']'");
      if (close + 1 != e) throw parse_error(ln, static_cast<int>(close) + 2, "unexpected text after section header");
      const std::size_t a = first_non_space(raw, c + 1);
      std::size_t b = close;
      while (b > a && std::isspace(static_cast<unsigned char>(raw[b - 1]))) --b;
      if (a >= b) throw parse_error(ln, static_cast<int>(c) + 2, "empty section name");
      for (std::size_t i = a; i < b; ++i)
        if (!is_name_char(raw[i], true)) throw parse_error(ln, static_cast<int>(i) + 1, "invalid character in section name");
      section = raw.substr(a, b - a);
      if (t.section_lines.count(section)) throw parse_error(ln, static_cast<int>(a) + 1, "duplicate section [" + section + "]");
      t.sections[section];
      t.section_lines[section] = ln;
      continue;
    }
    std::size_t k = c;
    while (k < e && is_name_char(raw[k], false)) ++k;
    if (k == c) throw parse_error(ln, static_cast<int>(c) + 1, "expected a key");
    const std::size_t eq = first_non_space(raw, k);
    if (eq >= e || raw[eq] != '=') throw parse_error(ln, static_cast<int>(eq) + 1, "expected '='");
    const std::size_t v = first_non_space(raw, eq + 1);
    if (v >= e) throw parse_error(ln, static_cast<int>(eq) + 2, "missing value");
    const std::string key = raw.substr(c, k - c);
    auto& sec = t.sections[section];
    if (sec.count(key)) throw parse_error(ln, static_cast<int>(c) + 1, "duplicate key '" + key + "'");
    sec[key] = {raw.substr(v, e - v), ln, static_cast<int>(v) + 1, static_cast<int>(c) + 1};
  }
  return t;
}

std::string to_string(experiment_kind k) {
  switch (k) {
    case experiment_kind::check_algebra: return "check-algebra";
    case experiment_kind::resolvent: return "resolvent";
    case experiment_kind::spectrum: return "spectrum";
    case experiment_kind::ess_spectrum: return "ess-spectrum";
    case experiment_kind::propagate: return "propagate";
    case experiment_kind::audit_estimates: return "audit-estimates";
  }
  return "?";
}

namespace {

class reader {
 public:
  explicit reader(const scenario_text& t) : t_(t) {}

  const scenario_entry* find(const std::string& sec, const std::string& key) {
    auto s = t_.sections.find(sec);
    if (s == t_.sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used_.insert({sec, key});
    return &k->second;
  }

  static double to_double(const std::string& s, int line, int col) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw parse_error(line, col, "expected a number, got '" + s + "'");
    return v;
  }

  void num(const std::string& sec, const std::string& key, double& out) {
    if (auto e = find(sec, key)) out = to_double(e->value, e->line, e->column);
  }
  void integer(const std::string& sec, const std::string& key, int& out) {
    if (auto e = find(sec, key)) {
      int v = 0;
      auto r = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
      if (r.ec != std::errc() || r.ptr != e->value.data() + e->value.size())
        throw parse_error(e->line, e->column, "expected an integer, got '" + e->value + "'");
      out = v;
    }
  }
  void list(const std::string& sec, const std::string& key, std::vector<double>& out) {
    if (auto e = find(sec, key)) {
      out.clear();
      std::size_t pos = 0;
      while (true) {
        std::size_t comma = e->value.find(',', pos);
        std::string item = e->value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const std::size_t a = first_non_space(item), b = last_non_space(item);
        if (a >= b) throw parse_error(e->line, e->column + static_cast<int>(pos), "empty list item");
        out.push_back(to_double(item.substr(a, b - a), e->line, e->column + static_cast<int>(pos + a)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
  }
  void pair(const std::string& sec, const std::string& key, std::pair<double, double>& out) {
    if (auto e = find(sec, key)) {
      std::vector<double> v;
      used_.erase({sec, key});
      list(sec, key, v);
      if (v.size() != 2) throw parse_error(e->line, e->column, "expected two comma-separated numbers");
      out = {v[0], v[1]};
    }
  }
  void word(const std::string& sec, const std::string& key, std::string& out, const std::vector<std::string>& allowed) {
    if (auto e = find(sec, key)) {
      if (std::find(allowed.begin(), allowed.end(), e->value) == allowed.end()) {
        std::string opts;
        for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
        throw parse_error(e->line, e->column, "unknown " + key + " '" + e->value + "' (expected one of: " + opts + ")");
      }
      out = e->value;
    }
  }
  void flag(const std::string& sec, const std::string& key, bool& out) {
    std::string w;
    word(sec, key, w, {"true", "false"});
    if (!w.empty()) out = w == "true";
  }

  // Every entry must have been read by someone.
  void finish(const std::set<std::string>& known_sections) const {
    for (const auto& [sec, keys] : t_.sections) {
      if (!known_sections.count(sec)) throw parse_error(t_.section_lines.at(sec), 1, "unknown section [" + sec + "]");
      for (const auto& [key, e] : keys)
        if (!used_.count({sec, key}))
          throw parse_error(e.line, e.key_column, "unknown key '" + key + "'" + (sec.empty() ? "" : " in [" + sec + "]"));
    }
  }

 private:
  const scenario_text& t_;
  std::set<std::pair<std::string, std::string>> used_;
};

void positive(double v, const char* what) {
  if (!(v > 0)) throw precondition_error(std::string(what) + " must be positive");
}

scalar_fn gaussian(double amplitude, double width) {
  return [amplitude, width](const vec& x) { return amplitude * std::exp(-(x[0] * x[0] + x[1] * x[1]) / (2 * width * width)); };
}

// Radius beyond which a * exp(-r^2 / 2 w^2) stays below 1e-7.
double decay_radius(double a, double w) {
  return a == 0.0 ? 0.0 : w * std::sqrt(2 * std::log(std::max(1.0, std::abs(a)) * 1e7));
}

edge_profile profile(double minus, double plus, double w) {
  return minus == plus ? edge_profile::constant(minus) : edge_profile::step(minus, plus, w);
}

}  // namespace

box_grid scenario::grid(std::size_t i) const {
  if (i >= L.size()) throw precondition_error("grid index beyond the ladder");
  const double Lb = L[i] + collar;
  const int ni = n.empty() ? static_cast<int>(std::lround(points_per_length * Lb)) : n[i];
  return box_grid(dimension, Lb, ni, bc);
}

std::vector<box_grid> scenario::ladder() const {
  std::vector<box_grid> g;
  for (std::size_t i = 0; i < L.size(); ++i) g.push_back(grid(i));
  return g;
}

anisotropy_descriptor scenario::descriptor() const {
  anisotropy_descriptor d;
  if (field_family == "const_plus_decay" || field_family == "uniform" || field_family == "zero") {
    if (dimension != 2) throw precondition_error("anisotropy descriptors need dimension 2");
    d.fam = family::const_plus_decay;
    d.b_inf = field_family == "zero" ? 0.0 : b.at(0);
    if (field_family == "const_plus_decay" && b_amplitude != 0.0) d.b_decay = gaussian(b_amplitude, b_width);
    d.v_inf = potential_kind == "zero" ? 0.0 : v_value;
    if (potential_kind == "bump" && v_amplitude != 0.0) d.v_decay = gaussian(v_amplitude, v_width);
    d.decay_radius = std::max({decay_radius(b_amplitude, b_width),
                               potential_kind == "bump" ? decay_radius(v_amplitude, v_width) : 0.0, 1.0});
  } else if (field_family == "cartesian") {
    d.fam = family::cartesian2d;
    d.B1 = profile(b1_minus, b1_plus, step_width);
    d.B2 = profile(b2_minus, b2_plus, step_width);
    if (potential_kind == "constant" && v_value != 0.0) {
      d.V1 = edge_profile::constant(1.0);
      d.V2 = edge_profile::constant(v_value);
    }
  } else {
    throw precondition_error("field family '" + field_family + "' has no anisotropy descriptor");
  }
  return d;
}

magnetic_field scenario::field() const {
  if (field_family == "zero") return magnetic_field::zero(dimension);
  if (field_family == "uniform") return magnetic_field::uniform(dimension, b);
  if (field_family == "bump") {
    auto g = gaussian(b_amplitude, b_width);
    const double b0 = b.at(0);
    return magnetic_field::planar([g, b0](const vec& x) { return b0 + g(x); });
  }
  return descriptor().field();
}

scalar_fn scenario::potential() const {
  if (potential_kind == "zero") return nullptr;
  if (has_descriptor()) return descriptor().potential_fn();
  if (potential_kind == "constant") {
    const double v = v_value;
    return [v](const vec&) { return v; };
  }
  auto g = gaussian(v_amplitude, v_width);
  const double v = v_value;
  return [g, v](const vec& x) { return v + g(x); };
}

symbol scenario::hamiltonian_symbol() const {
  return symbol_kind == "japanese" ? symbol::japanese(dimension, symbol_order) : symbol::laplacian(dimension);
}

schrodinger_spec scenario::spec(std::size_t i) const {
  return {hamiltonian_symbol(), field(), std::nullopt, potential(), grid(i)};
}

scenario build_scenario(const scenario_text& t) {
  reader r(t);
  scenario s;

  const scenario_entry* ver = r.find("", "schema_version");
  if (!ver) throw parse_error(1, 1, "missing schema_version");
  int v = 0;
  r.integer("", "schema_version", v);
  if (v != scenario_schema_version)
    throw parse_error(ver->line, ver->column,
                      "schema_version " + ver->value + " is not supported (expected " + std::to_string(scenario_schema_version) + ")");

  std::string exp = "spectrum";
  if (auto e = r.find("scenario", "name")) s.name = e->value;
  r.word("scenario", "experiment", exp,
         {"check-algebra", "resolvent", "spectrum", "ess-spectrum", "propagate", "audit-estimates"});
  if (!r.find("scenario", "experiment")) throw parse_error(t.section_lines.count("scenario") ? t.section_lines.at("scenario") : 1, 1, "missing experiment");
  const std::pair<const char*, experiment_kind> kinds[] = {
      {"check-algebra", experiment_kind::check_algebra}, {"resolvent", experiment_kind::resolvent},
      {"spectrum", experiment_kind::spectrum},           {"ess-spectrum", experiment_kind::ess_spectrum},
      {"propagate", experiment_kind::propagate},         {"audit-estimates", experiment_kind::audit_estimates}};
  for (auto [name, k] : kinds)
    if (exp == name) s.experiment = k;
  int seed = static_cast<int>(s.seed);
  r.integer("scenario", "seed", seed);
  s.seed = static_cast<unsigned>(seed);
  r.integer("scenario", "dimension", s.dimension);

  r.word("field", "family", s.field_family, {"zero", "uniform", "bump", "const_plus_decay", "cartesian"});
  r.list("field", "b", s.b);
  r.num("field", "amplitude", s.b_amplitude);
  r.num("field", "width", s.b_width);
  r.num("field", "b1_minus", s.b1_minus);
  r.num("field", "b1_plus", s.b1_plus);
  r.num("field", "b2_minus", s.b2_minus);
  r.num("field", "b2_plus", s.b2_plus);
  r.num("field", "step_width", s.step_width);

  r.word("potential", "kind", s.potential_kind, {"zero", "constant", "bump"});
  r.num("potential", "value", s.v_value);
  r.num("potential", "amplitude", s.v_amplitude);
  r.num("potential", "width", s.v_width);

  r.word("symbol", "kind", s.symbol_kind, {"laplacian", "japanese"});
  r.num("symbol", "order", s.symbol_order);

  r.list("grid", "L", s.L);
  std::vector<double> nn;
  r.list("grid", "n", nn);
  for (double x : nn) s.n.push_back(static_cast<int>(x));
  r.num("grid", "points_per_length", s.points_per_length);
  r.num("grid", "collar", s.collar);
  std::string bc = "truncated";
  r.word("grid", "boundary", bc, {"truncated", "periodic"});
  s.bc = bc == "periodic" ? boundary::periodic : boundary::truncated;

  if (auto e = r.find("output", "dir")) s.out_dir = e->value;

  // experiment sections
  for (const char* sec : {"algebra", "resolvent", "spectrum", "essential", "propagation", "audit"}) {
    r.pair(sec, "window", s.window);
    r.num(sec, "tolerance", s.tolerance);
  }
  r.integer("algebra", "samples", s.samples);
  r.integer("algebra", "order", s.quadrature_order);
  r.num("algebra", "radius", s.draw_radius);

  for (const char* sec : {"resolvent", "audit"}) {
    r.integer(sec, "torus_n", s.torus_n);
    r.integer(sec, "flux_quanta", s.flux_quanta);
  }
  r.pair("resolvent", "z", s.z);
  r.list("resolvent", "sweep", s.sweep);
  r.num("resolvent", "sweep_constant", s.sweep_constant);
  r.num("audit", "domination_spread", s.domination_spread);

  r.list("spectrum", "expect", s.expect);
  r.num("spectrum", "bulk_theta", s.bulk_theta);
  r.num("spectrum", "cluster_gap", s.cluster_gap);
  r.integer("spectrum", "min_members", s.min_members);
  for (const char* sec : {"spectrum", "essential"}) r.num(sec, "collar_fraction", s.collar_fraction);

  r.num("essential", "bulk_theta", s.essential_theta);
  r.flag("essential", "require_both", s.require_both);
  r.flag("essential", "ladder_growth", s.ladder_growth);
  r.integer("essential", "k_samples", s.k_samples);
  r.integer("essential", "fiber_points_per_length", s.fiber_points_per_length);

  r.list("propagation", "eta", s.eta);
  r.integer("propagation", "strip_axis", s.strip_axis);
  r.integer("propagation", "strip_side", s.strip_side);
  r.list("propagation", "strip_fractions", s.strip_fractions);
  r.integer("propagation", "time_points", s.time_points);

  r.finish({"", "scenario", "field", "potential", "symbol", "grid", "output", "algebra", "resolvent", "spectrum",
            "essential", "propagation", "audit"});

  // semantic checks
  positive(s.tolerance, "tolerance");
  if (s.dimension < 1 || s.dimension > 3) throw precondition_error("dimension must be 1, 2 or 3");
  if (s.L.empty()) throw precondition_error("grid needs at least one L");
  for (double L : s.L) positive(L, "L");
  if (s.collar < 0) throw precondition_error("collar must be non-negative");
  if (s.n.empty() && !(s.points_per_length > 0)) throw precondition_error("grid needs n or points_per_length");
  if (!s.n.empty() && s.n.size() != s.L.size()) throw precondition_error("grid n and L lists differ in length");
  if (!(s.window.first < s.window.second)) throw precondition_error("window needs lo < hi");
  positive(s.samples, "samples");
  positive(s.sweep_constant, "sweep_constant");
  positive(s.domination_spread, "domination_spread");
  positive(s.cluster_gap, "cluster_gap");
  positive(s.b_width, "field width");
  positive(s.v_width, "potential width");
  positive(s.step_width, "step_width");
  for (double y : s.sweep) positive(y, "sweep");
  if (s.eta.size() != 4) throw precondition_error("eta needs support_lo, plateau_lo, plateau_hi, support_hi");
  if (s.strip_axis < 0 || s.strip_axis >= s.dimension) throw precondition_error("strip_axis out of range");
  if (s.strip_side != 1 && s.strip_side != -1) throw precondition_error("strip_side must be 1 or -1");
  for (double f : s.strip_fractions) positive(f, "strip_fractions");
  if (s.field_family == "uniform" && static_cast<int>(s.b.size()) != s.dimension * (s.dimension - 1) / 2)
    throw precondition_error("uniform field needs N(N-1)/2 components in b");
  if ((s.field_family == "bump" || s.has_descriptor()) && s.dimension != 2)
    throw precondition_error("field family '" + s.field_family + "' needs dimension 2");
  if (s.field_family == "cartesian" && s.potential_kind == "bump")
    throw precondition_error("cartesian family supports zero or constant potentials");
  if (s.has_descriptor()) s.descriptor().validate();
  return s;
}

scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw precondition_error("cannot read scenario file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return build_scenario(parse_scenario_text(ss.str()));
}

}  // namespace magweyl
