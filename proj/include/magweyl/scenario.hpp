#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace magweyl {

// Line-oriented scenario text:
//
//   # comment
//   schema_version = 1
//   [section]
//   key = value
//   list = 1, 2, 3
//
// Keys before the first section header belong to the unnamed top-level section.
struct scenario_entry {
  std::string value;
  int line = 0, column = 0;  // of the value
  int key_column = 0;
};

struct scenario_text {
  std::map<std::string, std::map<std::string, scenario_entry>> sections;
  std::map<std::string, int> section_lines;
};

scenario_text parse_scenario_text(const std::string& text);

inline constexpr int scenario_schema_version = 1;

enum class experiment_kind { check_algebra, resolvent, spectrum, ess_spectrum, propagate, audit_estimates };

std::string to_string(experiment_kind k);

struct scenario {
  std::string name;
  experiment_kind experiment = experiment_kind::spectrum;
  unsigned seed = 1;
  int dimension = 2;

  // field
  std::string field_family = "uniform";  // zero | uniform | bump | const_plus_decay | cartesian
  std::vector<double> b{1.0};            // uniform components; bump / const_plus_decay base value in b[0]
  double b_amplitude = 0.0, b_width = 1.0;
  double b1_minus = 1.0, b1_plus = 1.0, b2_minus = 1.0, b2_plus = 1.0, step_width = 1.0;

  // potential: zero | constant | bump (value + amplitude * exp(-|x|^2 / 2 width^2))
  std::string potential_kind = "zero";
  double v_value = 0.0, v_amplitude = 0.0, v_width = 1.0;

  // symbol: laplacian | japanese (<p>^order)
  std::string symbol_kind = "laplacian";
  double symbol_order = 2.0;

  // grid: one entry per ladder box; collar widens every box beyond the physical half-width
  std::vector<double> L{12.0};
  std::vector<int> n;
  double points_per_length = 0.0;  // n = round(ppl * (L + collar)) when n is not given
  double collar = 0.0;
  boundary bc = boundary::truncated;

  // shared
  window_t window{0.0, 8.0};
  double tolerance = 1e-2;

  // check-algebra
  int samples = 1000, quadrature_order = 16;
  double draw_radius = 2.0;

  // resolvent / audit-estimates (flux torus)
  int torus_n = 32, flux_quanta = 1;
  std::pair<double, double> z{-1.0, 1.0};
  std::vector<double> sweep{0.5, 1.0, 2.0};
  double sweep_constant = 1.2;
  double domination_spread = 0.2;

  // spectrum
  std::vector<double> expect;  // empty: Landau oracle for uniform fields
  double bulk_theta = 0.9, cluster_gap = 0.05, collar_fraction = 0.125;
  int min_members = 3;

  // ess-spectrum
  double essential_theta = 0.6;
  bool require_both = true, ladder_growth = false;
  int k_samples = 256, fiber_points_per_length = 8;

  // propagate
  std::vector<double> eta{2.0, 2.5, 3.5, 4.0};
  int strip_axis = 0, strip_side = 1;
  std::vector<double> strip_fractions{0.5, 0.25, 0.125};
  int time_points = 64;

  std::string out_dir = ".";

  box_grid grid(std::size_t i = 0) const;
  std::vector<box_grid> ladder() const;
  magnetic_field field() const;
  scalar_fn potential() const;  // empty for V = 0
  symbol hamiltonian_symbol() const;
  bool has_descriptor() const { return field_family == "const_plus_decay" || field_family == "cartesian"; }
  anisotropy_descriptor descriptor() const;
  schrodinger_spec spec(std::size_t i = 0) const;
};

scenario build_scenario(const scenario_text& t);
scenario load_scenario(const std::string& path);

struct check_result {
  std::string name;
  bool pass = false;
  std::string measured;
  bool informational = false;  // printed, not counted
};

struct run_options {
  std::string out_dir;  // overrides the scenario when non-empty
  std::optional<window_t> window;
  bool verbose = false;
};

struct run_result {
  std::vector<check_result> checks;
  std::vector<std::string> artifacts;
  bool all_pass() const;
};

run_result run_scenario(const scenario& s, const run_options& opt);

}  // namespace magweyl
