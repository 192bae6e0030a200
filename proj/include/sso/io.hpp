#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sso/diagnostics.hpp"
#include "sso/grid.hpp"
#include "sso/optimizer.hpp"
#include "sso/state.hpp"

namespace sso {

namespace fs = std::filesystem;

// Fixed 17-significant-digit rendering used by every CSV writer.
std::string format_double(double x);

// Field dump: header `ix[,iy],value`, one row per node in index order.
void write_field_csv(const fs::path& path, const Field& f);
Field read_field_csv(const GridPtr<double>& grid, const fs::path& path);
void write_mask_csv(const fs::path& path, const Grid& grid, const Mask& mask);
Mask read_mask_csv(const GridPtr<double>& grid, const fs::path& path);

void write_grid_json(const fs::path& path, const Grid& grid);
GridPtr<double> read_grid_json(const fs::path& path);

// `path` is a u.csv or a run directory containing one.
Field read_field_for_init(const GridPtr<double>& grid, const std::string& path);

// Everything a config file describes.
struct RunConfig {
  Geometry geometry;
  std::array<int, 2> resolution{0, 0};
  SolverConfig solver;
  std::vector<double> lambdas;  // sweep only
};

// Flat `key = value` text; `[section]` headers and `#` comments are allowed.
// Values are numbers, strings (quoted or bare) or bracketed lists. Errors
// name the offending key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const fs::path& path);
GridPtr<double> build_grid(const RunConfig& config);
// Canonical text form; parse_config(config_text(c)) reproduces c.
std::string config_text(const RunConfig& config);

struct RunFiles {
  double solve_seconds = 0;
};

// Writes state.json, manifest.json, history.csv, grid.json, u.csv,
// mask_plus.csv, mask_minus.csv and config.toml.
void save_run(const fs::path& dir, const RunConfig& config, const PhaseState& state, const RunFiles& info);

struct LoadedRun {
  RunConfig config;
  GridPtr<double> grid;
  PhaseState state;
};
LoadedRun load_run(const fs::path& dir);

// Adds `name` to the manifest's file inventory (used by diagnose).
void register_output(const fs::path& dir, const std::string& name);

// weiss.csv, fits.csv and report.json, registered in the manifest.
void save_diagnostics(const fs::path& dir, const DiagnosticsReport& report);

struct SweepRow {
  double lambda = 0;
  double lambda2 = 0;
  double volume = 0;
  double objective = 0;
  double contact_distance = 0;
};
void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows);

}  // namespace sso
