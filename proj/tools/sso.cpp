// sso: solve, diagnose, sweep and validate from the command line.
//
// Exit codes: 0 ok, 1 error, 2 not converged (or a partially failed sweep).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "sso/diagnostics.hpp"
#include "sso/io.hpp"
#include "sso/optimizer.hpp"
#include "sso/validate.hpp"

using namespace sso;

namespace {

constexpr int kOk = 0, kError = 1, kNotConverged = 2;

std::vector<double> parse_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw InvalidArgument("bad number '" + item + "'");
    out.push_back(x);
  }
  return out;
}

// "x,y;x,y" (or "x;x" in 1D).
std::vector<Point> parse_centers(const std::string& text) {
  std::vector<Point> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto xs = parse_numbers(item, ',');
    if (xs.empty()) continue;
    if (xs.size() > 2) throw InvalidArgument("bad center '" + item + "'");
    out.emplace_back(xs[0], xs.size() == 2 ? xs[1] : 0.0);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_state(const PhaseState& s, double seconds) {
  std::printf("F = %.10g  lambda_2 = %.10g  |Omega| = %.6g  a = (%.4f, %.4f)  converged = %s  iterations = %d  %.2fs\n",
              s.objective, s.lambda2, s.volume(), s.a_plus, s.a_minus, s.converged ? "yes" : "no", s.iterations, seconds);
}

int cmd_solve(const std::string& config_path, const std::string& out) {
  const RunConfig config = load_config(config_path);
  auto grid = build_grid(config);
  const auto t0 = std::chrono::steady_clock::now();
  const PhaseState s = solve(config.solver, grid);
  const double t = seconds_since(t0);
  save_run(out, config, s, {t});
  print_state(s, t);
  return s.converged ? kOk : kNotConverged;
}

int cmd_diagnose(const std::string& dir, const std::string& centers, const std::string& radii, int removal) {
  const LoadedRun run = load_run(dir);
  DiagnoseOptions opt;
  if (centers != "auto") {
    opt.auto_centers = false;
    opt.centers = parse_centers(centers);
    if (opt.centers.empty()) throw InvalidArgument("--centers needs 'auto' or a list like 'x,y;x,y'");
  }
  if (!radii.empty()) opt.radii = parse_numbers(radii, ',');
  opt.removal_samples = removal;
  const DiagnosticsReport r = identity_suite(run.state, opt);
  save_diagnostics(dir, r);
  std::printf("energy balance   %.3e\n", r.energy_balance_residual);
  std::printf("eigen match      %.3e\n", r.eigen_match_residual);
  std::printf("lipschitz        %.4f\n", r.lipschitz_estimate);
  std::printf("contact distance %.4f\n", r.contact_distance);
  std::printf("nondegeneracy    %.4f\n", r.nondegeneracy_eta);
  std::printf("slope identity   %.3e (%d contact points)\n", r.slope_identity_residual, r.contact_points);
  std::printf("gradient trace   %.4f %.4f\n", r.gradient_trace_plus, r.gradient_trace_minus);
  std::printf("inward removal   %d/%d violations\n", r.removal_violations, r.removal_checks);
  std::string flags;
  for (const auto& f : r.flags) flags += " " + f;
  std::printf("flags           %s\n", flags.empty() ? " none" : flags.c_str());
  return kOk;
}

int sweep_threads() {
  if (const char* env = std::getenv("SSO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_sweep(const std::string& config_path, const std::string& out) {
  const RunConfig base = load_config(config_path);
  if (base.lambdas.empty()) throw InvalidArgument("sweep needs a nonempty 'lambdas' list");
  fs::create_directories(out);
  auto grid = build_grid(base);

  const std::size_t n = base.lambdas.size();
  std::vector<std::optional<SweepRow>> rows(n);
  std::vector<int> status(n, kOk);
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      RunConfig c = base;
      c.solver.lambda = base.lambdas[k];
      c.lambdas.clear();
      const fs::path dir = fs::path(out) / ("lambda_" + format_double(c.solver.lambda));
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const PhaseState s = solve(c.solver, grid);
        const double t = seconds_since(t0);
        save_run(dir, c, s, {t});
        rows[k] = SweepRow{c.solver.lambda, s.lambda2, s.volume(), s.objective, contact_distance(s)};
        status[k] = s.converged ? kOk : kNotConverged;
        std::lock_guard lock(io);
        std::printf("lambda = %-8g ", c.solver.lambda);
        print_state(s, t);
      } catch (const std::exception& e) {
        status[k] = kError;
        std::lock_guard lock(io);
        std::fprintf(stderr, "lambda = %g failed: %s\n", c.solver.lambda, e.what());
      }
    }
  };
  const int threads = std::min<int>(sweep_threads(), int(n));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<SweepRow> written;
  for (const auto& r : rows)
    if (r) written.push_back(*r);
  write_sweep_csv(fs::path(out) / "sweep.csv", written);
  const bool all_ok = std::all_of(status.begin(), status.end(), [](int s) { return s == kOk; });
  return all_ok ? kOk : kNotConverged;
}

int cmd_validate(const std::string& suite) {
  const std::vector<Check> checks = run_suite(suite);
  bool ok = true;
  for (const Check& c : checks) {
    std::printf("%s  %-40s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.pass;
  }
  return ok ? kOk : kError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral shape optimization: min lambda_2 + Lambda |Omega| over two-phase partitions"};
  app.require_subcommand(1);

  std::string config, out, dir, centers = "auto", radii, suite;
  int removal = 50;

  auto* solve_cmd = app.add_subcommand("solve", "Run the optimizer and write a run directory");
  solve_cmd->add_option("--config", config, "Config file")->required();
  solve_cmd->add_option("--out", out, "Output run directory")->required();

  auto* diag_cmd = app.add_subcommand("diagnose", "Write weiss.csv, fits.csv and report.json into a run directory");
  diag_cmd->add_option("run_dir", dir, "Run directory")->required();
  diag_cmd->add_option("--centers", centers, "'auto' or 'x,y;x,y'");
  diag_cmd->add_option("--radii", radii, "Comma-separated radii (default: geometric from 4h)");
  diag_cmd->add_option("--removal-samples", removal, "Rim nodes probed by the inward removal check")
      ->check(CLI::NonNegativeNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "Solve once per entry of the config's lambdas list");
  sweep_cmd->add_option("--config", config, "Config file")->required();
  sweep_cmd->add_option("--out", out, "Output directory")->required();

  auto* val_cmd = app.add_subcommand("validate", "Run an oracle suite: eigen, onedim, twodim or properties");
  val_cmd->add_option("suite", suite, "Suite name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*solve_cmd) return cmd_solve(config, out);
    if (*diag_cmd) return cmd_diagnose(dir, centers, radii, removal);
    if (*sweep_cmd) return cmd_sweep(config, out);
    if (*val_cmd) return cmd_validate(suite);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kError;
  }
  return kError;
}
