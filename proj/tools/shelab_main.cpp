// Command-line front end: configuration, seeding, experiment orchestration and
// deterministic artifact export.  Exit codes are the machine contract:
//   0 PASS, 1 FAIL, 2 usage/config/io error, 3 capacity guard, 4 INCONCLUSIVE.
// Human-readable text goes to stderr; data goes to the output directory.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shelab/config.hpp"
#include "shelab/errors.hpp"
#include "shelab/exponent_fit.hpp"
#include "shelab/green.hpp"
#include "shelab/io.hpp"
#include "shelab/lab.hpp"
#include "shelab/lemma_integrals.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace fs = std::filesystem;
using namespace shelab;

namespace {

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
};

RunConfig resolve_config(const CliOverrides& ov) {
  RunConfig cfg;
  if (!ov.config_path.empty()) cfg = load_config(ov.config_path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.output) cfg.output_dir = *ov.output;
  cfg.validate();
  return cfg;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  // probe writability up front so IO problems surface as exit 2
  const fs::path probe = cfg.output_dir / ".write_probe";
  std::ofstream test(probe, std::ios::binary);
  if (!test) throw std::runtime_error("output directory is not writable: " + cfg.output_dir.string());
  test.close();
  fs::remove(probe, ec);
  return cfg.output_dir;
}

int status_exit(CheckStatus st) {
  switch (st) {
    case CheckStatus::pass: return 0;
    case CheckStatus::fail: return 1;
    case CheckStatus::inconclusive: return 4;
  }
  return 2;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_green_check(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);

  // series agreement over four decades of t on an interior lattice
  double max_err = 0.0;
  for (double t : {1e-3, 1e-2, 1e-1, 1.0}) {
    for (int a = 1; a <= 33; ++a) {
      for (int b = 1; b <= 33; ++b) {
        const double x = a / 34.0, y = b / 34.0;
        max_err = std::max(max_err, std::abs(green_spectral(t, x, y, cfg.kernel_tol) -
                                             green_image(t, x, y, cfg.kernel_tol)));
      }
    }
  }
  const double agree_threshold = std::max(1e-9, 2.5 * cfg.kernel_tol);

  // log-log slopes of the three kernel integral estimates at alpha = 2
  std::vector<double> scales;
  for (int q = 0; q < 7; ++q) scales.push_back(std::pow(10.0, -4.0 + 0.5 * q));
  std::vector<std::pair<double, double>> pi, pii, piii;
  for (double h : scales) {
    pi.emplace_back(h, lemma_b1_integral(LemmaPart::space_incr, 2.0,
                                         {.t = 0.3, .x = 0.5 - h / 2, .y = 0.5 + h / 2}));
    pii.emplace_back(h, lemma_b1_integral(LemmaPart::time_incr, 2.0,
                                          {.t = 0.3 + h, .s = 0.3, .x = 0.5}));
    piii.emplace_back(h,
                      lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5 - h, .x = 0.5}));
  }
  const ExponentFit fi = fit_exponent(pi);
  const ExponentFit fii = fit_exponent(pii);
  const ExponentFit fiii = fit_exponent(piii);

  {
    std::ofstream out(dir / "green_check.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write green_check.csv");
    out << "statistic,value\n";
    out << "max_series_disagreement," << format_double(max_err) << '\n';
    out << "slope_space_incr," << format_double(fi.slope) << '\n';
    out << "slope_time_incr," << format_double(fii.slope) << '\n';
    out << "slope_tail," << format_double(fiii.slope) << '\n';
    out << "r2_space_incr," << format_double(fi.r_squared) << '\n';
    out << "r2_time_incr," << format_double(fii.r_squared) << '\n';
    out << "r2_tail," << format_double(fiii.r_squared) << '\n';
  }

  const bool ok = max_err <= agree_threshold && std::abs(fi.slope - 1.0) <= 0.05 &&
                  std::abs(fii.slope - 0.5) <= 0.05 && std::abs(fiii.slope - 0.5) <= 0.05;
  write_manifest(dir, cfg, {{"green-check", ok ? "PASS" : "FAIL"}}, seconds_since(t0));
  std::cerr << "green-check: max series disagreement " << max_err << " (threshold "
            << agree_threshold << "), slopes " << fi.slope << " / " << fii.slope << " / "
            << fiii.slope << " -> " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);

  const InitialData u0 = cfg.u0.build();
  const DriftSpec b = cfg.drift.build();
  const MildConvolver conv(cfg.grid, cfg.kernel_tol);
  PsiOptions popt;
  popt.tol = cfg.picard_tol;
  popt.threads = cfg.replicas == 1 ? cfg.threads : 1;

  parallel_for(static_cast<std::size_t>(cfg.replicas), cfg.replicas == 1 ? 1 : cfg.threads,
               [&](std::size_t r) {
                 RandomStream rng = SeedPolicy{cfg.seed}.stream(r);
                 const ScalarField u = solve_quasilinear(cfg.noise, u0, b, cfg.grid, rng, conv, popt);
                 char name[32];
                 std::snprintf(name, sizeof(name), "field_r%04zu.csv", r);
                 write_field_csv(dir / name, u);
               });

  write_manifest(dir, cfg, {{"simulate", "PASS"}}, seconds_since(t0));
  std::cerr << "simulate: wrote " << cfg.replicas << " replica field(s) to " << dir.string()
            << "\n";
  return 0;
}

int cmd_converge(const RunConfig& cfg, const std::string& check) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);

  ConvergenceReport rep;
  if (check == "fdd") {
    FddOptions opt;
    opt.points = {cfg.eval_points.at(0)};
    if (cfg.eval_points.size() > 1) opt.projection_point = cfg.eval_points[1];
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    rep = fdd_convergence(cfg.noise, cfg.n_list, opt);
  } else if (check == "hyp2") {
    MomentCheckOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    const std::vector<TestFunctionSpec> fs = {
        TestFunctionSpec::rectangle(cfg.rect.s0, cfg.rect.s1, cfg.rect.x0, cfg.rect.x1)};
    rep = hypothesis2_check(cfg.noise, fs, cfg.p, cfg.n_list, opt);
  } else if (check == "hyp3") {
    MomentCheckOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    const TestFunctionSpec f = TestFunctionSpec::rectangle(0.0, cfg.grid.t_max, 0.0, 1.0);
    rep = hypothesis3_check(cfg.noise, f, cfg.rect, cfg.m, cfg.n_list, opt);
  } else if (check == "donsker") {
    MomentCheckOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    rep = donsker_moment_check(cfg.n_list, cfg.m,
                               {TestFunctionSpec::sine(1, 1, cfg.grid.t_max)}, cfg.noise.z_law,
                               opt);
  } else if (check == "increments") {
    IncrementOptions opt;
    opt.anchor = cfg.eval_points.at(0);
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    const auto space = increment_scaling(cfg.noise, cfg.m, IncrementAxis::space, opt);
    const auto time = increment_scaling(cfg.noise, cfg.m, IncrementAxis::time, opt);
    rep = space.report;
    rep.add_meta("time_axis_slope", format_double(time.fit.slope));
    for (const auto& row : time.report.rows) {
      ReportRow r = row;
      r.statistic = "time_" + r.statistic;
      rep.rows.push_back(r);
    }
    const double window = cfg.noise.model == NoiseModel::white ? 0.10 : 0.15;
    const bool ok = cfg.m != 2 || (std::abs(space.fit.slope - 1.0) <= window &&
                                   std::abs(time.fit.slope - 0.5) <= window);
    rep.status = ok ? CheckStatus::pass : CheckStatus::fail;
  } else if (check == "manthey") {
    rep.check = "manthey";
    rep.add_meta("t_max", format_double(cfg.grid.t_max));
    double prev = -1.0;
    bool increasing = true;
    for (int n : cfg.n_list) {
      if (n < 2) throw std::invalid_argument("manthey: every n must be >= 2");
      const double v = manthey_integral(n, cfg.grid.t_max);
      rep.add_row(n, "manthey_integral", v, 1e-3 * v + 1e-12, 0);
      if (v <= prev) increasing = false;
      prev = v;
    }
    rep.status = increasing ? CheckStatus::pass : CheckStatus::fail;
    rep.note = "I(n, T, 1/n) should increase strictly with n";
  } else if (check == "conditions") {
    ConditionsOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.t_max = cfg.grid.t_max;
    opt.base_resolution = cfg.base_resolution;
    rep = manthey_conditions_report(cfg.noise, cfg.n_list, opt);
  } else {
    throw std::invalid_argument("unknown check '" + check +
                                "' (expected fdd|hyp2|hyp3|donsker|increments|manthey|conditions)");
  }

  write_report_csv(dir / ("report_" + check + ".csv"), rep);
  write_report_json(dir / ("report_" + check + ".json"), rep, cfg);
  write_manifest(dir, cfg, {{check, to_string(rep.status)}}, seconds_since(t0));
  std::cerr << "converge " << check << ": " << to_string(rep.status) << "\n";
  return status_exit(rep.status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation lab for the one-dimensional stochastic heat equation"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string check;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "JSON configuration file");
    sub->add_option("--seed", ov.seed, "override the master seed");
    sub->add_option("--threads", ov.threads, "worker pool size (0 = hardware)");
    sub->add_option("--output", ov.output, "output directory");
  };

  CLI::App* green = app.add_subcommand("green-check", "kernel series agreement and exponent fits");
  add_common(green);
  CLI::App* sim = app.add_subcommand("simulate", "per-replica solution fields");
  add_common(sim);
  CLI::App* conv = app.add_subcommand("converge", "statistical convergence checks");
  conv->add_option("check", check, "fdd|hyp2|hyp3|donsker|increments|manthey|conditions")
      ->required();
  add_common(conv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    const RunConfig cfg = resolve_config(ov);
    if (green->parsed()) return cmd_green_check(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (conv->parsed()) return cmd_converge(cfg, check);
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const capacity_error& e) {
    std::cerr << "capacity: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
