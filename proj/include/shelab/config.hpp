#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shelab/grid.hpp"
#include "shelab/io.hpp"
#include "shelab/lab.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace shelab {

using json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "0.1.0";

// Named drift / initial-data presets so runs are fully describable in JSON.
struct DriftConfig {
  std::string kind = "none";  // none | linear | sin
  double coeff = 0.0;

  DriftSpec build() const {
    if (kind == "none") return DriftSpec::zero();
    if (kind == "linear") {
      const double c = coeff;
      return DriftSpec::checked([c](double u) { return c * u; }, std::abs(c));
    }
    if (kind == "sin") {
      const double c = coeff;
      return DriftSpec::checked([c](double u) { return c * std::sin(u); }, std::abs(c));
    }
    throw std::invalid_argument("drift kind must be one of none|linear|sin");
  }
};

struct InitialConfig {
  std::string kind = "zero";  // zero | sine | parabola
  double coeff = 1.0;

  InitialData build() const {
    if (kind == "zero") return InitialData::zero();
    if (kind == "sine") {
      const double c = coeff;
      return InitialData::checked([c](double x) { return c * std::sin(std::numbers::pi * x); },
                                  true);
    }
    if (kind == "parabola") {
      const double c = coeff;
      return InitialData::checked([c](double x) { return c * x * (1.0 - x); }, true);
    }
    throw std::invalid_argument("u0 kind must be one of zero|sine|parabola");
  }
};

struct RunConfig {
  GridSpec grid{1.0, 64, 64};
  NoiseSpec noise{};
  std::uint64_t seed = 12345;
  int replicas = 4;
  std::vector<int> n_list = {4, 16, 64, 256};
  std::vector<std::pair<double, double>> eval_points = {{0.5, 0.5}, {0.25, 0.75}};
  int threads = 0;
  std::filesystem::path output_dir = "out";
  DriftConfig drift{};
  InitialConfig u0{};
  // tolerances
  double kernel_tol = 1e-12;
  double quad_rel_tol = 1e-4;
  double picard_tol = 1e-10;
  // check-specific knobs
  double p = 1.25;
  int m = 2;
  RectangleSpec rect{0.3, 0.5, 0.3, 0.5};
  int base_resolution = 64;

  void validate() const {
    grid.validate();
    noise.validate();
    if (replicas < 1) throw std::invalid_argument("config: replicas must be >= 1");
    for (std::size_t q = 1; q < n_list.size(); ++q)
      if (n_list[q] <= n_list[q - 1])
        throw std::invalid_argument("config: n_list must be strictly increasing");
    for (const auto& [t, x] : eval_points) {
      grid.t_index(t);  // throws if off-grid
      grid.x_index(x);
    }
  }
};

inline NoiseModel noise_model_from_string(const std::string& s) {
  if (s == "white") return NoiseModel::white;
  if (s == "kac-stroock") return NoiseModel::kac_stroock;
  if (s == "donsker") return NoiseModel::donsker;
  throw std::invalid_argument("noise model must be one of white|kac-stroock|donsker");
}

inline ZLawKind z_law_from_string(const std::string& s) {
  if (s == "rademacher") return ZLawKind::rademacher;
  if (s == "centered-uniform") return ZLawKind::centered_uniform;
  if (s == "shifted-exponential") return ZLawKind::shifted_exponential;
  throw std::invalid_argument("z_law must be rademacher|centered-uniform|shifted-exponential");
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.grid = GridSpec(g.value("t_max", 1.0), g.value("nt", 64), g.value("nx", 64));
  }
  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    c.noise.model = noise_model_from_string(nj.value("model", "white"));
    c.noise.n = nj.value("n", 1);
    c.noise.z_law.kind = z_law_from_string(nj.value("z_law", "rademacher"));
  }
  c.seed = j.value("seed", c.seed);
  c.replicas = j.value("replicas", c.replicas);
  if (j.contains("n_list")) c.n_list = j.at("n_list").get<std::vector<int>>();
  if (j.contains("eval_points")) {
    c.eval_points.clear();
    for (const auto& pt : j.at("eval_points"))
      c.eval_points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
  }
  c.threads = j.value("threads", 0);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("drift")) {
    c.drift.kind = j.at("drift").value("kind", "none");
    c.drift.coeff = j.at("drift").value("coeff", 0.0);
  }
  if (j.contains("u0")) {
    c.u0.kind = j.at("u0").value("kind", "zero");
    c.u0.coeff = j.at("u0").value("coeff", 1.0);
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    c.kernel_tol = t.value("kernel_tol", c.kernel_tol);
    c.quad_rel_tol = t.value("quad_rel_tol", c.quad_rel_tol);
    c.picard_tol = t.value("picard_tol", c.picard_tol);
  }
  if (j.contains("check")) {
    const auto& k = j.at("check");
    c.p = k.value("p", c.p);
    c.m = k.value("m", c.m);
    c.base_resolution = k.value("base_resolution", c.base_resolution);
    if (k.contains("rect")) {
      const auto& r = k.at("rect");
      c.rect.s0 = r.at(0).get<double>();
      c.rect.s1 = r.at(1).get<double>();
      c.rect.x0 = r.at(2).get<double>();
      c.rect.x1 = r.at(3).get<double>();
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path.string());
  json j;
  in >> j;
  return parse_config(j);
}

// The fully resolved configuration, echoed so every report is self-describing.
inline json config_echo(const RunConfig& c) {
  json j;
  j["grid"] = {{"t_max", c.grid.t_max}, {"nt", c.grid.nt}, {"nx", c.grid.nx}};
  const char* model = c.noise.model == NoiseModel::white          ? "white"
                      : c.noise.model == NoiseModel::kac_stroock ? "kac-stroock"
                                                                  : "donsker";
  j["noise"] = {{"model", model}, {"n", c.noise.n}, {"z_law", c.noise.z_law.name()}};
  j["seed"] = c.seed;
  j["replicas"] = c.replicas;
  j["n_list"] = c.n_list;
  json pts = json::array();
  for (const auto& [t, x] : c.eval_points) pts.push_back(json::array({t, x}));
  j["eval_points"] = pts;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir.string();
  j["drift"] = {{"kind", c.drift.kind}, {"coeff", c.drift.coeff}};
  j["u0"] = {{"kind", c.u0.kind}, {"coeff", c.u0.coeff}};
  j["tolerances"] = {{"kernel_tol", c.kernel_tol},
                     {"quad_rel_tol", c.quad_rel_tol},
                     {"picard_tol", c.picard_tol}};
  j["check"] = {{"p", c.p},
                {"m", c.m},
                {"base_resolution", c.base_resolution},
                {"rect", json::array({c.rect.s0, c.rect.s1, c.rect.x0, c.rect.x1})}};
  return j;
}

// Manifest: written after the data files, so its presence marks them final.
inline void write_manifest(const std::filesystem::path& dir, const RunConfig& c,
                           const std::vector<std::pair<std::string, std::string>>& statuses,
                           double wall_seconds) {
  json j;
  j["artifact_version"] = kArtifactVersion;
  j["config"] = config_echo(c);
  json st = json::object();
  for (const auto& [k, v] : statuses) st[k] = v;
  j["checks"] = st;
  j["wall_clock_seconds"] = wall_seconds;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

inline void write_report_json(const std::filesystem::path& path, const ConvergenceReport& rep,
                              const RunConfig& c) {
  json j;
  j["artifact_version"] = kArtifactVersion;
  j["check"] = rep.check;
  j["status"] = to_string(rep.status);
  if (!rep.note.empty()) j["note"] = rep.note;
  json meta = json::object();
  for (const auto& [k, v] : rep.metadata) meta[k] = v;
  j["metadata"] = meta;
  j["config"] = config_echo(c);
  json rows = json::array();
  for (const auto& row : rep.rows) {
    rows.push_back({{"n", row.n},
                    {"statistic", row.statistic},
                    {"value", row.value},
                    {"stderr", row.stderr_},
                    {"replicas", row.replicas}});
  }
  j["rows"] = rows;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace shelab
