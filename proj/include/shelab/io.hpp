#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "shelab/grid.hpp"
#include "shelab/lab.hpp"
#include "shelab/poisson_plane.hpp"

namespace shelab {

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

}  // namespace detail

// Header `t,x,value`, row-major by time.
inline void write_field_csv(const std::filesystem::path& path, const ScalarField& field) {
  std::ofstream out = detail::open_out(path);
  out << "t,x,value\n";
  for (int i = 0; i < field.rows(); ++i)
    for (int j = 0; j < field.cols(); ++j)
      out << format_double(field.coord_t(i)) << ',' << format_double(field.coord_x(j)) << ','
          << format_double(field(i, j)) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_points_csv(const std::filesystem::path& path, const PoissonPointSet& pps) {
  std::ofstream out = detail::open_out(path);
  out << "u,v\n";
  for (const auto& [u, v] : pps.points)
    out << format_double(u) << ',' << format_double(v) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_report_csv(const std::filesystem::path& path, const ConvergenceReport& rep) {
  std::ofstream out = detail::open_out(path);
  out << "n,statistic,value,stderr,replicas\n";
  for (const auto& row : rep.rows)
    out << row.n << ',' << row.statistic << ',' << format_double(row.value) << ','
        << format_double(row.stderr_) << ',' << row.replicas << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace shelab
