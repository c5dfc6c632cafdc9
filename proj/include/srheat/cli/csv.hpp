#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace srheat::cli {

/// One measured quantity of one configuration. Optional fields are written
/// as empty cells.
struct ResultRow {
  long run_id = 0;
  std::string subcommand;
  int d = 1;
  std::string scheme;
  std::string format;
  std::string mode;
  std::string form;
  std::string matvec;
  std::optional<double> h;
  std::optional<double> dt;
  std::optional<double> lambda;
  std::string norm;
  std::string measure_kind;
  std::optional<double> value;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  long samples = 0;
  bool stagnated = false;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCsvHeader =
    "run_id,subcommand,d,scheme,format,mode,form,matvec,h,dt,lambda,norm,measure_kind,value,"
    "ci_low,ci_high,samples,stagnated,seed";

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

inline std::string to_csv_line(const ResultRow& r) {
  std::string s;
  auto cell = [&](const std::string& v) {
    if (v.find_first_of(",\n\"") != std::string::npos)
      throw std::invalid_argument("CSV field contains a separator: " + v);
    if (!s.empty()) s += ',';
    s += v;
  };
  s = std::to_string(r.run_id);
  cell(r.subcommand);
  cell(std::to_string(r.d));
  cell(r.scheme);
  cell(r.format);
  cell(r.mode);
  cell(r.form);
  cell(r.matvec);
  cell(format_optional(r.h));
  cell(format_optional(r.dt));
  cell(format_optional(r.lambda));
  cell(r.norm);
  cell(r.measure_kind);
  cell(format_optional(r.value));
  cell(format_optional(r.ci_low));
  cell(format_optional(r.ci_high));
  cell(std::to_string(r.samples));
  cell(r.stagnated ? "1" : "0");
  cell(std::to_string(r.seed));
  return s;
}

/// Rows are written sorted by run_id, keeping emission order within a run.
inline void write_csv(std::vector<ResultRow> rows, std::ostream& out) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultRow& a, const ResultRow& b) { return a.run_id < b.run_id; });
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << to_csv_line(r) << '\n';
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(rows, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

namespace detail {

inline std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::runtime_error("bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<ResultRow> read_csv(std::istream& in, const std::string& name = "input") {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error(name + ":1: unexpected header");
  std::vector<ResultRow> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto c = detail::split_cells(line);
    if (c.size() != 19)
      throw std::runtime_error(name + ":" + std::to_string(number) + ": expected 19 fields");
    try {
      ResultRow r;
      r.run_id = detail::parse_int<long>(c[0]);
      r.subcommand = c[1];
      r.d = detail::parse_int<int>(c[2]);
      r.scheme = c[3];
      r.format = c[4];
      r.mode = c[5];
      r.form = c[6];
      r.matvec = c[7];
      r.h = detail::parse_optional(c[8]);
      r.dt = detail::parse_optional(c[9]);
      r.lambda = detail::parse_optional(c[10]);
      r.norm = c[11];
      r.measure_kind = c[12];
      r.value = detail::parse_optional(c[13]);
      r.ci_low = detail::parse_optional(c[14]);
      r.ci_high = detail::parse_optional(c[15]);
      r.samples = detail::parse_int<long>(c[16]);
      r.stagnated = c[17] == "1";
      r.seed = detail::parse_int<std::uint64_t>(c[18]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(name + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, path);
}

/// Named (x, y...) series for external plotting.
using PlotSeries = std::map<std::string, std::vector<std::vector<double>>>;

/// Writes one whitespace-separated file per series next to `csv_path`:
/// <stem>.<series>.xy.
inline std::vector<std::string> write_plot_data(const PlotSeries& series, const std::string& csv_path) {
  namespace fs = std::filesystem;
  const fs::path base(csv_path);
  std::vector<std::string> written;
  for (const auto& [name, points] : series) {
    fs::path p = base.parent_path() / (base.stem().string() + "." + name + ".xy");
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    for (const auto& pt : points) {
      for (std::size_t i = 0; i < pt.size(); ++i) out << (i ? " " : "") << format_double(pt[i]);
      out << '\n';
    }
    written.push_back(p.string());
  }
  return written;
}

}  // namespace srheat::cli
