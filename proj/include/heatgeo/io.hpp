#pragma once

#include "heatgeo/core.hpp"
#include "heatgeo/distance.hpp"
#include "heatgeo/heat.hpp"
#include "heatgeo/mds.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

// File formats:
//   dense matrix      headerless CSV, one row per line
//   point cloud       CSV, optional header; columns named "label" and
//                     "timepoint" become metadata
//   adjacency         CSV "row,col,weight", upper triangle only
//   binary kernel     8-byte little-endian n, then n*n float64 LE, row-major
//   embedding         CSV "index,y1..yk[,label][,timepoint]"

namespace heatgeo {

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  return out;
}

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
};

/// Numeric CSV; the first line is a header iff one of its cells is not a number.
inline CsvTable read_csv_table(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0, width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (first) {
      first = false;
      bool numeric = true;
      for (auto c : cells) numeric = numeric && parse_number(c).has_value();
      width = cells.size();
      if (!numeric) {
        for (auto c : cells) t.header.emplace_back(c);
        continue;
      }
    }
    if (cells.size() != width)
      throw ParseError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_number(cells[c]);
      if (!v)
        throw ParseError(name + ":" + std::to_string(lineno) + ": field " + std::to_string(c + 1) +
                         " is not numeric ('" + std::string(cells[c]) + "')");
      row.push_back(*v);
    }
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(lineno);
  }
  if (t.rows.empty()) throw ParseError(name + ": no data rows");
  return t;
}

inline int to_int_label(double v, const std::string& name, std::size_t lineno, const char* column) {
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw ParseError(name + ":" + std::to_string(lineno) + ": " + column + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Point cloud from CSV. Columns "label" and "timepoint" (by header name)
/// are moved to metadata; an "index" column is dropped.
inline PointCloud read_point_cloud(std::istream& in, const std::string& name = "<stream>") {
  const auto t = detail::read_csv_table(in, name);
  std::optional<std::size_t> label_col, time_col, index_col;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "label") label_col = c;
    if (t.header[c] == "timepoint") time_col = c;
    if (t.header[c] == "index") index_col = c;
  }
  const std::size_t width = t.rows.front().size();
  const Index d = static_cast<Index>(width) - (label_col ? 1 : 0) - (time_col ? 1 : 0) - (index_col ? 1 : 0);
  if (d < 1) throw ParseError(name + ": no coordinate columns");
  PointCloud pc;
  pc.data.resize(static_cast<Index>(t.rows.size()), d);
  if (label_col) pc.labels.emplace();
  if (time_col) pc.timepoints.emplace();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = t.rows[r][c];
      if (index_col && c == *index_col) continue;
      if (label_col && c == *label_col) {
        pc.labels->push_back(detail::to_int_label(v, name, t.line_numbers[r], "label"));
      } else if (time_col && c == *time_col) {
        pc.timepoints->push_back(detail::to_int_label(v, name, t.line_numbers[r], "timepoint"));
      } else {
        if (!std::isfinite(v))
          throw ParseError(name + ":" + std::to_string(t.line_numbers[r]) + ": non-finite value");
        pc.data(static_cast<Index>(r), j++) = v;
      }
    }
  }
  return pc;
}

inline PointCloud load_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_point_cloud(in, path);
}

inline void write_point_cloud(std::ostream& out, const PointCloud& pc) {
  for (Index j = 0; j < pc.dim(); ++j) out << (j ? "," : "") << "x" << (j + 1);
  if (pc.labels) out << ",label";
  if (pc.timepoints) out << ",timepoint";
  out << '\n';
  for (Index i = 0; i < pc.size(); ++i) {
    for (Index j = 0; j < pc.dim(); ++j) out << (j ? "," : "") << format_double(pc.data(i, j));
    if (pc.labels) out << ',' << (*pc.labels)[i];
    if (pc.timepoints) out << ',' << (*pc.timepoints)[i];
    out << '\n';
  }
}

inline void save_point_cloud(const std::string& path, const PointCloud& pc) {
  auto out = detail::open_out(path);
  write_point_cloud(out, pc);
}

/// Headerless dense matrix.
inline Matrix read_matrix_csv(std::istream& in, const std::string& name = "<stream>") {
  const auto t = detail::read_csv_table(in, name);
  if (!t.header.empty()) throw ParseError(name + ":1: non-numeric field in matrix file");
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.rows.front().size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = t.rows[r][c];
  return m;
}

inline Matrix load_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_csv(in, path);
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline void save_matrix_csv(const std::string& path, const Matrix& m) {
  auto out = detail::open_out(path);
  write_matrix_csv(out, m);
}

/// Distance matrix from CSV, checked for the DistanceMatrix invariants.
inline DistanceMatrix load_distance_csv(const std::string& path) {
  DistanceMatrix d;
  d.values = load_matrix_csv(path);
  d.source = DistanceSource::External;
  if (d.values.rows() != d.values.cols()) throw ParseError(path + ": distance matrix is not square");
  if (!d.valid()) throw ParseError(path + ": not a valid distance matrix (symmetric, zero diagonal, >= 0)");
  return d;
}

inline void write_adjacency_csv(std::ostream& out, const SparseMatrix& w) {
  out << "row,col,weight\n";
  for (Index c = 0; c < w.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(w, c); it; ++it)
      if (it.row() < it.col()) out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
}

inline void write_time_entropy_csv(std::ostream& out, const TimeSelection& sel) {
  out << "time,entropy\n";
  for (std::size_t i = 0; i < sel.grid.size(); ++i)
    out << format_double(sel.grid[i]) << ',' << format_double(sel.entropies[i]) << '\n';
}

inline void write_embedding_csv(std::ostream& out, const Matrix& coords, const std::optional<std::vector<int>>& labels,
                                const std::optional<std::vector<int>>& timepoints) {
  out << "index";
  for (Index j = 0; j < coords.cols(); ++j) out << ",y" << (j + 1);
  if (labels) out << ",label";
  if (timepoints) out << ",timepoint";
  out << '\n';
  for (Index i = 0; i < coords.rows(); ++i) {
    out << i;
    for (Index j = 0; j < coords.cols(); ++j) out << ',' << format_double(coords(i, j));
    if (labels) out << ',' << (*labels)[i];
    if (timepoints) out << ',' << (*timepoints)[i];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Binary kernels
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
  return r;
}

}  // namespace detail

inline void write_kernel_binary(std::ostream& out, const Matrix& h) {
  if (h.rows() != h.cols()) throw ParameterError("kernel must be square");
  const std::uint64_t n = detail::to_le(static_cast<std::uint64_t>(h.rows()));
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) {
      const std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(h(i, j)));
      out.write(reinterpret_cast<const char*>(&bits), 8);
    }
}

inline Matrix read_kernel_binary(std::istream& in, const std::string& name = "<stream>") {
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), 8)) throw ParseError(name + ": truncated header");
  n = detail::to_le(n);
  if (n == 0 || n > (1u << 20)) throw ParseError(name + ": implausible dimension " + std::to_string(n));
  Matrix h(static_cast<Index>(n), static_cast<Index>(n));
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), 8))
        throw ParseError(name + ": truncated payload at entry " + std::to_string(i * h.cols() + j));
      h(i, j) = std::bit_cast<double>(detail::to_le(bits));
    }
  return h;
}

}  // namespace heatgeo
