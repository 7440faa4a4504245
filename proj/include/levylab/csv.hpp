#pragma once

// Path files: one row per (path, grid time) with header
//   path_id,t,x1,...,xd,alive
// Times are printed in fixed notation and coordinates in general notation,
// both as the shortest decimal that reads back to the same double. Rows at
// or after the explosion time have alive = 0 and empty coordinates.
//
// A file read back has its explosion time at the first dead grid time, so
// writing it again reproduces the same bytes.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/state.hpp"

namespace levylab {

namespace detail {

inline void append_double(std::string& out, double v, std::chars_format format) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, format);
  if (ec != std::errc()) throw NumericError("csv: cannot format value", v, 0.0);
  out.append(buf, ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("csv line " + std::to_string(line) + ": malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return fields;
    start = comma + 1;
  }
}

}  // namespace detail

inline void write_paths_csv(std::ostream& out, const PathBatch& batch) {
  std::string header = "path_id,t";
  for (std::size_t j = 1; j <= batch.dim; ++j) header += ",x" + std::to_string(j);
  header += ",alive\n";
  out << header;
  const auto& times = *batch.grid;
  std::string row;
  for (std::size_t p = 0; p < batch.paths.size(); ++p) {
    const PathRecord& path = batch.paths[p];
    for (std::size_t i = 0; i < times.size(); ++i) {
      row.clear();
      row += std::to_string(p);
      row += ',';
      detail::append_double(row, times[i], std::chars_format::fixed);
      const bool alive = path.alive(i);
      for (std::size_t j = 0; j < batch.dim; ++j) {
        row += ',';
        if (alive) detail::append_double(row, path.coord(i, j), std::chars_format::general);
      }
      row += alive ? ",1\n" : ",0\n";
      out << row;
    }
  }
}

inline std::string paths_csv_string(const PathBatch& batch) {
  std::ostringstream out;
  write_paths_csv(out, batch);
  return out.str();
}

inline PathBatch read_paths_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty input");
  const auto header = detail::split_commas(line);
  if (header.size() < 4 || header.front() != "path_id" || header[1] != "t" || header.back() != "alive") {
    throw ValidationError("csv: header must be path_id,t,x1..xd,alive");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[2 + j] != "x" + std::to_string(j + 1)) throw ValidationError("csv: unexpected column " + std::string(header[2 + j]));
  }

  struct Row {
    double t;
    bool alive;
    std::vector<double> x;
  };
  std::vector<std::vector<Row>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != dim + 3) throw ValidationError("csv line " + std::to_string(number) + ": wrong field count");
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
      throw ValidationError("csv line " + std::to_string(number) + ": malformed path_id");
    }
    if (id == rows.size()) rows.emplace_back();
    if (id + 1 != rows.size()) throw ValidationError("csv line " + std::to_string(number) + ": path ids must be consecutive");
    Row row{detail::parse_double(fields[1], number), fields.back() == "1", {}};
    if (!row.alive && fields.back() != "0") throw ValidationError("csv line " + std::to_string(number) + ": alive must be 0 or 1");
    if (row.alive) {
      for (std::size_t j = 0; j < dim; ++j) row.x.push_back(detail::parse_double(fields[2 + j], number));
    }
    rows.back().push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("csv: no rows");

  std::vector<double> times;
  for (const auto& r : rows.front()) times.push_back(r.t);
  PathBatch batch{dim, make_grid(times), {}};
  for (std::size_t p = 0; p < rows.size(); ++p) {
    if (rows[p].size() != times.size()) throw ValidationError("csv: path " + std::to_string(p) + " has a different grid");
    PathRecord record(dim, batch.grid);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Row& r = rows[p][i];
      if (r.t != times[i]) throw ValidationError("csv: path " + std::to_string(p) + " has a different grid");
      if (!r.alive) {
        if (record.alive(i)) record.explode(r.t);
        continue;
      }
      if (!record.alive(i)) throw ValidationError("csv: path " + std::to_string(p) + " revives after the cemetery");
      record.set(i, Point(Eigen::Map<const Point>(r.x.data(), static_cast<Eigen::Index>(dim))));
    }
    batch.paths.push_back(std::move(record));
  }
  return batch;
}

inline PathBatch read_paths_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open path file " + path);
  return read_paths_csv(in);
}

}  // namespace levylab
