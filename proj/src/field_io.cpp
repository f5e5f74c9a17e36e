#include "bcrb/field_io.hpp"

#include "bcrb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace bcrb {

namespace {

std::string number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_rows(std::ostream& out, const ParameterGrid& grid, const std::vector<std::string>& names,
                const std::function<void(Index, std::vector<double>&)>& values) {
  for (int a = 0; a < grid.dim(); ++a) out << (a ? "," : "") << "x" << a;
  for (const auto& n : names) out << "," << n;
  out << "\n";
  std::vector<double> row;
  for (Index i = 0; i < grid.size(); ++i) {
    for (int a = 0; a < grid.dim(); ++a) out << (a ? "," : "") << number(grid.coord(i, a));
    row.clear();
    values(i, row);
    for (double x : row) out << "," << number(x);
    out << "\n";
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read field CSV '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("field CSV '" + path + "' is empty");
  t.header = split(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size() || c.empty())
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number '" + c + "'");
      row.push_back(x);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw InvalidArgument("field CSV '" + path + "' has no rows");
  return t;
}

int coordinate_columns(const Table& t) {
  int p = 0;
  while (p < static_cast<int>(t.header.size()) && t.header[p] == "x" + std::to_string(p)) ++p;
  if (p == 0) throw InvalidArgument("field CSV: first column must be x0");
  return p;
}

ParameterGrid recover_grid(const Table& t, int p, const std::string& path) {
  std::vector<double> lower(p), upper(p);
  std::vector<int> nodes(p);
  for (int a = 0; a < p; ++a) {
    std::vector<double> xs;
    for (const auto& r : t.rows) xs.push_back(r[a]);
    std::sort(xs.begin(), xs.end());
    const double span = xs.back() - xs.front();
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [&](double x, double y) { return std::abs(x - y) <= 1e-9 * span; }),
             xs.end());
    lower[a] = xs.front();
    upper[a] = xs.back();
    nodes[a] = static_cast<int>(xs.size());
  }
  ParameterGrid grid(lower, upper, nodes);
  if (grid.size() != static_cast<Index>(t.rows.size()))
    throw InvalidArgument("field CSV '" + path + "': rows do not form a full grid");
  for (Index i = 0; i < grid.size(); ++i)
    for (int a = 0; a < p; ++a)
      if (std::abs(t.rows[i][a] - grid.coord(i, a)) > 1e-9 * (upper[a] - lower[a]))
        throw InvalidArgument("field CSV '" + path + "': row " + std::to_string(i + 1) +
                              " is not at the expected grid node");
  return grid;
}

}  // namespace

void write_csv(std::ostream& out, const ScalarField& field) {
  write_rows(out, field.grid(), {"value"},
             [&](Index i, std::vector<double>& row) { row.push_back(field[i]); });
}

void write_csv(std::ostream& out, const VectorField& field) {
  const char prefix = field.variance() == Variance::contravariant ? 'v' : 'u';
  std::vector<std::string> names;
  for (int a = 0; a < field.components(); ++a) names.push_back(prefix + std::to_string(a));
  write_rows(out, field.grid(), names, [&](Index i, std::vector<double>& row) {
    for (int a = 0; a < field.components(); ++a) row.push_back(field.values()(i, a));
  });
}

void write_csv(std::ostream& out, const MatrixField& field) {
  const int d = field.rows();
  std::vector<std::string> names;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) names.push_back("m" + std::to_string(r) + "_" + std::to_string(c));
  write_rows(out, field.grid(), names, [&](Index i, std::vector<double>& row) {
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) row.push_back(field[i](r, c));
  });
}

template <class Field>
void write_csv_file(const std::string& path, const Field& field) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, field);
  if (!out) throw IoError("write to '" + path + "' failed");
}

template void write_csv_file(const std::string&, const ScalarField&);
template void write_csv_file(const std::string&, const VectorField&);
template void write_csv_file(const std::string&, const MatrixField&);

ScalarField read_scalar_csv(const std::string& path) {
  const Table t = read_table(path);
  const int p = coordinate_columns(t);
  if (t.header.size() != static_cast<std::size_t>(p + 1) || t.header[p] != "value")
    throw InvalidArgument("field CSV '" + path + "': expected a single 'value' column");
  const ParameterGrid grid = recover_grid(t, p, path);
  Vec values(grid.size());
  for (Index i = 0; i < grid.size(); ++i) values[i] = t.rows[i][p];
  return ScalarField(grid, values);
}

VectorField read_vector_csv(const std::string& path) {
  const Table t = read_table(path);
  const int p = coordinate_columns(t);
  const int q = static_cast<int>(t.header.size()) - p;
  if (q < 1) throw InvalidArgument("field CSV '" + path + "': no value columns");
  const char prefix = t.header[p][0];
  if (prefix != 'v' && prefix != 'u')
    throw InvalidArgument("field CSV '" + path + "': vector columns must be v<k> or u<k>");
  for (int a = 0; a < q; ++a)
    if (t.header[p + a] != prefix + std::to_string(a))
      throw InvalidArgument("field CSV '" + path + "': unexpected column '" + t.header[p + a] + "'");
  const ParameterGrid grid = recover_grid(t, p, path);
  Mat values(grid.size(), q);
  for (Index i = 0; i < grid.size(); ++i)
    for (int a = 0; a < q; ++a) values(i, a) = t.rows[i][p + a];
  return VectorField(grid, values, prefix == 'v' ? Variance::contravariant : Variance::covariant);
}

MatrixField read_matrix_csv(const std::string& path) {
  const Table t = read_table(path);
  const int p = coordinate_columns(t);
  const int cells = static_cast<int>(t.header.size()) - p;
  const int d = static_cast<int>(std::lround(std::sqrt(double(cells))));
  if (cells < 1 || d * d != cells)
    throw InvalidArgument("field CSV '" + path + "': matrix columns must form a square");
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      if (t.header[p + r * d + c] != "m" + std::to_string(r) + "_" + std::to_string(c))
        throw InvalidArgument("field CSV '" + path + "': unexpected column '" +
                              t.header[p + r * d + c] + "'");
  const ParameterGrid grid = recover_grid(t, p, path);
  std::vector<Mat> values(grid.size(), Mat(d, d));
  for (Index i = 0; i < grid.size(); ++i)
    for (int k = 0; k < cells; ++k) values[i](k / d, k % d) = t.rows[i][p + k];
  return MatrixField(grid, values);
}

}  // namespace bcrb
