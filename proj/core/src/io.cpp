#include "pmhom/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "pmhom/error.hpp"

namespace pmhom {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '+')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InvalidArgument("not a number: '" + std::string(text) + "'");
  return v;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw Error("cannot write " + path.string());
}

void CsvWriter::header(std::initializer_list<std::string_view> names) {
  bool first = true;
  for (auto n : names) {
    if (!first) out_ << ',';
    out_ << n;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::header(std::span<const std::string> names) {
  for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
  row(std::span<const double>(values.begin(), values.size()));
}

void CsvWriter::row(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ << (i ? "," : "") << format_double(values[i]);
  out_ << '\n';
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InvalidArgument("csv: missing column '" + std::string(name) + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty file");
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
      t.header.push_back(cell);
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream rs(line);
    std::string cell;
    while (std::getline(rs, cell, ',')) row.push_back(parse_double(cell));
    if (row.size() != t.header.size())
      throw InvalidArgument(path.string() + ": row width does not match header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

nlohmann::json grid_to_json(const Grid& g) {
  nlohmann::json j;
  j["dim"] = g.dim();
  j["cells_per_axis"] = g.cells_per_axis();
  j["boundary"] = g.boundary() == BoundaryKind::periodic ? "periodic" : "dirichlet";
  j["side_length"] = g.side_length();
  j["origin"] = g.dim() == 1 ? std::vector<double>{g.origin()[0]}
                             : std::vector<double>{g.origin()[0], g.origin()[1]};
  j["spacing"] = g.spacing();
  j["dofs"] = g.dof_count();
  return j;
}

Grid grid_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    const auto origin = j.at("origin").get<std::vector<double>>();
    Point o{origin.at(0), dim == 2 ? origin.at(1) : 0.0};
    const auto kind = j.at("boundary").get<std::string>() == "periodic" ? BoundaryKind::periodic
                                                                         : BoundaryKind::dirichlet;
    return build_grid(dim, j.at("cells_per_axis").get<int>(), kind,
                      j.at("side_length").get<double>(), o);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("grid description: ") + e.what());
  }
}

nlohmann::json tensor_to_json(const Tensor& t, int dim) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < dim; ++k) row.push_back(t(i, k));
    rows.push_back(row);
  }
  return rows;
}

Tensor tensor_from_json(const nlohmann::json& j, int dim) {
  Tensor t;
  for (int i = 0; i < dim; ++i)
    for (int k = 0; k < dim; ++k) t(i, k) = j.at(i).at(k).get<double>();
  return t;
}

void write_field_csv(const std::filesystem::path& path, const ScalarField& field) {
  CsvWriter out(path);
  const Grid& g = field.grid();
  if (g.dim() == 1)
    out.header({"x1", "value"});
  else
    out.header({"x1", "x2", "value"});
  for (std::size_t d = 0; d < g.dof_count(); ++d) {
    const Point p = g.dof_position(d);
    if (g.dim() == 1)
      out.row({p[0], field[d]});
    else
      out.row({p[0], p[1], field[d]});
  }
}

ScalarField read_field_csv(const std::filesystem::path& path, const Grid& grid) {
  const auto table = read_csv(path);
  const auto col = table.column("value");
  if (table.rows.size() != grid.dof_count())
    throw InvalidArgument(path.string() + ": expected " + std::to_string(grid.dof_count()) +
                          " rows, found " + std::to_string(table.rows.size()));
  std::vector<double> v;
  v.reserve(table.rows.size());
  for (const auto& r : table.rows) v.push_back(r[col]);
  return ScalarField(grid, std::move(v));
}

}  // namespace pmhom
