#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pmhom/grid.hpp"

namespace pmhom {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict parse of a full token; throws InvalidArgument otherwise.
double parse_double(std::string_view text);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes with 2-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// 64-bit FNV-1a, used for artifact fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Comma-separated writer with round-trip number formatting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void header(std::initializer_list<std::string_view> names);
  void header(std::span<const std::string> names);
  void row(std::initializer_list<double> values);
  void row(std::span<const double> values);

 private:
  std::ofstream out_;
};

/// Reads a numeric CSV with one header line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);
nlohmann::json tensor_to_json(const Tensor& t, int dim);
Tensor tensor_from_json(const nlohmann::json& j, int dim);

/// Field dump: header `x1[,x2],value`, one row per DOF in DOF order.
void write_field_csv(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_field_csv(const std::filesystem::path& path, const Grid& grid);

}  // namespace pmhom
