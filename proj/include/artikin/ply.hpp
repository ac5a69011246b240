#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace artikin {

/// Column-oriented view of the vertex element of a PLY file.
struct PlyTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  /// Throws ParseError when the column is missing.
  const std::vector<double>& column(const std::string& name) const;
  void add(std::string name, std::vector<double> values);
};

enum class PlyScalar { Float32, Float64, Int32 };

/// Reads the `vertex` element of an ascii or binary little-endian PLY file.
/// Scalar properties of any standard type are widened to double.
PlyTable read_ply(const std::filesystem::path& path);

/// Writes a binary little-endian PLY with one vertex property per column.
void write_ply(const std::filesystem::path& path, const PlyTable& table,
               PlyScalar type = PlyScalar::Float64);

}  // namespace artikin
