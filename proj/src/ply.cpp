#include "artikin/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "artikin/errors.hpp"

namespace artikin {

static_assert(std::endian::native == std::endian::little,
              "PLY I/O assumes a little-endian host");

namespace {

struct PropertyType {
  int size = 0;
  bool is_float = false;
  bool is_signed = false;
};

PropertyType parse_type(const std::string& t) {
  if (t == "char" || t == "int8") return {1, false, true};
  if (t == "uchar" || t == "uint8") return {1, false, false};
  if (t == "short" || t == "int16") return {2, false, true};
  if (t == "ushort" || t == "uint16") return {2, false, false};
  if (t == "int" || t == "int32") return {4, false, true};
  if (t == "uint" || t == "uint32") return {4, false, false};
  if (t == "float" || t == "float32") return {4, true, true};
  if (t == "double" || t == "float64") return {8, true, true};
  throw ParseError("ply: unknown property type '" + t + "'");
}

double decode(const char* p, const PropertyType& t) {
  if (t.is_float) {
    if (t.size == 4) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (t.size) {
    case 1: return t.is_signed ? double(*reinterpret_cast<const std::int8_t*>(p))
                               : double(*reinterpret_cast<const std::uint8_t*>(p));
    case 2: {
      std::uint16_t u;
      std::memcpy(&u, p, 2);
      return t.is_signed ? double(static_cast<std::int16_t>(u)) : double(u);
    }
    default: {
      std::uint32_t u;
      std::memcpy(&u, p, 4);
      return t.is_signed ? double(static_cast<std::int32_t>(u)) : double(u);
    }
  }
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> props;
  std::vector<PropertyType> types;
  bool has_list = false;
};

}  // namespace

bool PlyTable::has(const std::string& name) const {
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

const std::vector<double>& PlyTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return columns[i];
  throw ParseError("ply: missing vertex property '" + name + "'");
}

void PlyTable::add(std::string name, std::vector<double> values) {
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

PlyTable read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw ParseError(path.string() + ": not a PLY file");

  std::string format;
  std::vector<Element> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      ss >> format;
    } else if (word == "element") {
      Element e;
      ss >> e.name >> e.count;
      if (!ss) throw ParseError(path.string() + ": bad element line");
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw ParseError(path.string() + ": property before element");
      std::string type, name;
      ss >> type;
      if (type == "list") {
        elements.back().has_list = true;
        continue;
      }
      ss >> name;
      elements.back().props.push_back(name);
      elements.back().types.push_back(parse_type(type));
    } else if (word == "end_header") {
      break;
    }
  }
  if (format != "binary_little_endian" && format != "ascii")
    throw ParseError(path.string() + ": unsupported PLY format '" + format + "'");
  if (elements.empty() || elements.front().name != "vertex")
    throw ParseError(path.string() + ": first element must be 'vertex'");
  const Element& v = elements.front();
  if (v.has_list) throw ParseError(path.string() + ": list properties on vertices");

  PlyTable table;
  for (const auto& p : v.props) table.add(p, std::vector<double>(v.count));
  if (format == "ascii") {
    for (std::size_t r = 0; r < v.count; ++r)
      for (std::size_t c = 0; c < v.props.size(); ++c)
        if (!(in >> table.columns[c][r]))
          throw ParseError(path.string() + ": truncated ascii vertex data");
    return table;
  }
  std::size_t stride = 0;
  for (const auto& t : v.types) stride += t.size;
  std::vector<char> buf(stride);
  for (std::size_t r = 0; r < v.count; ++r) {
    if (!in.read(buf.data(), static_cast<std::streamsize>(stride)))
      throw ParseError(path.string() + ": truncated binary vertex data");
    std::size_t off = 0;
    for (std::size_t c = 0; c < v.types.size(); ++c) {
      table.columns[c][r] = decode(buf.data() + off, v.types[c]);
      off += v.types[c].size;
    }
  }
  return table;
}

void write_ply(const std::filesystem::path& path, const PlyTable& table,
               PlyScalar type) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const char* tname = type == PlyScalar::Float64 ? "double"
                      : type == PlyScalar::Float32 ? "float"
                                                   : "int";
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << table.rows()
      << "\n";
  for (const auto& n : table.names) out << "property " << tname << " " << n << "\n";
  out << "end_header\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (const auto& col : table.columns) {
      if (type == PlyScalar::Float64) {
        double d = col[r];
        out.write(reinterpret_cast<const char*>(&d), 8);
      } else if (type == PlyScalar::Float32) {
        float f = static_cast<float>(col[r]);
        out.write(reinterpret_cast<const char*>(&f), 4);
      } else {
        std::int32_t i = static_cast<std::int32_t>(col[r]);
        out.write(reinterpret_cast<const char*>(&i), 4);
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace artikin
