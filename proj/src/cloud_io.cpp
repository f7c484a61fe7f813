#include "sgc/cloud_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary cloud formats assume a little-endian host");

namespace sgc {

namespace fs = std::filesystem;

namespace {

enum class PlyScalar { F32, F64, I8, U8, I16, U16, I32, U32 };

std::size_t scalar_size(PlyScalar s) {
  switch (s) {
    case PlyScalar::F32: return 4;
    case PlyScalar::F64: return 8;
    case PlyScalar::I8:
    case PlyScalar::U8: return 1;
    case PlyScalar::I16:
    case PlyScalar::U16: return 2;
    case PlyScalar::I32:
    case PlyScalar::U32: return 4;
  }
  return 0;
}

PlyScalar parse_scalar_type(const std::string& token, const fs::path& path) {
  if (token == "float" || token == "float32") return PlyScalar::F32;
  if (token == "double" || token == "float64") return PlyScalar::F64;
  if (token == "char" || token == "int8") return PlyScalar::I8;
  if (token == "uchar" || token == "uint8") return PlyScalar::U8;
  if (token == "short" || token == "int16") return PlyScalar::I16;
  if (token == "ushort" || token == "uint16") return PlyScalar::U16;
  if (token == "int" || token == "int32") return PlyScalar::I32;
  if (token == "uint" || token == "uint32") return PlyScalar::U32;
  fail(path.string() + ": unsupported property type '" + token + "'");
}

double read_binary_scalar(std::istream& in, PlyScalar type, const fs::path& path) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), std::streamsize(scalar_size(type)));
  if (!in) fail(path.string() + ": truncated binary vertex data");
  switch (type) {
    case PlyScalar::F32: {
      float v;
      std::memcpy(&v, buf, 4);
      return double(v);
    }
    case PlyScalar::F64: {
      double v;
      std::memcpy(&v, buf, 8);
      return v;
    }
    case PlyScalar::I8: return double(static_cast<signed char>(buf[0]));
    case PlyScalar::U8: return double(buf[0]);
    case PlyScalar::I16: {
      std::int16_t v;
      std::memcpy(&v, buf, 2);
      return double(v);
    }
    case PlyScalar::U16: {
      std::uint16_t v;
      std::memcpy(&v, buf, 2);
      return double(v);
    }
    case PlyScalar::I32: {
      std::int32_t v;
      std::memcpy(&v, buf, 4);
      return double(v);
    }
    case PlyScalar::U32: {
      std::uint32_t v;
      std::memcpy(&v, buf, 4);
      return double(v);
    }
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyScalar type = PlyScalar::F32;
};

struct PlyElement {
  std::string name;
  Index count = 0;
  std::vector<PlyProperty> properties;
  bool has_list = false;
};

PointCloud load_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path.string() + ": cannot open for reading");

  std::string line;
  if (!std::getline(in, line)) fail(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") fail(path.string() + ": malformed header (missing 'ply')");

  bool binary = false;
  bool format_seen = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
    if (keyword == "format") {
      std::string mode, version;
      ls >> mode >> version;
      if (mode == "ascii")
        binary = false;
      else if (mode == "binary_little_endian")
        binary = true;
      else
        fail(path.string() + ": unsupported PLY format '" + mode + "'");
      format_seen = true;
    } else if (keyword == "element") {
      PlyElement el;
      ls >> el.name >> el.count;
      if (ls.fail() || el.count < 0) fail(path.string() + ": malformed element line");
      elements.push_back(el);
    } else if (keyword == "property") {
      if (elements.empty()) fail(path.string() + ": property before element");
      std::string type_token;
      ls >> type_token;
      if (type_token == "list") {
        elements.back().has_list = true;
        continue;
      }
      PlyProperty prop;
      prop.type = parse_scalar_type(type_token, path);
      ls >> prop.name;
      elements.back().properties.push_back(prop);
    } else if (keyword == "end_header") {
      break;
    } else {
      fail(path.string() + ": unknown header keyword '" + keyword + "'");
    }
    if (in.eof()) fail(path.string() + ": header not terminated");
  }
  if (!format_seen) fail(path.string() + ": malformed header (no format line)");

  const auto vertex_it =
      std::find_if(elements.begin(), elements.end(), [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) fail(path.string() + ": no vertex element");
  if (vertex_it->count == 0) fail(path.string() + ": zero vertices");
  if (vertex_it->has_list) fail(path.string() + ": list properties on vertex element unsupported");
  // TODO: skip fixed-width elements that precede the vertex data in binary
  // files instead of rejecting them.
  for (auto it = elements.begin(); it != vertex_it; ++it)
    if (binary) fail(path.string() + ": vertex element must come first in binary files");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (std::size_t i = 0; i < vertex_it->properties.size(); ++i) {
    const std::string& n = vertex_it->properties[i].name;
    if (n == "x") ix = int(i);
    if (n == "y") iy = int(i);
    if (n == "z") iz = int(i);
    if (n == "nx") inx = int(i);
    if (n == "ny") iny = int(i);
    if (n == "nz") inz = int(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(path.string() + ": vertex element lacks x/y/z");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.id = path.stem().string();
  cloud.points.reserve(std::size_t(vertex_it->count));
  if (with_normals) cloud.normals.reserve(std::size_t(vertex_it->count));

  std::vector<double> row(vertex_it->properties.size());
  if (binary) {
    for (Index v = 0; v < vertex_it->count; ++v) {
      for (std::size_t i = 0; i < row.size(); ++i)
        row[i] = read_binary_scalar(in, vertex_it->properties[i].type, path);
      cloud.points.emplace_back(row[std::size_t(ix)], row[std::size_t(iy)], row[std::size_t(iz)]);
      if (with_normals)
        cloud.normals.emplace_back(row[std::size_t(inx)], row[std::size_t(iny)], row[std::size_t(inz)]);
    }
  } else {
    // ASCII bodies may precede the vertex element with other elements.
    for (auto it = elements.begin(); it != vertex_it; ++it)
      for (Index skip = 0; skip < it->count; ++skip)
        if (!std::getline(in, line)) fail(path.string() + ": truncated element data");
    for (Index v = 0; v < vertex_it->count; ++v) {
      if (!std::getline(in, line)) fail(path.string() + ": truncated vertex data");
      std::istringstream ls(line);
      for (double& value : row) {
        ls >> value;
        if (ls.fail()) fail(path.string() + ": malformed vertex line");
      }
      cloud.points.emplace_back(row[std::size_t(ix)], row[std::size_t(iy)], row[std::size_t(iz)]);
      if (with_normals)
        cloud.normals.emplace_back(row[std::size_t(inx)], row[std::size_t(iny)], row[std::size_t(inz)]);
    }
  }
  return cloud;
}

PointCloud load_xyz(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(path.string() + ": cannot open for reading");
  PointCloud cloud;
  cloud.id = path.stem().string();
  std::string line;
  bool any_normals = false;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    double x, y, z;
    ls >> x >> y >> z;
    if (ls.fail())
      fail(path.string() + ":" + std::to_string(line_no) + ": expected 3 or 6 numeric fields");
    double nx, ny, nz;
    ls >> nx;
    if (!ls.fail()) {
      ls >> ny >> nz;
      if (ls.fail())
        fail(path.string() + ":" + std::to_string(line_no) + ": expected 3 or 6 numeric fields");
      any_normals = true;
      cloud.normals.emplace_back(nx, ny, nz);
    } else if (any_normals) {
      fail(path.string() + ":" + std::to_string(line_no) + ": mixed 3- and 6-field lines");
    }
    cloud.points.emplace_back(x, y, z);
  }
  if (any_normals && cloud.normals.size() != cloud.points.size())
    fail(path.string() + ": mixed 3- and 6-field lines");
  if (cloud.points.empty()) fail(path.string() + ": zero vertices");
  return cloud;
}

void write_ply_header(std::ostream& out, const PointCloud& cloud, bool binary) {
  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  const char* type = binary ? "double" : "float";
  // ASCII uses 'float' in the header per common practice; values are written
  // with enough digits to round-trip to 9 significant digits regardless.
  out << "element vertex " << cloud.size() << "\n";
  out << "property " << type << " x\n";
  out << "property " << type << " y\n";
  out << "property " << type << " z\n";
  if (cloud.has_normals()) {
    out << "property " << type << " nx\n";
    out << "property " << type << " ny\n";
    out << "property " << type << " nz\n";
  }
  out << "end_header\n";
}

void format_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  out.write(buf, res.ptr - buf);
}

void save_ply(const PointCloud& cloud, const fs::path& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path.string() + ": cannot open for writing");
  write_ply_header(out, cloud, binary);
  if (binary) {
    for (Index i = 0; i < cloud.size(); ++i) {
      out.write(reinterpret_cast<const char*>(cloud.point(i).data()), 24);
      if (cloud.has_normals())
        out.write(reinterpret_cast<const char*>(cloud.normal(i).data()), 24);
    }
  } else {
    for (Index i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.point(i);
      format_double(out, p.x());
      out.put(' ');
      format_double(out, p.y());
      out.put(' ');
      format_double(out, p.z());
      if (cloud.has_normals()) {
        const Vec3& n = cloud.normal(i);
        for (int c = 0; c < 3; ++c) {
          out.put(' ');
          format_double(out, n[c]);
        }
      }
      out.put('\n');
    }
  }
  if (!out) fail(path.string() + ": write failed");
}

void save_xyz(const PointCloud& cloud, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path.string() + ": cannot open for writing");
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.point(i);
    format_double(out, p.x());
    out.put(' ');
    format_double(out, p.y());
    out.put(' ');
    format_double(out, p.z());
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normal(i);
      for (int c = 0; c < 3; ++c) {
        out.put(' ');
        format_double(out, n[c]);
      }
    }
    out.put('\n');
  }
  if (!out) fail(path.string() + ": write failed");
}

}  // namespace

CloudFormat format_from_path(const fs::path& path, bool ascii_ply) {
  const std::string ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::Xyz;
  if (ext == ".ply") return ascii_ply ? CloudFormat::PlyAscii : CloudFormat::PlyBinaryLE;
  fail(path.string() + ": cannot infer cloud format from extension '" + ext + "'");
}

PointCloud load_cloud(const fs::path& path, CloudFormat format) {
  if (!fs::exists(path)) fail(path.string() + ": no such file");
  PointCloud cloud =
      (format == CloudFormat::Xyz) ? load_xyz(path) : load_ply(path);
  cloud.validate();
  return cloud;
}

PointCloud load_cloud(const fs::path& path) { return load_cloud(path, format_from_path(path)); }

void save_cloud(const PointCloud& cloud, const fs::path& path, CloudFormat format) {
  require(!cloud.empty(), "save_cloud: refusing to write an empty cloud");
  const fs::path tmp = path.string() + ".tmp";
  switch (format) {
    case CloudFormat::PlyAscii: save_ply(cloud, tmp, false); break;
    case CloudFormat::PlyBinaryLE: save_ply(cloud, tmp, true); break;
    case CloudFormat::Xyz: save_xyz(cloud, tmp); break;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(path.string() + ": rename failed: " + ec.message());
  }
}

void save_cloud(const PointCloud& cloud, const fs::path& path) {
  save_cloud(cloud, path, format_from_path(path));
}

}  // namespace sgc
