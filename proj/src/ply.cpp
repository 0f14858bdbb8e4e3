#include "depthcal/ply.hpp"

#include <cstring>
#include <sstream>

#include "depthcal/error.hpp"
#include "depthcal/io_util.hpp"

namespace depthcal {

namespace {

std::size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") {
    return 1;
  }
  if (type == "short" || type == "ushort" || type == "int16" ||
      type == "uint16") {
    return 2;
  }
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32") {
    return 4;
  }
  if (type == "double" || type == "float64") return 8;
  return 0;
}

struct VertexLayout {
  std::size_t count = 0;
  std::vector<std::string> types;   // per property
  int x = -1, y = -1, z = -1;       // property indices
  std::size_t stride = 0;           // bytes per vertex (binary)
  std::vector<std::size_t> offsets; // byte offset per property (binary)
};

}  // namespace

std::vector<Vec3> load_ply_points(const std::string& path) {
  const std::string data = read_file(path);

  // --- header ---
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= data.size()) throw FormatError(path + ": truncated PLY header");
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (trim(next_line()) != "ply") throw FormatError(path + ": not a PLY file");

  bool ascii = false;
  bool format_seen = false;
  VertexLayout vertex;
  bool in_vertex = false;
  bool vertex_seen = false;

  for (;;) {
    const std::string line = trim(next_line());
    if (line.empty() || line.rfind("comment", 0) == 0 ||
        line.rfind("obj_info", 0) == 0) {
      continue;
    }
    if (line == "end_header") break;
    const std::vector<std::string> tok = split_tokens(line);

    if (tok[0] == "format") {
      if (tok.size() != 3) throw FormatError(path + ": malformed format line");
      if (tok[1] == "ascii") {
        ascii = true;
      } else if (tok[1] == "binary_little_endian") {
        ascii = false;
      } else {
        throw FormatError(path + ": unsupported PLY format '" + tok[1] + "'");
      }
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw FormatError(path + ": malformed element line");
      if (tok[1] == "vertex") {
        vertex.count = static_cast<std::size_t>(
            parse_long(tok[2], path + ": vertex count"));
        in_vertex = true;
        vertex_seen = true;
      } else {
        if (!vertex_seen) {
          throw FormatError(path + ": element '" + tok[1] +
                            "' precedes the vertex element");
        }
        in_vertex = false;  // trailing elements are never read
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() == 3) {
        const std::size_t size = scalar_size(tok[1]);
        if (size == 0) {
          throw FormatError(path + ": unknown property type '" + tok[1] + "'");
        }
        const int index = static_cast<int>(vertex.types.size());
        vertex.offsets.push_back(vertex.stride);
        vertex.types.push_back(tok[1]);
        vertex.stride += size;
        if (tok[2] == "x") vertex.x = index;
        if (tok[2] == "y") vertex.y = index;
        if (tok[2] == "z") vertex.z = index;
      } else if (tok.size() == 5 && tok[1] == "list") {
        throw FormatError(path + ": list properties on vertices unsupported");
      } else {
        throw FormatError(path + ": malformed property line");
      }
    } else {
      throw FormatError(path + ": unexpected header line '" + line + "'");
    }
  }

  if (!format_seen) throw FormatError(path + ": missing format line");
  if (!vertex_seen) throw FormatError(path + ": missing vertex element");
  if (vertex.x < 0 || vertex.y < 0 || vertex.z < 0) {
    throw FormatError(path + ": vertex element lacks x, y, z properties");
  }
  for (int axis : {vertex.x, vertex.y, vertex.z}) {
    const std::string& t = vertex.types[static_cast<std::size_t>(axis)];
    if (t != "float" && t != "float32" && t != "double" && t != "float64") {
      throw FormatError(path + ": coordinate property must be float or double");
    }
  }

  std::vector<Vec3> points;
  points.reserve(vertex.count);

  if (ascii) {
    for (std::size_t i = 0; i < vertex.count; ++i) {
      std::string line;
      // Skip blank lines between rows.
      do {
        line = trim(next_line());
      } while (line.empty());
      const std::vector<std::string> tok = split_tokens(line);
      if (tok.size() < vertex.types.size()) {
        throw FormatError(path + ": vertex row " + std::to_string(i) +
                          " has too few values");
      }
      const std::string ctx = path + ": vertex row " + std::to_string(i);
      points.emplace_back(
          parse_double(tok[static_cast<std::size_t>(vertex.x)], ctx),
          parse_double(tok[static_cast<std::size_t>(vertex.y)], ctx),
          parse_double(tok[static_cast<std::size_t>(vertex.z)], ctx));
    }
  } else {
    const std::size_t need = vertex.count * vertex.stride;
    if (data.size() - pos < need) {
      throw FormatError(path + ": truncated PLY payload");
    }
    auto read_coord = [&](const char* row, int prop) -> double {
      const std::size_t p = static_cast<std::size_t>(prop);
      const char* at = row + vertex.offsets[p];
      if (vertex.types[p] == "double" || vertex.types[p] == "float64") {
        double v;
        std::memcpy(&v, at, sizeof v);
        return v;
      }
      float v;
      std::memcpy(&v, at, sizeof v);
      return static_cast<double>(v);
    };
    const char* base = data.data() + pos;
    for (std::size_t i = 0; i < vertex.count; ++i) {
      const char* row = base + i * vertex.stride;
      points.emplace_back(read_coord(row, vertex.x), read_coord(row, vertex.y),
                          read_coord(row, vertex.z));
    }
  }
  return points;
}

void save_ply_points(const std::string& path, const std::vector<Vec3>& points) {
  std::string out;
  {
    std::ostringstream header;
    header << "ply\n"
           << "format binary_little_endian 1.0\n"
           << "element vertex " << points.size() << "\n"
           << "property double x\n"
           << "property double y\n"
           << "property double z\n"
           << "end_header\n";
    out = header.str();
  }
  out.reserve(out.size() + points.size() * 24);
  for (const Vec3& p : points) {
    char buf[24];
    const double xyz[3] = {p.x(), p.y(), p.z()};
    std::memcpy(buf, xyz, sizeof xyz);
    out.append(buf, sizeof buf);
  }
  write_file_atomic(path, out);
}

}  // namespace depthcal
