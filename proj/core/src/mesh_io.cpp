#include "morphshell/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace morphshell {

namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  return out;
}

[[noreturn]] void parse_fail(const fs::path& path, int line, const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

std::string format_coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

MeshData read_mesh_file(const fs::path& path) {
  auto in = open_input(path);
  MeshData data;
  std::string raw;
  int lineno = 0;
  enum class Section { None, Nodes, Triangles } section = Section::None;
  int expected = 0;
  int seen = 0;
  std::vector<char> node_set, tri_set;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = strip_comment(raw);
    if (blank(line)) {
      continue;
    }
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "nodes" || head == "triangles") {
      if (section != Section::None && seen != expected) {
        parse_fail(path, lineno, "previous section declared " + std::to_string(expected) +
                                     " records but has " + std::to_string(seen));
      }
      if (!(ss >> expected) || expected <= 0) {
        parse_fail(path, lineno, "expected a positive record count after '" + head + "'");
      }
      seen = 0;
      if (head == "nodes") {
        section = Section::Nodes;
        data.nodes.assign(static_cast<std::size_t>(expected), Vec3::Zero());
        node_set.assign(static_cast<std::size_t>(expected), 0);
      } else {
        section = Section::Triangles;
        data.triangles.assign(static_cast<std::size_t>(expected), Triangle{0, 0, 0});
        tri_set.assign(static_cast<std::size_t>(expected), 0);
      }
      continue;
    }
    if (section == Section::None) {
      parse_fail(path, lineno, "record before any 'nodes' or 'triangles' header");
    }
    std::istringstream rec(line);
    int idx = -1;
    if (!(rec >> idx)) {
      parse_fail(path, lineno, "expected a record index");
    }
    if (seen >= expected) {
      parse_fail(path, lineno, "more records than declared");
    }
    if (section == Section::Nodes) {
      double x, y, z;
      if (!(rec >> x >> y >> z)) {
        parse_fail(path, lineno, "node record needs index x y z");
      }
      if (idx < 0 || idx >= expected || node_set[static_cast<std::size_t>(idx)]) {
        parse_fail(path, lineno, "node index " + std::to_string(idx) + " out of range or repeated");
      }
      node_set[static_cast<std::size_t>(idx)] = 1;
      data.nodes[static_cast<std::size_t>(idx)] = Vec3(x, y, z);
    } else {
      int a, b, c, flag;
      if (!(rec >> a >> b >> c >> flag)) {
        parse_fail(path, lineno, "triangle record needs index n1 n2 n3 region-flag");
      }
      if (flag != 0 && flag != 1) {
        parse_fail(path, lineno, "region flag must be 0 (single) or 1 (bilayer)");
      }
      if (idx < 0 || idx >= expected || tri_set[static_cast<std::size_t>(idx)]) {
        parse_fail(path, lineno,
                   "triangle index " + std::to_string(idx) + " out of range or repeated");
      }
      tri_set[static_cast<std::size_t>(idx)] = 1;
      data.triangles[static_cast<std::size_t>(idx)] = {a, b, c};
      if (flag == 1) {
        data.bilayer_triangles.push_back(idx);
      }
    }
    std::string extra;
    if (rec >> extra) {
      parse_fail(path, lineno, "unexpected trailing field '" + extra + "'");
    }
    ++seen;
  }
  if (section != Section::None && seen != expected) {
    parse_fail(path, lineno, "section declared " + std::to_string(expected) + " records but has " +
                                 std::to_string(seen));
  }
  if (data.nodes.empty() || data.triangles.empty()) {
    throw InputError(path.string() + ": missing 'nodes' or 'triangles' section");
  }
  std::sort(data.bilayer_triangles.begin(), data.bilayer_triangles.end());
  return data;
}

void write_mesh_file(const fs::path& path, const Mesh& mesh, const DofVector& x) {
  check_dofs(mesh, x);
  auto out = open_output(path);
  out << "nodes " << mesh.num_nodes() << "\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3 p = x.node(i);
    out << i << ' ' << format_coord(p.x()) << ' ' << format_coord(p.y()) << ' '
        << format_coord(p.z()) << "\n";
  }
  out << "triangles " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    out << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' '
        << (mesh.triangle_regions()[static_cast<std::size_t>(t)] == Region::Bilayer ? 1 : 0)
        << "\n";
  }
}

MeshData read_obj(const fs::path& path) {
  auto in = open_input(path);
  MeshData data;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = strip_comment(raw);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) {
      continue;
    }
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        parse_fail(path, lineno, "vertex record needs x y z");
      }
      data.nodes.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) {
        const auto slash = tok.find('/');
        int v = 0;
        try {
          v = std::stoi(tok.substr(0, slash));
        } catch (const std::exception&) {
          parse_fail(path, lineno, "bad face index '" + tok + "'");
        }
        // negative indices are relative to the end of the vertex list
        v = v > 0 ? v - 1 : static_cast<int>(data.nodes.size()) + v;
        poly.push_back(v);
      }
      if (poly.size() < 3) {
        parse_fail(path, lineno, "face with fewer than 3 vertices");
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        data.triangles.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  if (data.nodes.empty() || data.triangles.empty()) {
    throw InputError(path.string() + ": no vertices or faces");
  }
  return data;
}

void write_obj(const fs::path& path, const Mesh& mesh, const DofVector& x) {
  check_dofs(mesh, x);
  auto out = open_output(path);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3 p = x.node(i);
    out << "v " << format_coord(p.x()) << ' ' << format_coord(p.y()) << ' '
        << format_coord(p.z()) << "\n";
  }
  for (const auto& t : mesh.triangles()) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
  }
}

std::vector<int> read_region_file(const fs::path& path) {
  auto in = open_input(path);
  std::vector<int> out;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::istringstream ss(strip_comment(raw));
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) {
          throw std::invalid_argument(tok);
        }
        out.push_back(v);
      } catch (const std::exception&) {
        parse_fail(path, lineno, "bad triangle index '" + tok + "'");
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MeshData load_mesh_data(const fs::path& path, const std::optional<fs::path>& regions) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  MeshData data = ext == ".obj" ? read_obj(path) : read_mesh_file(path);
  if (regions) {
    data.bilayer_triangles = read_region_file(*regions);
  }
  return data;
}

Mesh load_mesh(const fs::path& path, const std::optional<fs::path>& regions) {
  MeshData data = load_mesh_data(path, regions);
  try {
    return build_mesh(std::move(data.nodes), std::move(data.triangles), data.bilayer_triangles);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace morphshell
