#include "mpmorph/ply.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mpmorph/errors.hpp"

namespace mpmorph {

namespace {

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

bool is_scalar_type(const std::string& t) {
  static const char* kTypes[] = {"char",  "uchar",  "short",  "ushort", "int",     "uint",    "float",
                                 "double", "int8",  "uint8",  "int16",  "uint16",  "int32",   "uint32",
                                 "float32", "float64"};
  for (const char* k : kTypes)
    if (t == k) return true;
  return false;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  int line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", line_no == 0 ? 1 : line_no);
  std::vector<PlyElement> elements;
  bool format_seen = false;
  while (true) {
    if (!next_line()) throw ParseError("unterminated header", line_no + 1);
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key.empty() || key == "comment" || key == "obj_info") continue;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt != "ascii") throw ParseError("only ascii PLY is supported, got '" + fmt + "'", line_no);
      format_seen = true;
    } else if (key == "element") {
      PlyElement e;
      if (!(ss >> e.name >> e.count) || e.count < 0) throw ParseError("malformed element line", line_no);
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, item_type, name;
        if (!(ss >> count_type >> item_type >> name)) throw ParseError("malformed list property", line_no);
        elements.back().has_list = true;
        elements.back().properties.push_back(name);
      } else {
        std::string name;
        if (!is_scalar_type(type) || !(ss >> name))
          throw ParseError("malformed property line '" + line + "'", line_no);
        elements.back().properties.push_back(name);
      }
    } else {
      throw ParseError("unexpected header keyword '" + key + "'", line_no);
    }
  }
  if (!format_seen) throw ParseError("header has no format line", line_no);

  PointCloud cloud;
  for (const PlyElement& e : elements) {
    if (e.name != "vertex") {
      for (long k = 0; k < e.count; ++k)
        if (!next_line()) throw ParseError("truncated element '" + e.name + "'", line_no + 1);
      continue;
    }
    int ix = -1, iy = -1, iz = -1, imass = -1, iloss = -1;
    for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
      const std::string& p = e.properties[static_cast<std::size_t>(k)];
      if (p == "x") ix = k;
      if (p == "y") iy = k;
      if (p == "z") iz = k;
      if (p == "mass") imass = k;
      if (p == "loss") iloss = k;
    }
    if (ix < 0 || iy < 0) throw ParseError("vertex element lacks x/y properties", line_no);
    if (e.has_list) throw ParseError("list properties on vertices are not supported", line_no);
    cloud.positions.reserve(static_cast<std::size_t>(e.count));
    std::vector<double> values(e.properties.size());
    for (long k = 0; k < e.count; ++k) {
      if (!next_line()) throw ParseError("expected " + std::to_string(e.count) + " vertices", line_no + 1);
      std::istringstream ss(line);
      for (double& v : values)
        if (!(ss >> v)) throw ParseError("malformed vertex line '" + line + "'", line_no);
      cloud.positions.emplace_back(values[static_cast<std::size_t>(ix)], values[static_cast<std::size_t>(iy)],
                                   iz >= 0 ? values[static_cast<std::size_t>(iz)] : 0.0);
      if (imass >= 0) cloud.masses.push_back(values[static_cast<std::size_t>(imass)]);
      if (iloss >= 0) cloud.loss.push_back(values[static_cast<std::size_t>(iloss)]);
    }
  }
  return cloud;
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  PointCloud cloud;
  std::string line;
  int line_no = 0;
  int columns = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) throw ParseError("non-numeric token in '" + line + "'", line_no);
    if (values.empty()) continue;
    if (values.size() != 3 && values.size() != 4) throw ParseError("expected 3 or 4 columns", line_no);
    if (columns >= 0 && static_cast<int>(values.size()) != columns)
      throw ParseError("inconsistent column count", line_no);
    columns = static_cast<int>(values.size());
    cloud.positions.emplace_back(values[0], values[1], values[2]);
    if (columns == 4) cloud.masses.push_back(values[3]);
  }
  return cloud;
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".ply") return read_ply(path);
  return read_xyz(path);
}

void write_ply(const std::filesystem::path& path, const std::vector<Eigen::Vector3d>& positions,
               const std::vector<double>& loss) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  std::fprintf(f, "ply\nformat ascii 1.0\nelement vertex %zu\n", positions.size());
  std::fprintf(f, "property float x\nproperty float y\nproperty float z\nproperty float loss\nend_header\n");
  for (std::size_t p = 0; p < positions.size(); ++p) {
    const double l = p < loss.size() ? loss[p] : 0.0;
    std::fprintf(f, "%.9g %.9g %.9g %.9g\n", positions[p].x(), positions[p].y(), positions[p].z(), l);
  }
  const bool ok = std::ferror(f) == 0;
  if (std::fclose(f) != 0 || !ok) throw IoError("failed writing '" + path.string() + "'");
}

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.ply", index);
  return buf;
}

template <int Dim>
std::filesystem::path write_frame(const FrameRecord<Dim>& record, const std::filesystem::path& dir) {
  std::vector<Eigen::Vector3d> positions(record.positions.size(), Eigen::Vector3d::Zero());
  for (std::size_t p = 0; p < positions.size(); ++p) positions[p].template head<Dim>() = record.positions[p];
  const std::filesystem::path path = dir / frame_filename(record.index);
  write_ply(path, positions, record.loss);
  return path;
}

template std::filesystem::path write_frame<2>(const FrameRecord<2>&, const std::filesystem::path&);
template std::filesystem::path write_frame<3>(const FrameRecord<3>&, const std::filesystem::path&);

}  // namespace mpmorph
