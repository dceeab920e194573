#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpmorph/frame.hpp"

namespace mpmorph {

/// Points read from disk; masses/loss are empty when the file has none.
struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<double> masses;
  std::vector<double> loss;
};

/// ASCII PLY reader: vertex element with float/double x, y, z and optional
/// mass/loss properties; other elements are skipped. Throws ParseError with
/// the offending line, IoError when the file cannot be opened.
PointCloud read_ply(const std::filesystem::path& path);

/// Whitespace separated "x y z [mass]" lines; '#' starts a comment.
PointCloud read_xyz(const std::filesystem::path& path);

/// Dispatches on the extension (.ply, anything else is xyz).
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Writes x y z loss vertices with %.9g formatting. Throws IoError.
void write_ply(const std::filesystem::path& path, const std::vector<Eigen::Vector3d>& positions,
               const std::vector<double>& loss);

/// "frame_%06d.ply"
std::string frame_filename(int index);

/// Writes one frame into `dir` (2-D frames get z = 0) and returns its path.
template <int Dim>
std::filesystem::path write_frame(const FrameRecord<Dim>& record, const std::filesystem::path& dir);

}  // namespace mpmorph
