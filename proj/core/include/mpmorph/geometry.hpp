#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mpmorph/types.hpp"

namespace mpmorph {

/// Source or target shape. Analytic primitives are placed in normalized
/// domain coordinates ([0, 1] per axis, scaled by grid_res * dx); point
/// clouds are given in world units.
struct GeometrySpec {
  enum class Kind { kSphere, kBox, kLetter, kPointCloud, kUnion };

  Kind kind = Kind::kSphere;
  std::vector<double> center{0.5, 0.5, 0.5};
  double radius = 0.25;                        // sphere
  std::vector<double> half_extents{0.2, 0.2, 0.2};  // box
  char glyph = 'A';                            // letter: 5x7 bitmap glyph
  double height = 0.5;                         // letter: glyph height
  double depth = 0.1;                          // letter: extrusion half thickness (3-D)
  std::string path;                            // point cloud file
  bool recenter = false;                       // point cloud: move centroid to domain centre
  bool fit = false;                            // point cloud: scale into 70% of the domain
  std::vector<GeometrySpec> parts;             // union

  bool operator==(const GeometrySpec&) const = default;
};

std::string to_string(GeometrySpec::Kind kind);
GeometrySpec::Kind parse_geometry_kind(const std::string& name);

/// Whether the 5x7 glyph bitmap has a filled cell at (col, row); row 0 is the top.
bool glyph_cell(char glyph, int col, int row);
bool glyph_supported(char glyph);

/// Inside test for an analytic primitive, in normalized coordinates.
template <int Dim>
bool contains(const GeometrySpec& spec, const Vec<Dim>& u);

/// Analytic volume (area in 2-D) in normalized units, or a negative value
/// when the shape has none (letters are exact, unions and clouds are not).
template <int Dim>
double analytic_volume(const GeometrySpec& spec);

/// Axis-aligned bounds in normalized coordinates.
template <int Dim>
void bounds(const GeometrySpec& spec, Vec<Dim>& lo, Vec<Dim>& hi);

}  // namespace mpmorph
