#include "mpmorph/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "mpmorph/errors.hpp"

namespace mpmorph {

namespace {

// Classic 5x7 raster font, one byte per row (bit 4 = leftmost column).
constexpr std::array<std::array<unsigned char, 7>, 26> kFont = {{
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // A
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
    {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},  // D
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
    {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
    {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // Q
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // R
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // S
    {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // T
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // U
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // V
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A},  // W
    {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // X
    {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04},  // Y
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // Z
}};

constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 7;

template <int Dim>
Vec<Dim> center_of(const GeometrySpec& spec) {
  Vec<Dim> c;
  for (int a = 0; a < Dim; ++a) c[a] = a < static_cast<int>(spec.center.size()) ? spec.center[a] : 0.5;
  return c;
}

template <int Dim>
Vec<Dim> half_extents_of(const GeometrySpec& spec) {
  Vec<Dim> h;
  for (int a = 0; a < Dim; ++a)
    h[a] = a < static_cast<int>(spec.half_extents.size()) ? spec.half_extents[a] : spec.half_extents.back();
  return h;
}

int glyph_count(char glyph) {
  int n = 0;
  for (int r = 0; r < kGlyphRows; ++r)
    for (int c = 0; c < kGlyphCols; ++c) n += glyph_cell(glyph, c, r) ? 1 : 0;
  return n;
}

}  // namespace

std::string to_string(GeometrySpec::Kind kind) {
  switch (kind) {
    case GeometrySpec::Kind::kSphere: return "sphere";
    case GeometrySpec::Kind::kBox: return "box";
    case GeometrySpec::Kind::kLetter: return "letter";
    case GeometrySpec::Kind::kPointCloud: return "points";
    case GeometrySpec::Kind::kUnion: return "union";
  }
  return "unknown";
}

GeometrySpec::Kind parse_geometry_kind(const std::string& name) {
  if (name == "sphere") return GeometrySpec::Kind::kSphere;
  if (name == "box") return GeometrySpec::Kind::kBox;
  if (name == "letter") return GeometrySpec::Kind::kLetter;
  if (name == "points") return GeometrySpec::Kind::kPointCloud;
  if (name == "union") return GeometrySpec::Kind::kUnion;
  throw ConfigError("unknown geometry type '" + name + "'");
}

bool glyph_supported(char glyph) { return glyph >= 'A' && glyph <= 'Z'; }

bool glyph_cell(char glyph, int col, int row) {
  if (!glyph_supported(glyph) || col < 0 || col >= kGlyphCols || row < 0 || row >= kGlyphRows) return false;
  const unsigned char bits = kFont[static_cast<std::size_t>(glyph - 'A')][static_cast<std::size_t>(row)];
  return (bits >> (kGlyphCols - 1 - col)) & 1U;
}

template <int Dim>
bool contains(const GeometrySpec& spec, const Vec<Dim>& u) {
  switch (spec.kind) {
    case GeometrySpec::Kind::kSphere:
      return (u - center_of<Dim>(spec)).norm() < spec.radius;
    case GeometrySpec::Kind::kBox:
      return ((u - center_of<Dim>(spec)).cwiseAbs().array() < half_extents_of<Dim>(spec).array()).all();
    case GeometrySpec::Kind::kLetter: {
      const Vec<Dim> d = u - center_of<Dim>(spec);
      const double cell = spec.height / kGlyphRows;
      const double col_f = (d[0] + 0.5 * kGlyphCols * cell) / cell;
      const double row_f = (0.5 * kGlyphRows * cell - d[1]) / cell;
      if (col_f < 0.0 || row_f < 0.0) return false;
      if constexpr (Dim == 3) {
        if (std::abs(d[2]) >= spec.depth) return false;
      }
      return glyph_cell(spec.glyph, static_cast<int>(col_f), static_cast<int>(row_f));
    }
    case GeometrySpec::Kind::kUnion:
      for (const GeometrySpec& part : spec.parts)
        if (contains<Dim>(part, u)) return true;
      return false;
    case GeometrySpec::Kind::kPointCloud:
      return false;
  }
  return false;
}

template <int Dim>
double analytic_volume(const GeometrySpec& spec) {
  switch (spec.kind) {
    case GeometrySpec::Kind::kSphere:
      if constexpr (Dim == 2) return std::numbers::pi * spec.radius * spec.radius;
      else return 4.0 / 3.0 * std::numbers::pi * spec.radius * spec.radius * spec.radius;
    case GeometrySpec::Kind::kBox:
      return (2.0 * half_extents_of<Dim>(spec)).prod();
    case GeometrySpec::Kind::kLetter: {
      const double cell = spec.height / kGlyphRows;
      const double area = glyph_count(spec.glyph) * cell * cell;
      if constexpr (Dim == 2) return area;
      else return area * 2.0 * spec.depth;
    }
    default:
      return -1.0;
  }
}

template <int Dim>
void bounds(const GeometrySpec& spec, Vec<Dim>& lo, Vec<Dim>& hi) {
  const Vec<Dim> c = center_of<Dim>(spec);
  switch (spec.kind) {
    case GeometrySpec::Kind::kSphere:
      lo = c.array() - spec.radius;
      hi = c.array() + spec.radius;
      return;
    case GeometrySpec::Kind::kBox:
      lo = c - half_extents_of<Dim>(spec);
      hi = c + half_extents_of<Dim>(spec);
      return;
    case GeometrySpec::Kind::kLetter: {
      const double cell = spec.height / kGlyphRows;
      lo = c;
      hi = c;
      lo[0] -= 0.5 * kGlyphCols * cell;
      hi[0] += 0.5 * kGlyphCols * cell;
      lo[1] -= 0.5 * kGlyphRows * cell;
      hi[1] += 0.5 * kGlyphRows * cell;
      if constexpr (Dim == 3) {
        lo[2] -= spec.depth;
        hi[2] += spec.depth;
      }
      return;
    }
    case GeometrySpec::Kind::kUnion: {
      lo.setConstant(1e300);
      hi.setConstant(-1e300);
      for (const GeometrySpec& part : spec.parts) {
        Vec<Dim> l, h;
        bounds<Dim>(part, l, h);
        lo = lo.cwiseMin(l);
        hi = hi.cwiseMax(h);
      }
      return;
    }
    case GeometrySpec::Kind::kPointCloud:
      lo.setZero();
      hi.setOnes();
      return;
  }
}

#define MPMORPH_INSTANTIATE(D)                                        \
  template bool contains<D>(const GeometrySpec&, const Vec<D>&);      \
  template double analytic_volume<D>(const GeometrySpec&);            \
  template void bounds<D>(const GeometrySpec&, Vec<D>&, Vec<D>&);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
