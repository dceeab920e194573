#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "mpmorph/config.hpp"
#include "mpmorph/errors.hpp"
#include "mpmorph/ply.hpp"
#include "mpmorph/seeding.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace mpmorph {
namespace {

using test::scratch_dir;

GeometrySpec sphere(double r) {
  GeometrySpec g;
  g.kind = GeometrySpec::Kind::kSphere;
  g.center = {0.5, 0.5, 0.5};
  g.radius = r;
  return g;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(Seeding, SphereCountMatchesCoveredCells) {
  SimParams<3> params;  // 32^3, unit domain
  const GeometrySpec g = sphere(0.3);
  const auto s = seed_particles<3>(g, params, 1);
  // Cells counted independently by their centres.
  int cells = 0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      for (int k = 0; k < 32; ++k) {
        const Vec<3> c = (Vec<3>(i, j, k) + Vec<3>::Constant(0.5)) * params.dx;
        if ((c - Vec<3>::Constant(0.5)).norm() < 0.3) ++cells;
      }
  EXPECT_NEAR(static_cast<double>(s.size()), 8.0 * cells, 0.1 * 8.0 * cells);
}

TEST(Seeding, SphereMassMatchesAnalyticVolume) {
  SimParams<3> params;
  const auto s = seed_particles<3>(sphere(0.3), params, 2);
  const double expected = params.rho * 4.0 / 3.0 * std::numbers::pi * 0.3 * 0.3 * 0.3;
  EXPECT_NEAR(total_mass(s), expected, 0.01 * expected);
  double V = 0.0;
  for (double v : s.V0) V += v;
  EXPECT_NEAR(total_mass(s), params.rho * V, 1e-12 * expected);
}

TEST(Seeding, RestStateAndDeterminism) {
  SimParams<3> params;
  const auto a = seed_particles<3>(sphere(0.2), params, 7);
  const auto b = seed_particles<3>(sphere(0.2), params, 7);
  const auto c = seed_particles<3>(sphere(0.2), params, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.x, c.x);
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a.F[p], Mat<3>::Identity());
    EXPECT_EQ(a.F_ctrl[p].norm(), 0.0);
    EXPECT_EQ(a.v[p].norm(), 0.0);
    EXPECT_EQ(a.C[p].norm(), 0.0);
  }
}

TEST(Seeding, EmptyAndOutOfDomain) {
  SimParams<2> params;
  GeometrySpec tiny = sphere(1e-4);
  EXPECT_THROW(seed_particles<2>(tiny, params, 1), EmptyGeometry);
  GeometrySpec big = sphere(0.6);
  EXPECT_THROW(seed_particles<2>(big, params, 1), OutOfDomain);
}

TEST(Seeding, BoxLetterAndUnion) {
  SimParams<2> params;
  GeometrySpec box;
  box.kind = GeometrySpec::Kind::kBox;
  box.center = {0.5, 0.5};
  box.half_extents = {0.2, 0.1};
  const auto sb = seed_particles<2>(box, params, 1);
  EXPECT_NEAR(total_mass(sb), params.rho * 0.4 * 0.2, 0.01 * params.rho * 0.08);
  for (const auto& x : sb.x) {
    EXPECT_LT(std::abs(x[0] - 0.5), 0.2);
    EXPECT_LT(std::abs(x[1] - 0.5), 0.1);
  }

  GeometrySpec letter;
  letter.kind = GeometrySpec::Kind::kLetter;
  letter.center = {0.5, 0.5};
  letter.glyph = 'T';
  letter.height = 0.5;
  EXPECT_GT(seed_particles<2>(letter, params, 1).size(), 100u);

  GeometrySpec both;
  both.kind = GeometrySpec::Kind::kUnion;
  GeometrySpec left = sphere(0.1), right = sphere(0.1);
  left.center = {0.3, 0.5};
  right.center = {0.7, 0.5};
  both.parts = {left, right};
  const auto su = seed_particles<2>(both, params, 1);
  const auto sl = seed_particles<2>(left, params, 1);
  EXPECT_NEAR(static_cast<double>(su.size()), 2.0 * sl.size(), 0.05 * sl.size());
}

TEST(Ply, RoundTripKeepsNineDigits) {
  const fs::path dir = scratch_dir("ply_round_trip");
  FrameRecord<3> rec;
  rec.index = 7;
  rec.positions = {Vec<3>(0.123456789012, 0.5, 0.75), Vec<3>(1.0 / 3.0, 2.0 / 3.0, 0.1),
                   Vec<3>(0.987654321, 0.25, 0.4)};
  rec.loss = {0.0, 0.5, 1.0};
  const fs::path path = write_frame<3>(rec, dir);
  EXPECT_EQ(path.filename(), "frame_000007.ply");
  const PointCloud pc = read_ply(path);
  ASSERT_EQ(pc.positions.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    for (int a = 0; a < 3; ++a) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", rec.positions[p][a]);
      EXPECT_EQ(pc.positions[p][a], std::strtod(buf, nullptr));
      EXPECT_NEAR(pc.positions[p][a], rec.positions[p][a], 1e-9);
    }
    EXPECT_EQ(pc.loss[p], rec.loss[p]);
  }
}

TEST(Ply, HeaderIsExact) {
  const fs::path dir = scratch_dir("ply_header");
  FrameRecord<2> rec;
  rec.index = 1;
  rec.positions = {Vec<2>(0.25, 0.5)};
  rec.loss = {0.125};
  const fs::path path = write_frame<2>(rec, dir);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(),
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
            "property float z\nproperty float loss\nend_header\n0.25 0.5 0 0.125\n");
}

TEST(Ply, EmptyCloud) {
  const fs::path dir = scratch_dir("ply_empty");
  write_ply(dir / "empty.ply", {}, {});
  const PointCloud pc = read_ply(dir / "empty.ply");
  EXPECT_TRUE(pc.positions.empty());
}

TEST(Ply, MalformedHeaderNamesLine) {
  const fs::path dir = scratch_dir("ply_bad");
  write_text(dir / "bad.ply", "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty flot y\n"
                              "property float z\nend_header\n0 0 0\n1 1 1\n");
  try {
    read_ply(dir / "bad.ply");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
  }
  write_text(dir / "magic.ply", "plx\n");
  EXPECT_THROW(read_ply(dir / "magic.ply"), ParseError);
  write_text(dir / "short.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                                "property float z\nend_header\n0 0 0\n");
  EXPECT_THROW(read_ply(dir / "short.ply"), ParseError);
  write_text(dir / "bin.ply", "ply\nformat binary_little_endian 1.0\nend_header\n");
  EXPECT_THROW(read_ply(dir / "bin.ply"), ParseError);
  EXPECT_THROW(read_ply(dir / "missing.ply"), IoError);
}

TEST(Ply, SkipsOtherElementsAndReadsMass) {
  const fs::path dir = scratch_dir("ply_faces");
  write_text(dir / "m.ply",
             "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty double x\n"
             "property double y\nproperty double z\nproperty float mass\nelement face 1\n"
             "property list uchar int vertex_indices\nend_header\n0.1 0.2 0.3 2\n0.4 0.5 0.6 3\n3 0 1 1\n");
  const PointCloud pc = read_ply(dir / "m.ply");
  ASSERT_EQ(pc.positions.size(), 2u);
  EXPECT_EQ(pc.masses, std::vector<double>({2.0, 3.0}));
}

TEST(Xyz, ColumnsAndComments) {
  const fs::path dir = scratch_dir("xyz");
  write_text(dir / "a.xyz", "# header\n0.1 0.2 0.3\n0.4 0.5 0.6  # trailing\n\n");
  EXPECT_EQ(read_point_cloud(dir / "a.xyz").positions.size(), 2u);
  write_text(dir / "b.xyz", "0.1 0.2 0.3\n0.4 0.5\n");
  try {
    read_xyz(dir / "b.xyz");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(PointCloud, RecentersLargeCloud) {
  const fs::path dir = scratch_dir("pc_recenter");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::vector<Eigen::Vector3d> pts(10000);
  for (auto& p : pts) p = Eigen::Vector3d(u(rng), u(rng), u(rng));
  write_ply(dir / "cloud.ply", pts, std::vector<double>(pts.size(), 0.0));
  SimParams<3> params;
  const VecField<3> x = load_point_cloud<3>((dir / "cloud.ply").string(), params, true);
  ASSERT_EQ(x.size(), 10000u);
  Vec<3> c = Vec<3>::Zero();
  for (const auto& p : x) c += p;
  c /= static_cast<double>(x.size());
  EXPECT_LT((c - Vec<3>::Constant(0.5 * params.domain_length())).norm(), 1e-6);
  EXPECT_THROW(load_point_cloud<3>((dir / "cloud.ply").string(), params, false), OutOfDomain);
}

TEST(PointCloud, FitScalesIntoDomain) {
  const fs::path dir = scratch_dir("pc_fit");
  std::vector<Eigen::Vector3d> pts{{-10, 0, 0}, {10, 2, 1}, {0, -3, 5}};
  write_ply(dir / "far.ply", pts, {0, 0, 0});
  SimParams<3> params;
  const VecField<3> x = load_point_cloud<3>((dir / "far.ply").string(), params, true, true);
  for (const auto& p : x)
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(p[a], 0.15 - 1e-12);
      EXPECT_LE(p[a], 0.85 + 1e-12);
    }
}

TEST(Config, RoundTripIsIdentity) {
  SceneConfig c = test::disk_to_square();
  c.sim.gravity = {0.0, -9.8};
  c.optimizer.loss = LossKind::kMass;
  c.optimizer.persist_moments = true;
  c.seeding.options.jitter = 0.25;
  const SceneConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, ParsesDeskConfig) {
  const SceneConfig c = load_config(fs::path(MPMORPH_SOURCE_DIR) / "configs" / "desk_sphere_to_cube.json");
  EXPECT_EQ(c.dim, 3);
  EXPECT_EQ(c.frames, 120);
  EXPECT_EQ(c.source.kind, GeometrySpec::Kind::kSphere);
  EXPECT_EQ(c.target.kind, GeometrySpec::Kind::kBox);
  EXPECT_EQ(c.sim.grid_res, 16);
  EXPECT_EQ(c.optimizer.passes, 3);
  EXPECT_EQ(c.optimizer.iterations, 4);
}

TEST(Config, StrictAndValidated) {
  const std::string base = serialize_config(test::disk_to_square());
  EXPECT_THROW(parse_config(R"({"dim": 2, "bogus": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dim": 2, "sim": {"grid_res": 16, "mu_typo": 1}})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dim": 4})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dim": 2, "optimizer": {"loss": "chamfer"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dim": 2, "source": {"type": "cone"}})"), ConfigError);
  SceneConfig c = parse_config(base);
  c.optimizer.passes = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, DxDefaultsToUnitDomain) {
  const SceneConfig c = parse_config(R"({"dim": 2, "source": {"type": "sphere", "center": [0.5, 0.5]},
                                         "target": {"type": "sphere", "center": [0.5, 0.5]},
                                         "sim": {"grid_res": 20}})");
  EXPECT_DOUBLE_EQ(c.sim.dx, 1.0 / 20);
}

TEST(Config, MissingFiles) {
  const fs::path dir = scratch_dir("config_missing");
  EXPECT_THROW(load_config(dir / "nope.json"), ConfigError);
  write_text(dir / "pc.json", R"({"dim": 3, "source": {"type": "points", "path": "cloud.ply"},
                                  "target": {"type": "sphere", "center": [0.5, 0.5, 0.5]}})");
  EXPECT_THROW(load_config(dir / "pc.json"), ConfigError);
  write_ply(dir / "cloud.ply", {{0.5, 0.5, 0.5}}, {0.0});
  const SceneConfig c = load_config(dir / "pc.json");
  EXPECT_EQ(fs::path(c.source.path), (dir / "cloud.ply").lexically_normal());
}

TEST(Scene, TargetMassMatchesSource) {
  const Scene<2> s = build_scene<2>(test::disk_to_square());
  double tm = 0.0;
  for (double m : s.target_m) tm += m;
  EXPECT_NEAR(tm, total_mass(s.source), 1e-12 * tm);
  EXPECT_NEAR(s.objective.target_field().total(), tm, 1e-12 * tm);
}

TEST(Scene, PositionLossNeedsEqualCounts) {
  SceneConfig c = test::disk_to_square();
  c.optimizer.loss = LossKind::kPosition;
  EXPECT_THROW(build_scene<2>(c), ConfigError);
  // A point-cloud target holding the source particles gives a correspondence.
  const Scene<2> first = build_scene<2>(test::disk_to_square());
  const fs::path dir = scratch_dir("scene_position");
  std::vector<Eigen::Vector3d> pts;
  for (const auto& x : first.source.x) pts.emplace_back(x[0], x[1], 0.0);
  write_ply(dir / "src.ply", pts, std::vector<double>(pts.size(), 0.0));
  c.target = GeometrySpec{};
  c.target.kind = GeometrySpec::Kind::kPointCloud;
  c.target.path = (dir / "src.ply").string();
  const Scene<2> s = build_scene<2>(c);
  EXPECT_LT(s.objective.value(s.source, s.params), 1e-12);
}

}  // namespace
}  // namespace mpmorph
