#include "mpmorph/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mpmorph/errors.hpp"

namespace mpmorph {

using nlohmann::json;

namespace {

/// Object reader that rejects keys nobody asked for.
class Strict {
 public:
  Strict(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void get_number(Strict& s, const std::string& key, double& out) {
  s.get(key, out);
}

GeometrySpec parse_geometry(const json& j, const std::string& where) {
  Strict s(j, where);
  GeometrySpec g;
  std::string type;
  s.get("type", type);
  if (type.empty()) throw ConfigError(where + ": missing 'type'");
  try {
    g.kind = parse_geometry_kind(type);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  using K = GeometrySpec::Kind;
  switch (g.kind) {
    case K::kSphere:
      s.get("center", g.center);
      get_number(s, "radius", g.radius);
      break;
    case K::kBox:
      s.get("center", g.center);
      s.get("half_extents", g.half_extents);
      break;
    case K::kLetter: {
      s.get("center", g.center);
      std::string glyph(1, g.glyph);
      s.get("glyph", glyph);
      if (glyph.size() != 1) throw ConfigError(where + ".glyph: expected one character");
      g.glyph = glyph[0];
      get_number(s, "height", g.height);
      get_number(s, "depth", g.depth);
      break;
    }
    case K::kPointCloud:
      s.get("path", g.path);
      s.get("recenter", g.recenter);
      s.get("fit", g.fit);
      break;
    case K::kUnion: {
      if (!s.has("parts")) throw ConfigError(where + ": union needs 'parts'");
      const json& parts = s.sub("parts");
      if (!parts.is_array()) throw ConfigError(where + ".parts: expected an array");
      for (std::size_t k = 0; k < parts.size(); ++k)
        g.parts.push_back(parse_geometry(parts[k], where + ".parts[" + std::to_string(k) + "]"));
      break;
    }
  }
  s.finish();
  return g;
}

json geometry_json(const GeometrySpec& g) {
  json j;
  j["type"] = to_string(g.kind);
  using K = GeometrySpec::Kind;
  switch (g.kind) {
    case K::kSphere:
      j["center"] = g.center;
      j["radius"] = g.radius;
      break;
    case K::kBox:
      j["center"] = g.center;
      j["half_extents"] = g.half_extents;
      break;
    case K::kLetter:
      j["center"] = g.center;
      j["glyph"] = std::string(1, g.glyph);
      j["height"] = g.height;
      j["depth"] = g.depth;
      break;
    case K::kPointCloud:
      j["path"] = g.path;
      j["recenter"] = g.recenter;
      j["fit"] = g.fit;
      break;
    case K::kUnion:
      j["parts"] = json::array();
      for (const auto& p : g.parts) j["parts"].push_back(geometry_json(p));
      break;
  }
  return j;
}

void validate_geometry(const GeometrySpec& g, int dim, const std::string& where) {
  using K = GeometrySpec::Kind;
  const auto need_dim = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) < dim)
      throw ConfigError(where + "." + name + ": needs " + std::to_string(dim) + " components");
  };
  switch (g.kind) {
    case K::kSphere:
      need_dim(g.center, "center");
      if (!(g.radius > 0.0)) throw ConfigError(where + ".radius must be positive");
      break;
    case K::kBox:
      need_dim(g.center, "center");
      need_dim(g.half_extents, "half_extents");
      for (int a = 0; a < dim; ++a)
        if (!(g.half_extents[static_cast<std::size_t>(a)] > 0.0))
          throw ConfigError(where + ".half_extents must be positive");
      break;
    case K::kLetter:
      need_dim(g.center, "center");
      if (!glyph_supported(g.glyph)) throw ConfigError(where + ".glyph: unsupported character");
      if (!(g.height > 0.0) || !(g.depth > 0.0)) throw ConfigError(where + ": height and depth must be positive");
      break;
    case K::kPointCloud:
      if (g.path.empty()) throw ConfigError(where + ".path is empty");
      if (!std::filesystem::exists(g.path)) throw ConfigError(where + ".path: file '" + g.path + "' not found");
      break;
    case K::kUnion:
      if (g.parts.empty()) throw ConfigError(where + ".parts is empty");
      for (std::size_t k = 0; k < g.parts.size(); ++k)
        validate_geometry(g.parts[k], dim, where + ".parts[" + std::to_string(k) + "]");
      break;
  }
}

void resolve_paths(GeometrySpec& g, const std::filesystem::path& base) {
  if (g.kind == GeometrySpec::Kind::kPointCloud && !g.path.empty() && std::filesystem::path(g.path).is_relative())
    g.path = (base / g.path).lexically_normal().string();
  if (g.kind == GeometrySpec::Kind::kPointCloud && !std::filesystem::exists(g.path))
    throw ConfigError("point cloud '" + g.path + "' not found");
  for (auto& p : g.parts) resolve_paths(p, base);
}

}  // namespace

void SceneConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("dim must be 2 or 3");
  if (frames < 1) throw ConfigError("frames must be positive");
  validate_geometry(source, dim, "source");
  validate_geometry(target, dim, "target");
  if (!sim.gravity.empty() && static_cast<int>(sim.gravity.size()) != dim)
    throw ConfigError("sim.gravity needs " + std::to_string(dim) + " components");
  if (!(seeding.options.particles_per_cell >= 1.0)) throw ConfigError("seeding.ppc must be at least 1");
  if (seeding.options.jitter < 0.0 || seeding.options.jitter > 1.0)
    throw ConfigError("seeding.jitter must lie in [0, 1]");
  if (!(optimizer.mass_scale > 0.0)) throw ConfigError("optimizer.mass_scale must be positive");
  if (optimizer.segment_len > frames) throw ConfigError("optimizer.segment_len exceeds frames");
  if (dim == 2) {
    make_sim_params<2>(*this).validate();
  } else {
    make_sim_params<3>(*this).validate();
  }
  try {
    make_plan(*this).validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

SceneConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  Strict root(j, "config");
  SceneConfig c;
  root.get("dim", c.dim);
  root.get("seed", c.seed);
  root.get("frames", c.frames);
  root.get("output_dir", c.output_dir);
  if (!root.has("source")) throw ConfigError("config: missing 'source'");
  if (!root.has("target")) throw ConfigError("config: missing 'target'");
  c.source = parse_geometry(root.sub("source"), "source");
  c.target = parse_geometry(root.sub("target"), "target");

  if (root.has("sim")) {
    Strict s(root.sub("sim"), "sim");
    s.get("mu", c.sim.mu);
    s.get("lambda", c.sim.lambda);
    s.get("density", c.sim.density);
    s.get("zeta", c.sim.zeta);
    s.get("gamma", c.sim.gamma);
    s.get("dt", c.sim.dt);
    s.get("grid_res", c.sim.grid_res);
    c.sim.dx = 1.0 / c.sim.grid_res;
    s.get("dx", c.sim.dx);
    s.get("gravity", c.sim.gravity);
    s.get("blend", c.sim.blend);
    s.get("gate", c.sim.gate);
    s.get("deterministic", c.sim.deterministic);
    s.finish();
  }
  if (root.has("optimizer")) {
    Strict s(root.sub("optimizer"), "optimizer");
    auto& o = c.optimizer;
    s.get("passes", o.passes);
    s.get("iterations", o.iterations);
    s.get("control_period", o.control_period);
    s.get("segment_len", o.segment_len);
    std::string loss = to_string(o.loss);
    s.get("loss", loss);
    o.loss = parse_loss_kind(loss);
    s.get("alpha", o.alpha);
    s.get("beta1", o.beta1);
    s.get("beta2", o.beta2);
    s.get("eps", o.eps);
    s.get("kappa", o.kappa);
    s.get("max_halvings", o.max_halvings);
    s.get("persist_moments", o.persist_moments);
    s.get("mass_scale", o.mass_scale);
    s.finish();
  }
  if (root.has("seeding")) {
    Strict s(root.sub("seeding"), "seeding");
    s.get("ppc", c.seeding.options.particles_per_cell);
    s.get("jitter", c.seeding.options.jitter);
    s.get("match_target_mass", c.seeding.match_target_mass);
    s.finish();
  }
  root.finish();
  return c;
}

std::string serialize_config(const SceneConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["output_dir"] = c.output_dir;
  j["source"] = geometry_json(c.source);
  j["target"] = geometry_json(c.target);
  j["sim"] = {{"mu", c.sim.mu},
              {"lambda", c.sim.lambda},
              {"density", c.sim.density},
              {"zeta", c.sim.zeta},
              {"gamma", c.sim.gamma},
              {"dt", c.sim.dt},
              {"grid_res", c.sim.grid_res},
              {"dx", c.sim.dx},
              {"gravity", c.sim.gravity},
              {"blend", c.sim.blend},
              {"gate", c.sim.gate},
              {"deterministic", c.sim.deterministic}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"passes", o.passes},
                    {"iterations", o.iterations},
                    {"control_period", o.control_period},
                    {"segment_len", o.segment_len},
                    {"loss", to_string(o.loss)},
                    {"alpha", o.alpha},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"eps", o.eps},
                    {"kappa", o.kappa},
                    {"max_halvings", o.max_halvings},
                    {"persist_moments", o.persist_moments},
                    {"mass_scale", o.mass_scale}};
  j["seeding"] = {{"ppc", c.seeding.options.particles_per_cell},
                  {"jitter", c.seeding.options.jitter},
                  {"match_target_mass", c.seeding.match_target_mass}};
  return j.dump(2) + "\n";
}

SceneConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  SceneConfig c = parse_config(ss.str());
  const std::filesystem::path base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  resolve_paths(c.source, base);
  resolve_paths(c.target, base);
  return c;
}

template <int Dim>
SimParams<Dim> make_sim_params(const SceneConfig& c) {
  SimParams<Dim> p;
  p.mu = c.sim.mu;
  p.lambda = c.sim.lambda;
  p.rho = c.sim.density;
  p.zeta = c.sim.zeta;
  p.gamma = c.sim.gamma;
  p.dt = c.sim.dt;
  p.grid_res = c.sim.grid_res;
  p.dx = c.sim.dx;
  p.f_ext.setZero();
  for (int a = 0; a < Dim && a < static_cast<int>(c.sim.gravity.size()); ++a)
    p.f_ext[a] = c.sim.gravity[static_cast<std::size_t>(a)];
  p.blend = c.sim.blend;
  p.gate = c.sim.gate;
  p.deterministic = c.sim.deterministic;
  return p;
}

MorphPlan make_plan(const SceneConfig& c) {
  MorphPlan plan;
  const auto& o = c.optimizer;
  plan.passes = o.passes;
  plan.segment_len = o.segment_len;
  plan.schedule.N = o.segment_len;
  plan.schedule.delta_n = o.control_period;
  plan.schedule.i_max = o.iterations;
  plan.schedule.kappa = o.kappa;
  plan.loss_kind = o.loss;
  plan.adam = {o.alpha, o.beta1, o.beta2, o.eps};
  plan.max_halvings = o.max_halvings;
  plan.persist_moments = o.persist_moments;
  return plan;
}

template <int Dim>
Scene<Dim> build_scene(const SceneConfig& c) {
  if (c.dim != Dim) throw ConfigError("config dimension does not match the requested scene");
  Scene<Dim> s;
  s.params = make_sim_params<Dim>(c);
  s.plan = make_plan(c);
  s.source = seed_particles<Dim>(c.source, s.params, c.seed, c.seeding.options);

  if (c.target.kind == GeometrySpec::Kind::kPointCloud) {
    s.target_x = load_point_cloud<Dim>(c.target.path, s.params, c.target.recenter, c.target.fit, &s.target_m);
    if (s.target_m.size() != s.target_x.size()) {
      const double per = s.source.m.empty() ? 0.0 : s.source.m.front();
      s.target_m.assign(s.target_x.size(), per);
    }
  } else {
    ParticleSet<Dim> t = seed_particles<Dim>(c.target, s.params, c.seed + 1, c.seeding.options);
    s.target_x = std::move(t.x);
    s.target_m = std::move(t.m);
  }
  if (c.seeding.match_target_mass && !s.target_m.empty()) {
    double src = 0.0, tgt = 0.0;
    for (double m : s.source.m) src += m;
    for (double m : s.target_m) tgt += m;
    if (tgt > 0.0)
      for (double& m : s.target_m) m *= src / tgt;
  }
  if (c.optimizer.loss == LossKind::kPosition && s.target_x.size() != s.source.size())
    throw ConfigError("position loss needs a target with exactly one point per source particle (" +
                      std::to_string(s.source.size()) + " vs " + std::to_string(s.target_x.size()) + ")");
  s.objective = Objective<Dim>::make(c.optimizer.loss, s.target_x, s.target_m, s.params, c.optimizer.mass_scale);
  return s;
}

template SimParams<2> make_sim_params<2>(const SceneConfig&);
template SimParams<3> make_sim_params<3>(const SceneConfig&);
template Scene<2> build_scene<2>(const SceneConfig&);
template Scene<3> build_scene<3>(const SceneConfig&);

}  // namespace mpmorph
