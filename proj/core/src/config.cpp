#include "morphshell/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace morphshell {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  Reader(RunConfig& cfg, fs::path base) : cfg_(cfg), base_(std::move(base)) {}

  std::string at(const YAML::Node& n) const {
    const YAML::Mark m = n.Mark();
    if (m.is_null()) return cfg_.source.string();
    return cfg_.source.string() + ":" + std::to_string(m.line + 1);
  }

  /// Records line numbers of every key under `prefix` and rejects unknown ones.
  void keys(const YAML::Node& map, const std::string& prefix, const std::set<std::string>& allowed) {
    if (!map.IsMap()) throw ConfigError(at(map), "'" + prefix + "' must be a mapping");
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      const std::string full = prefix.empty() ? key : prefix + "." + key;
      if (!allowed.count(key)) throw ConfigError(at(kv.first), "unknown key '" + full + "'");
      cfg_.lines[full] = kv.first.Mark().line + 1;
    }
  }

  template <class T>
  T as(const YAML::Node& n, const std::string& key, const char* what) const {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(at(n), "'" + key + "' must be " + what);
    }
  }

  double number(const YAML::Node& n, const std::string& key) const { return as<double>(n, key, "a number"); }
  int integer(const YAML::Node& n, const std::string& key) const { return as<int>(n, key, "an integer"); }

  fs::path path(const YAML::Node& n, const std::string& key) const {
    const fs::path p = as<std::string>(n, key, "a path string");
    return p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  std::vector<int> int_list(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) throw ConfigError(at(n), "'" + key + "' must be a list of integers");
    std::vector<int> out;
    for (const auto& v : n) out.push_back(integer(v, key));
    return out;
  }

  Vec3 vec3(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() != 3) throw ConfigError(at(n), "'" + key + "' must be [x, y, z]");
    return {number(n[0], key), number(n[1], key), number(n[2], key)};
  }

  std::string choice(const YAML::Node& n, const std::string& key,
                     const std::set<std::string>& options) const {
    const std::string v = as<std::string>(n, key, "a string");
    if (!options.count(v)) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      throw ConfigError(at(n), "'" + key + "' must be one of: " + list);
    }
    return v;
  }

  void mesh(const YAML::Node& n) {
    keys(n, "mesh", {"path", "regions", "bilayer_triangles"});
    if (!n["path"]) throw ConfigError(at(n), "missing key 'mesh.path'");
    cfg_.mesh_path = path(n["path"], "mesh.path");
    if (n["regions"] && n["bilayer_triangles"]) {
      throw ConfigError(at(n["bilayer_triangles"]),
                        "give either 'mesh.regions' or 'mesh.bilayer_triangles', not both");
    }
    if (n["regions"]) cfg_.region_path = path(n["regions"], "mesh.regions");
    if (n["bilayer_triangles"]) {
      cfg_.bilayer_triangles = int_list(n["bilayer_triangles"], "mesh.bilayer_triangles");
    }
  }

  LayerSpec layer(const YAML::Node& n, const std::string& prefix) {
    keys(n, prefix, {"young_modulus", "thickness"});
    for (const char* k : {"young_modulus", "thickness"}) {
      if (!n[k]) throw ConfigError(at(n), "missing key '" + prefix + "." + k + "'");
    }
    return {number(n["young_modulus"], prefix + ".young_modulus"),
            number(n["thickness"], prefix + ".thickness")};
  }

  void material(const YAML::Node& n) {
    keys(n, "material", {"layer1", "layer2", "stretch_scale", "beta", "l0"});
    for (const char* k : {"layer1", "layer2"}) {
      if (!n[k]) throw ConfigError(at(n), std::string("missing key 'material.") + k + "'");
    }
    cfg_.material.layer1 = layer(n["layer1"], "material.layer1");
    cfg_.material.layer2 = layer(n["layer2"], "material.layer2");
    if (n["stretch_scale"]) cfg_.material.stretch_scale = number(n["stretch_scale"], "material.stretch_scale");
    if (n["beta"]) cfg_.beta = number(n["beta"], "material.beta");
    if (n["l0"]) cfg_.material.l0 = number(n["l0"], "material.l0");
  }

  void schedule(const YAML::Node& n) {
    keys(n, "schedule", {"target", "temperature_ratio", "shrink_curve",
                         "initial_step", "min_step", "max_step", "perturbation", "decay"});
    if (n["target"] && n["temperature_ratio"]) {
      throw ConfigError(at(n["temperature_ratio"]),
                        "give either 'schedule.target' or 'schedule.temperature_ratio', not both");
    }
    if (n["target"]) cfg_.target = number(n["target"], "schedule.target");
    if (n["temperature_ratio"]) {
      cfg_.temperature_ratio = number(n["temperature_ratio"], "schedule.temperature_ratio");
      if (!n["shrink_curve"]) {
        throw ConfigError(at(n), "'schedule.temperature_ratio' needs 'schedule.shrink_curve'");
      }
    }
    if (n["shrink_curve"]) cfg_.shrink_curve = path(n["shrink_curve"], "schedule.shrink_curve");
    if (n["initial_step"]) cfg_.schedule.initial_step = number(n["initial_step"], "schedule.initial_step");
    if (n["min_step"]) cfg_.schedule.min_step = number(n["min_step"], "schedule.min_step");
    if (n["max_step"]) cfg_.schedule.max_step = number(n["max_step"], "schedule.max_step");
    if (n["perturbation"]) cfg_.perturbation = number(n["perturbation"], "schedule.perturbation");
    if (n["decay"]) {
      cfg_.schedule.decay = choice(n["decay"], "schedule.decay", {"linear", "constant"}) == "linear"
                                ? PerturbationDecay::Linear
                                : PerturbationDecay::Constant;
    }
  }

  void solver(const YAML::Node& n) {
    keys(n, "solver", {"mode", "tolerance", "force_tolerance", "max_iterations", "constraints",
                       "pinned_dofs", "time_step", "density", "thickness", "max_time_steps"});
    SolverConfig& s = cfg_.solver;
    if (n["mode"]) {
      s.mode = choice(n["mode"], "solver.mode", {"static", "dynamic"}) == "static" ? SolverMode::Static
                                                                                 : SolverMode::Dynamic;
    }
    if (n["tolerance"]) s.tolerance = number(n["tolerance"], "solver.tolerance");
    if (n["force_tolerance"]) s.force_tolerance = number(n["force_tolerance"], "solver.force_tolerance");
    if (n["max_iterations"]) s.max_iterations = integer(n["max_iterations"], "solver.max_iterations");
    if (n["constraints"]) {
      s.constraints = choice(n["constraints"], "solver.constraints", {"three-two-one", "explicit"}) ==
                              "explicit"
                          ? ConstraintScheme::Explicit
                          : ConstraintScheme::ThreeTwoOne;
    }
    if (n["pinned_dofs"]) s.pinned_dofs = int_list(n["pinned_dofs"], "solver.pinned_dofs");
    if (n["time_step"]) s.time_step = number(n["time_step"], "solver.time_step");
    if (n["density"]) s.density = number(n["density"], "solver.density");
    if (n["thickness"]) s.thickness = number(n["thickness"], "solver.thickness");
    if (n["max_time_steps"]) s.max_time_steps = integer(n["max_time_steps"], "solver.max_time_steps");
  }

  void output(const YAML::Node& n) {
    keys(n, "output", {"directory", "snapshot_every"});
    if (n["directory"]) cfg_.output_dir = path(n["directory"], "output.directory");
    if (n["snapshot_every"]) cfg_.snapshot_every = integer(n["snapshot_every"], "output.snapshot_every");
  }

  void metrics(const YAML::Node& n) {
    keys(n, "metrics", {"reference", "reference_regions", "resolution", "margin", "box"});
    if (n["reference"]) cfg_.reference = path(n["reference"], "metrics.reference");
    if (n["reference_regions"]) cfg_.reference_regions = path(n["reference_regions"], "metrics.reference_regions");
    if (n["resolution"]) cfg_.resolution = integer(n["resolution"], "metrics.resolution");
    if (n["margin"]) cfg_.margin = number(n["margin"], "metrics.margin");
    if (n["box"]) {
      const YAML::Node b = n["box"];
      keys(b, "metrics.box", {"lower", "upper"});
      for (const char* k : {"lower", "upper"}) {
        if (!b[k]) throw ConfigError(at(b), std::string("missing key 'metrics.box.") + k + "'");
      }
      cfg_.box = BoundingBox{vec3(b["lower"], "metrics.box.lower"), vec3(b["upper"], "metrics.box.upper")};
    }
  }

 private:
  RunConfig& cfg_;
  fs::path base_;
};

template <class F>
void rethrow_at(const RunConfig& cfg, const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(cfg.where(key), e.what());
  }
}

void require_file(const RunConfig& cfg, const std::string& key, const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw ConfigError(cfg.where(key), "no such file '" + p.string() + "'");
}

}  // namespace

std::string RunConfig::where(const std::string& key) const {
  // Fall back to the nearest recorded parent block.
  std::string k = key;
  while (true) {
    const auto it = lines.find(k);
    if (it != lines.end()) return source.string() + ":" + std::to_string(it->second);
    const auto dot = k.rfind('.');
    if (dot == std::string::npos) return source.string();
    k.resize(dot);
  }
}

void RunConfig::validate() const {
  require_file(*this, "mesh.path", mesh_path);
  if (region_path) require_file(*this, "mesh.regions", *region_path);
  if (shrink_curve) require_file(*this, "schedule.shrink_curve", *shrink_curve);
  if (reference) require_file(*this, "metrics.reference", *reference);
  if (reference_regions) require_file(*this, "metrics.reference_regions", *reference_regions);

  if (!target && !temperature_ratio) {
    throw ConfigError(where("schedule"), "missing key 'schedule.target' (or 'schedule.temperature_ratio')");
  }
  if (target) {
    rethrow_at(*this, "schedule.target", [&] {
      StimulusSchedule s = schedule;
      s.target = *target;
      s.validate();
    });
  }
  if (temperature_ratio && !(*temperature_ratio > 0.0)) {
    throw ConfigError(where("schedule.temperature_ratio"), "'schedule.temperature_ratio' must be positive");
  }
  rethrow_at(*this, "schedule", [&] {
    StimulusSchedule s = schedule;
    s.target = 0.0;
    s.validate();
  });
  if (perturbation && !(*perturbation >= 0.0)) {
    throw ConfigError(where("schedule.perturbation"), "'schedule.perturbation' must be >= 0");
  }
  if (beta && !(*beta >= 0.0)) throw ConfigError(where("material.beta"), "'material.beta' must be >= 0");
  for (const auto& [name, layer] : {std::pair{"material.layer1", material.layer1},
                                    std::pair{"material.layer2", material.layer2}}) {
    if (!layer) continue;
    for (const auto& [field, v] : {std::pair{".young_modulus", layer->young_modulus},
                                   std::pair{".thickness", layer->thickness}}) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        const std::string key = std::string(name) + field;
        throw ConfigError(where(key), "'" + key + "' must be positive and finite");
      }
    }
  }
  rethrow_at(*this, "material", [&] {
    MaterialConfig m = material;
    if (!m.l0) m.l0 = 1.0;
    assemble_material(m);
  });
  rethrow_at(*this, "solver", [&] { solver.validate(); });
  if (snapshot_every < 0) {
    throw ConfigError(where("output.snapshot_every"), "'output.snapshot_every' must be >= 0");
  }
  if (resolution < 2) throw ConfigError(where("metrics.resolution"), "'metrics.resolution' must be >= 2");
  if (!(margin >= 0.0)) throw ConfigError(where("metrics.margin"), "'metrics.margin' must be >= 0");
  if (box && !((box->upper - box->lower).minCoeff() > 0.0)) {
    throw ConfigError(where("metrics.box"), "'metrics.box' upper must exceed lower on every axis");
  }
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, const fs::path& source) {
  RunConfig cfg;
  cfg.source = source;
  cfg.output_dir = (base_dir / "output").lexically_normal();
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source.string() + ":" + std::to_string(e.mark.line + 1), e.msg);
  }
  Reader r(cfg, base_dir);
  if (!root || root.IsNull()) throw ConfigError(source.string(), "empty configuration");
  r.keys(root, "", {"mesh", "material", "schedule", "solver", "output", "metrics"});
  for (const char* k : {"mesh", "material", "schedule"}) {
    if (!root[k]) throw ConfigError(source.string(), std::string("missing block '") + k + "'");
  }
  r.mesh(root["mesh"]);
  r.material(root["material"]);
  r.schedule(root["schedule"]);
  if (root["solver"]) r.solver(root["solver"]);
  if (root["output"]) r.output(root["output"]);
  if (root["metrics"]) r.metrics(root["metrics"]);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path(), path);
}

double resolve_target(const RunConfig& config) {
  if (config.target) return *config.target;
  double eps = 0.0;
  rethrow_at(config, "schedule.shrink_curve", [&] {
    const ShrinkCurve curve = ShrinkCurve::load(*config.shrink_curve);
    eps = shrink_to_strain(curve, *config.temperature_ratio);
  });
  return eps;
}

}  // namespace morphshell
