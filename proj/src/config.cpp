#include "eit/config.hpp"

#include "eit/errors.hpp"
#include "eit/io.hpp"

#include <json.hpp>

#include <initializer_list>
#include <set>
#include <string>

namespace eit {

namespace {

using json = nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Point to_point(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("a point is written [x, y]");
  return Point(j[0].get<double>(), j[1].get<double>());
}

Polygon to_polygon(const json& j) {
  if (!j.is_array()) throw ValidationError("a polygon is a list of [x, y] vertices");
  Polygon p;
  for (const auto& v : j) p.vertices.push_back(to_point(v));
  return p;
}

void read_phantom(const json& j, Phantom& ph) {
  only_keys(j, "phantom", {"background", "lambda0", "lambda1", "disks", "polygons"});
  take(j, "background", ph.background);
  take(j, "lambda0", ph.lambda0);
  take(j, "lambda1", ph.lambda1);
  if (j.contains("disks")) {
    ph.disks.clear();
    for (const auto& d : j.at("disks")) {
      only_keys(d, "phantom.disks", {"center", "radius", "value"});
      Phantom::Disk disk;
      disk.center = to_point(d.at("center"));
      disk.radius = d.at("radius").get<double>();
      disk.value = d.at("value").get<double>();
      ph.disks.push_back(disk);
    }
  }
  if (j.contains("polygons")) {
    ph.polygons.clear();
    for (const auto& p : j.at("polygons")) {
      only_keys(p, "phantom.polygons", {"vertices", "value"});
      ph.polygons.push_back({to_polygon(p.at("vertices")), p.at("value").get<double>()});
    }
  }
}

NoiseMode to_mode(const std::string& s) {
  if (s == "absolute") return NoiseMode::absolute;
  if (s == "relative") return NoiseMode::relative;
  throw ValidationError("noise mode must be 'absolute' or 'relative', got '" + s + "'");
}

RunConfig from_json(const json& j) {
  only_keys(j, "config", {"domain", "phantom", "mesh", "layout", "noise", "schedule", "optimizer", "inverse_crime",
                          "tensor", "output", "seed"});
  RunConfig rc;
  InversionConfig& c = rc.inversion;
  if (j.contains("domain")) c.domain = to_polygon(j.at("domain"));
  if (j.contains("phantom")) read_phantom(j.at("phantom"), c.phantom);
  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    only_keys(m, "mesh", {"level", "data_levels", "max_level"});
    take(m, "level", c.mesh_level);
    take(m, "data_levels", c.data_levels);
    take(m, "max_level", rc.max_level);
  }
  if (j.contains("layout")) {
    const json& l = j.at("layout");
    only_keys(l, "layout", {"m", "k", "impedance", "z_min", "z_max"});
    take(l, "m", c.m);
    take(l, "k", c.k);
    take(l, "z_min", c.z_min);
    take(l, "z_max", c.z_max);
    if (l.contains("impedance")) {
      const json& z = l.at("impedance");
      if (z.is_array()) {
        c.impedances = z.get<std::vector<double>>();
        if (c.impedances.empty()) throw ValidationError("layout.impedance: empty list");
        c.z = c.impedances.front();
      } else {
        c.z = z.get<double>();
      }
    }
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    only_keys(n, "noise", {"eps", "mode", "eps_list", "seeds", "slack"});
    take(n, "eps", c.eps);
    if (n.contains("mode")) c.schedule.mode = to_mode(n.at("mode").get<std::string>());
    take(n, "eps_list", rc.eps_list);
    take(n, "seeds", rc.seeds);
    take(n, "slack", rc.slack);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    only_keys(s, "schedule", {"enabled", "gamma", "a1", "a2", "c", "c0", "c1", "c2", "alpha1", "beta1", "N"});
    take(s, "enabled", c.use_schedule);
    take(s, "gamma", c.schedule.gamma);
    take(s, "a1", c.schedule.a1);
    take(s, "a2", c.schedule.a2);
    take(s, "c", c.schedule.c);
    take(s, "c0", c.schedule.c0);
    take(s, "c1", c.schedule.c1);
    take(s, "c2", c.schedule.c2);
    take(s, "alpha1", c.schedule.alpha1);
    take(s, "beta1", c.schedule.beta1);
    take(s, "N", c.schedule.N);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    only_keys(o, "optimizer", {"max_iterations", "tau0", "tau_min", "continuation", "stagnation", "grad_tol",
                               "max_backtracks", "gauss_newton"});
    OptimizerSettings& s = c.optimizer;
    take(o, "max_iterations", s.max_iterations);
    take(o, "tau0", s.tau0);
    take(o, "tau_min", s.tau_min);
    take(o, "continuation", s.continuation);
    take(o, "stagnation", s.stagnation);
    take(o, "grad_tol", s.grad_tol);
    take(o, "max_backtracks", s.max_backtracks);
    take(o, "gauss_newton", s.gauss_newton);
  }
  take(j, "inverse_crime", c.inverse_crime);
  take(j, "tensor", c.tensor);
  take(j, "output", rc.output_dir);
  take(j, "seed", c.seed);
  c.schedule.max_level = rc.max_level;
  return rc;
}

}  // namespace

void RunConfig::validate() const {
  inversion.validate();
  if (max_level < 0 || max_level > 10) throw ValidationError("max_level must lie in [0, 10]");
  if (!inversion.use_schedule && inversion.mesh_level > max_level) {
    throw ValidationError("mesh level " + std::to_string(inversion.mesh_level) + " exceeds max_level " +
                          std::to_string(max_level));
  }
  if (eps_list.empty()) throw ValidationError("eps_list is empty");
  for (size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0)) throw ValidationError("eps_list entries must lie in (0, 1]");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ValidationError("eps_list must be strictly decreasing");
  }
  if (seeds.empty()) throw ValidationError("seeds is empty");
  if (!(slack >= 0.0)) throw ValidationError("slack must be nonnegative");
  if (output_dir.empty()) throw ValidationError("output directory is empty");
}

RunConfig parse_config(const std::string& json_text) {
  RunConfig rc;
  try {
    rc = from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  rc.validate();
  return rc;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace eit
