#pragma once

// Run manifests: one human-readable JSON document describing a run (task,
// seed, mode, output, overrides). Parsing is strict — unknown keys and
// unknown format versions are rejected so a typo never silently runs with
// defaults.

#include <string>

#include "json.hpp"
#include "optimize.hpp"
#include "task.hpp"

namespace plastisim {

inline constexpr const char* kManifestFormat = "plastisim-manifest/1";

struct RunManifest {
  std::string task = "move";
  int variant = 1;
  uint64_t seed = 0;
  std::string mode;  // empty = take from the CLI subcommand
  std::string output = ".";
  std::string precision = "double";  // "float" | "double"
  std::string contact;               // "" = command default, else "soft"|"hard"
  std::string actions_file;
  // sim overrides; 0 keeps the task's own value
  int grid_n = 0;
  double dt = 0;
  int n_substeps = 0;
  int env_steps = 0;
  double youngs_modulus = 0;
  double yield_stress = 0;
  double alpha = 0;
  double ppc = 0;
  int mass_grid = 0;
  int landmarks = 0;
  // optimizer
  std::string method = "adam";  // "adam" | "gd_momentum"
  double learning_rate = 0;     // 0 = per-task default
  int episodes = 200;
  double init_scale = 0;
  // gradcheck
  double h = 1e-4;
  double tolerance = 1e-3;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const char* where,
                           std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      fail(ErrorCode::Config,
           std::string("unknown key \"") + it.key() + "\" in " + where);
  }
}

inline void get_str(const json& o, const char* k, std::string& out) {
  if (!o.contains(k)) return;
  if (!o[k].is_string())
    fail(ErrorCode::Config, std::string(k) + " must be a string");
  out = o[k].get<std::string>();
}

inline void get_int(const json& o, const char* k, int& out) {
  if (!o.contains(k)) return;
  if (!o[k].is_number_integer())
    fail(ErrorCode::Config, std::string(k) + " must be an integer");
  out = o[k].get<int>();
}

inline void get_u64(const json& o, const char* k, uint64_t& out) {
  if (!o.contains(k)) return;
  if (!o[k].is_number_unsigned() &&
      !(o[k].is_number_integer() && o[k].get<int64_t>() >= 0))
    fail(ErrorCode::Config, std::string(k) + " must be a nonnegative integer");
  out = o[k].get<uint64_t>();
}

inline void get_num(const json& o, const char* k, double& out) {
  if (!o.contains(k)) return;
  if (!o[k].is_number())
    fail(ErrorCode::Config, std::string(k) + " must be a number");
  out = o[k].get<double>();
}

inline void check_choice(const std::string& v, const char* what,
                         std::initializer_list<const char*> allowed) {
  for (const char* k : allowed)
    if (v == k) return;
  std::string opts;
  for (const char* k : allowed) {
    if (!opts.empty()) opts += ", ";
    opts += k;
  }
  fail(ErrorCode::Config,
       std::string("invalid ") + what + " \"" + v + "\" (expected one of: " + opts + ")");
}

}  // namespace detail

inline void validate_manifest(const RunManifest& m) {
  detail::check_choice(m.precision, "precision", {"float", "double"});
  if (!m.contact.empty())
    detail::check_choice(m.contact, "contact", {"soft", "hard"});
  if (!m.mode.empty())
    detail::check_choice(m.mode, "mode",
                         {"simulate", "optimize", "evaluate", "gradcheck", "export"});
  detail::check_choice(m.method, "method", {"adam", "gd_momentum"});
}

inline RunManifest parse_manifest(const std::string& text) {
  namespace nj = nlohmann;
  nj::json doc;
  try {
    doc = nj::json::parse(text);
  } catch (const nj::json::parse_error& e) {
    fail(ErrorCode::Config, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::Config, "manifest must be a JSON object");
  detail::reject_unknown(doc, "manifest",
                         {"format", "task", "variant", "seed", "mode", "output",
                          "precision", "contact", "actions", "sim", "optim",
                          "gradcheck"});
  std::string fmt;
  detail::get_str(doc, "format", fmt);
  if (fmt != kManifestFormat)
    fail(ErrorCode::Config, "unsupported manifest format \"" + fmt +
                                "\" (expected " + kManifestFormat + ")");

  RunManifest m;
  detail::get_str(doc, "task", m.task);
  detail::get_int(doc, "variant", m.variant);
  detail::get_u64(doc, "seed", m.seed);
  detail::get_str(doc, "mode", m.mode);
  detail::get_str(doc, "output", m.output);
  detail::get_str(doc, "precision", m.precision);
  detail::get_str(doc, "contact", m.contact);
  detail::get_str(doc, "actions", m.actions_file);

  if (doc.contains("sim")) {
    const auto& s = doc["sim"];
    if (!s.is_object()) fail(ErrorCode::Config, "sim must be an object");
    detail::reject_unknown(s, "sim",
                           {"grid_n", "dt", "n_substeps", "env_steps",
                            "youngs_modulus", "yield_stress", "alpha", "ppc",
                            "mass_grid", "landmarks"});
    detail::get_int(s, "grid_n", m.grid_n);
    detail::get_num(s, "dt", m.dt);
    detail::get_int(s, "n_substeps", m.n_substeps);
    detail::get_int(s, "env_steps", m.env_steps);
    detail::get_num(s, "youngs_modulus", m.youngs_modulus);
    detail::get_num(s, "yield_stress", m.yield_stress);
    detail::get_num(s, "alpha", m.alpha);
    detail::get_num(s, "ppc", m.ppc);
    detail::get_int(s, "mass_grid", m.mass_grid);
    detail::get_int(s, "landmarks", m.landmarks);
  }
  if (doc.contains("optim")) {
    const auto& o = doc["optim"];
    if (!o.is_object()) fail(ErrorCode::Config, "optim must be an object");
    detail::reject_unknown(o, "optim",
                           {"method", "learning_rate", "episodes", "init_scale"});
    detail::get_str(o, "method", m.method);
    detail::get_num(o, "learning_rate", m.learning_rate);
    detail::get_int(o, "episodes", m.episodes);
    detail::get_num(o, "init_scale", m.init_scale);
  }
  if (doc.contains("gradcheck")) {
    const auto& g = doc["gradcheck"];
    if (!g.is_object()) fail(ErrorCode::Config, "gradcheck must be an object");
    detail::reject_unknown(g, "gradcheck", {"h", "tolerance"});
    detail::get_num(g, "h", m.h);
    detail::get_num(g, "tolerance", m.tolerance);
  }
  validate_manifest(m);
  return m;
}

// Serialize the fully resolved manifest (defaults included) so a run
// directory records exactly what produced it.
inline std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json doc;
  doc["format"] = kManifestFormat;
  doc["task"] = m.task;
  doc["variant"] = m.variant;
  doc["seed"] = m.seed;
  if (!m.mode.empty()) doc["mode"] = m.mode;
  doc["output"] = m.output;
  doc["precision"] = m.precision;
  if (!m.contact.empty()) doc["contact"] = m.contact;
  if (!m.actions_file.empty()) doc["actions"] = m.actions_file;
  nlohmann::json sim = nlohmann::json::object();
  if (m.grid_n > 0) sim["grid_n"] = m.grid_n;
  if (m.dt > 0) sim["dt"] = m.dt;
  if (m.n_substeps > 0) sim["n_substeps"] = m.n_substeps;
  if (m.env_steps > 0) sim["env_steps"] = m.env_steps;
  if (m.youngs_modulus > 0) sim["youngs_modulus"] = m.youngs_modulus;
  if (m.yield_stress > 0) sim["yield_stress"] = m.yield_stress;
  if (m.alpha > 0) sim["alpha"] = m.alpha;
  if (m.ppc > 0) sim["ppc"] = m.ppc;
  if (m.mass_grid > 0) sim["mass_grid"] = m.mass_grid;
  if (m.landmarks > 0) sim["landmarks"] = m.landmarks;
  if (!sim.empty()) doc["sim"] = sim;
  nlohmann::json optim;
  optim["method"] = m.method;
  if (m.learning_rate > 0) optim["learning_rate"] = m.learning_rate;
  optim["episodes"] = m.episodes;
  if (m.init_scale > 0) optim["init_scale"] = m.init_scale;
  doc["optim"] = optim;
  nlohmann::json gc;
  gc["h"] = m.h;
  gc["tolerance"] = m.tolerance;
  doc["gradcheck"] = gc;
  return doc.dump(2) + "\n";
}

// Builtin task with the manifest's sim overrides applied.
template <class T>
TaskConfig<T> manifest_task(const RunManifest& m) {
  TaskConfig<T> cfg = make_task<T>(m.task, m.variant);
  if (m.grid_n > 0) cfg.prm.n = m.grid_n;
  if (m.dt > 0) cfg.prm.dt = T(m.dt);
  if (m.n_substeps > 0) cfg.prm.n_substeps = m.n_substeps;
  if (m.env_steps > 0) cfg.env_steps = m.env_steps;
  if (m.youngs_modulus > 0) cfg.prm.E = T(m.youngs_modulus);
  if (m.yield_stress > 0) cfg.prm.yield_stress = T(m.yield_stress);
  if (m.alpha > 0) cfg.prm.alpha = T(m.alpha);
  if (m.ppc > 0) cfg.prm.ppc = T(m.ppc);
  if (m.mass_grid > 0) cfg.n_mass_grid = m.mass_grid;
  if (m.landmarks > 0) cfg.n_landmarks = m.landmarks;
  return cfg;
}

template <class T>
OptimConfig<T> manifest_optim(const RunManifest& m) {
  OptimConfig<T> cfg;
  cfg.method =
      m.method == "gd_momentum" ? OptimMethod::GdMomentum : OptimMethod::Adam;
  cfg.learning_rate = m.learning_rate > 0 ? T(m.learning_rate)
                                          : default_learning_rate<T>(m.task);
  cfg.episodes = m.episodes;
  cfg.init_scale = T(m.init_scale);
  return cfg;
}

}  // namespace plastisim
