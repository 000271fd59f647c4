// Command-line front end. All physics lives behind the shared-library C API;
// this file only merges configuration (flag > file > default), moves versioned
// text artifacts around, and maps errors to exit codes:
//   0 success, 2 config/usage error, 3 simulation diverged, 4 tolerance failed.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "core/io.hpp"
#include "json.hpp"
#include "plastisim/plastisim.h"

namespace fs = std::filesystem;
using nlohmann::json;
using plastisim::Error;
using plastisim::ErrorCode;
using plastisim::fail;

namespace {

constexpr const char* kManifestFormat = "plastisim-manifest/1";

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Diverged:
      return 3;
    case ErrorCode::Tolerance:
      return 4;
    default:
      return 2;  // Config / Invalid / Io all mean "fix the inputs"
  }
}

// Lift a C API failure into the shared error taxonomy (codes align by value).
void check(ps_status st) {
  if (st == PS_OK) return;
  throw Error(static_cast<ErrorCode>(st), ps_last_error());
}

struct EnvHandle {
  ps_env* e = nullptr;
  explicit EnvHandle(const json& doc) {
    check(ps_env_create(doc.dump().c_str(), &e));
  }
  ~EnvHandle() { ps_env_destroy(e); }
  EnvHandle(const EnvHandle&) = delete;
  EnvHandle& operator=(const EnvHandle&) = delete;
  operator ps_env*() const { return e; }
};

// ------------------------------------------------------------- flag merging

// One value bag shared by all subcommands; only the parsed subcommand's
// options are consulted, and only when actually set on the command line.
struct Flags {
  std::string config, output, task, precision, contact, actions, method, ply;
  std::string dump_file;
  int variant = 0, grid_n = 0, n_substeps = 0, env_steps = 0, mass_grid = 0;
  int landmarks = 0, episodes = 0;
  std::uint64_t seed = 0;
  double dt = 0, youngs = 0, yield = 0, alpha = 0, ppc = 0;
  double lr = 0, init_scale = 0, h = 0, tolerance = 0;
  bool reference = false;
};

bool set_on_cli(const CLI::App* sub, const char* name) {
  const CLI::Option* o = sub->get_option_no_throw(name);
  return o && o->count() > 0;
}

void add_common(CLI::App* sub, Flags& f, bool with_actions) {
  sub->add_option("-c,--config", f.config,
                  "Run manifest (JSON); flags override file keys");
  sub->add_option("-o,--output", f.output, "Artifact directory (default .)");
  sub->add_option("--task", f.task, "Builtin task name");
  sub->add_option("--variant", f.variant, "Task variant index");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--precision", f.precision, "float | double");
  sub->add_option("--grid-n", f.grid_n, "Grid resolution per axis");
  sub->add_option("--dt", f.dt, "Substep length");
  sub->add_option("--substeps", f.n_substeps, "Substeps per env step");
  sub->add_option("--env-steps", f.env_steps, "Env steps per episode");
  sub->add_option("--youngs-modulus", f.youngs, "Young's modulus");
  sub->add_option("--yield-stress", f.yield, "von Mises yield stress");
  sub->add_option("--alpha", f.alpha, "Soft contact sharpness");
  sub->add_option("--ppc", f.ppc, "Particles per cell");
  sub->add_option("--mass-grid", f.mass_grid, "Mass tensor resolution");
  sub->add_option("--landmarks", f.landmarks, "Observation landmark count");
  if (with_actions)
    sub->add_option("-a,--actions", f.actions, "Actions file (plastisim-actions/1)");
}

// Merged manifest document: config file first (passed through untouched so the
// library rejects unknown keys / missing format tags), then every flag that
// was set. The subcommand always wins the "mode" key.
json build_doc(const CLI::App* sub, const Flags& f, const char* mode) {
  json doc;
  if (set_on_cli(sub, "--config")) {
    doc = json::parse(plastisim::read_text_file(f.config), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      fail(ErrorCode::Config, "config file " + f.config + " is not a JSON object");
  } else {
    doc = json::object();
    doc["format"] = kManifestFormat;
  }
  doc["mode"] = mode;

  auto top = [&](const char* flag, const char* key, const auto& v) {
    if (set_on_cli(sub, flag)) doc[key] = v;
  };
  auto nested = [&](const char* section, const char* flag, const char* key,
                    const auto& v) {
    if (set_on_cli(sub, flag)) doc[section][key] = v;
  };
  top("--task", "task", f.task);
  top("--variant", "variant", f.variant);
  top("--seed", "seed", f.seed);
  top("--output", "output", f.output);
  top("--precision", "precision", f.precision);
  top("--contact", "contact", f.contact);
  top("--actions", "actions", f.actions);
  nested("sim", "--grid-n", "grid_n", f.grid_n);
  nested("sim", "--dt", "dt", f.dt);
  nested("sim", "--substeps", "n_substeps", f.n_substeps);
  nested("sim", "--env-steps", "env_steps", f.env_steps);
  nested("sim", "--youngs-modulus", "youngs_modulus", f.youngs);
  nested("sim", "--yield-stress", "yield_stress", f.yield);
  nested("sim", "--alpha", "alpha", f.alpha);
  nested("sim", "--ppc", "ppc", f.ppc);
  nested("sim", "--mass-grid", "mass_grid", f.mass_grid);
  nested("sim", "--landmarks", "landmarks", f.landmarks);
  nested("optim", "--method", "method", f.method);
  nested("optim", "--lr", "learning_rate", f.lr);
  nested("optim", "--episodes", "episodes", f.episodes);
  nested("optim", "--init-scale", "init_scale", f.init_scale);
  nested("gradcheck", "--fd-step", "h", f.h);
  nested("gradcheck", "--tolerance", "tolerance", f.tolerance);
  return doc;
}

// --------------------------------------------------------------- artifacts

fs::path artifact_dir(const json& doc) {
  fs::path dir = doc.value("output", ".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory " + dir.string());
  return dir;
}

void write_manifest(const fs::path& dir, const json& doc) {
  plastisim::write_text_file((dir / "manifest.json").string(), doc.dump(2) + "\n");
}

std::vector<std::vector<double>> unflatten(const std::vector<double>& flat,
                                           int rows, int cols) {
  std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++) m[r][c] = flat[size_t(r) * cols + c];
  return m;
}

// Provided file > builtin reference script > zeros.
std::vector<std::vector<double>> resolve_actions(ps_env* env, const json& doc,
                                                 bool reference) {
  int T = ps_env_steps(env), d = ps_action_dim(env);
  if (reference) {
    std::vector<double> flat(size_t(T) * d);
    check(ps_reference_actions(env, flat.data()));
    return unflatten(flat, T, d);
  }
  std::string path = doc.value("actions", "");
  if (!path.empty()) {
    auto a = plastisim::with_input_file(
        path, [](std::istream& in) { return plastisim::load_actions(in); });
    if (int(a.size()) != T || (T > 0 && int(a[0].size()) != d))
      fail(ErrorCode::Invalid,
           "actions file " + path + " is " + std::to_string(a.size()) + "x" +
               std::to_string(a.empty() ? 0 : a[0].size()) + ", env wants " +
               std::to_string(T) + "x" + std::to_string(d));
    return a;
  }
  return std::vector<std::vector<double>>(T, std::vector<double>(d, 0.0));
}

void write_dump(ps_env* env, const fs::path& dir, int step) {
  int n = ps_particle_count(env);
  std::vector<double> xs(size_t(n) * 3), vs(size_t(n) * 3);
  check(ps_particles(env, xs.data(), vs.data()));
  plastisim::Particles<double> P;
  P.resize(n);
  for (int p = 0; p < n; p++) {
    P.x[p] = {xs[3 * p], xs[3 * p + 1], xs[3 * p + 2]};
    P.v[p] = {vs[3 * p], vs[3 * p + 1], vs[3 * p + 2]};
  }
  char name[32];
  std::snprintf(name, sizeof name, "dump_%04d.txt", step);
  plastisim::with_output_file((dir / name).string(),
                              [&](std::ostream& os) { save_dump(os, P, step); });
}

std::string g17(double v) { return plastisim::detail::g17(v); }

// ---------------------------------------------------------------- commands

int cmd_simulate(const CLI::App* sub, const Flags& f) {
  json doc = build_doc(sub, f, "simulate");
  if (!doc.contains("contact") || doc["contact"] == "")
    doc["contact"] = "hard";  // playback uses the physical contact model
  EnvHandle env(doc);
  fs::path dir = artifact_dir(doc);
  write_manifest(dir, doc);
  auto actions = resolve_actions(env, doc, f.reference);
  int T = ps_env_steps(env);
  double iou = 0, niou = 0;
  plastisim::with_output_file((dir / "metrics.csv").string(), [&](std::ostream& os) {
    plastisim::MetricsWriter mw(os, {"step", "reward", "iou", "normalized_iou"});
    write_dump(env, dir, 0);
    for (int t = 0; t < T; t++) {
      double r = 0;
      check(ps_step(env, actions[t].data(), &r));
      check(ps_metrics(env, &iou, &niou));
      mw.row({double(t + 1), r, iou, niou});
      write_dump(env, dir, t + 1);
    }
  });
  std::printf("simulate: %d env steps, %d particles, final normalized_iou=%s\n",
              T, ps_particle_count(env), g17(niou).c_str());
  return 0;
}

int cmd_optimize(const CLI::App* sub, const Flags& f) {
  json doc = build_doc(sub, f, "optimize");
  EnvHandle env(doc);
  fs::path dir = artifact_dir(doc);
  write_manifest(dir, doc);
  int T = ps_env_steps(env), d = ps_action_dim(env), E = ps_episodes(env);
  std::vector<double> best(size_t(T) * d), curve(E), score(E);
  ps_optim_report rep{};
  check(ps_optimize(env, best.data(), curve.data(), score.data(), &rep));

  plastisim::with_output_file((dir / "best_actions.txt").string(),
                              [&](std::ostream& os) {
                                plastisim::save_actions(os, unflatten(best, T, d));
                              });
  plastisim::with_output_file((dir / "reward_curve.csv").string(),
                              [&](std::ostream& os) {
    plastisim::MetricsWriter mw(os, {"episode", "soft_reward", "score"});
    for (int i = 0; i < E; i++) {
      double s = std::fmin(1.0, std::fmax(-1.0, score[i]));
      mw.row({double(i), curve[i], s});
    }
  });
  plastisim::with_output_file((dir / "result.txt").string(), [&](std::ostream& os) {
    plastisim::save_report(os, {{"task", doc.value("task", "move")},
                     {"variant", std::to_string(doc.value("variant", 1))},
                     {"seed", std::to_string(doc.value("seed", std::uint64_t(0)))},
                     {"episodes", std::to_string(rep.episodes)},
                     {"divergences", std::to_string(rep.divergences)},
                     {"best_soft_reward", g17(rep.best_soft_reward)},
                     {"initial_score", g17(rep.initial_score)},
                     {"final_score", g17(rep.final_score)},
                     {"final_score_clamped", g17(std::fmax(0.0, rep.final_score))}});
  });
  std::printf(
      "optimize: %d episodes (%d divergences), best soft reward %s, "
      "final hard score %s\n",
      rep.episodes, rep.divergences, g17(rep.best_soft_reward).c_str(),
      g17(rep.final_score).c_str());
  return 0;
}

int cmd_evaluate(const CLI::App* sub, const Flags& f) {
  json doc = build_doc(sub, f, "evaluate");
  doc["contact"] = "hard";  // the score is defined under hard contact
  EnvHandle env(doc);
  fs::path dir = artifact_dir(doc);
  write_manifest(dir, doc);
  auto actions = resolve_actions(env, doc, f.reference);
  int T = ps_env_steps(env);
  for (int t = 0; t < T; t++) {
    double r = 0;
    check(ps_step(env, actions[t].data(), &r));
  }
  double iou = 0, score = 0;
  check(ps_metrics(env, &iou, &score));
  double clamped = std::fmax(0.0, score);  // scores below 0 are reported as 0
  plastisim::with_output_file((dir / "evaluation.txt").string(),
                              [&](std::ostream& os) {
    plastisim::save_report(os, {{"task", doc.value("task", "move")},
                     {"variant", std::to_string(doc.value("variant", 1))},
                     {"seed", std::to_string(doc.value("seed", std::uint64_t(0)))},
                     {"steps", std::to_string(T)},
                     {"iou", g17(iou)},
                     {"score", g17(score)},
                     {"score_clamped", g17(clamped)}});
  });
  std::printf("evaluate: normalized_iou=%s (clamped %s)\n", g17(score).c_str(),
              g17(clamped).c_str());
  return 0;
}

int cmd_gradcheck(const CLI::App* sub, const Flags& f) {
  json doc = build_doc(sub, f, "gradcheck");
  doc["contact"] = "soft";  // gradients are only defined for soft contact
  EnvHandle env(doc);
  fs::path dir = artifact_dir(doc);
  write_manifest(dir, doc);
  std::vector<std::vector<double>> rows = resolve_actions(env, doc, false);
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  ps_gradcheck_report rep{};
  ps_status st = ps_gradcheck(env, flat.data(), 0, 0, &rep);
  if (st != PS_OK && st != PS_ERR_TOLERANCE) check(st);
  plastisim::with_output_file((dir / "gradcheck.txt").string(),
                              [&](std::ostream& os) {
    plastisim::save_report(os, {{"pass", rep.pass ? "1" : "0"},
                     {"max_rel_err", g17(rep.max_rel_err)},
                     {"tolerance", g17(rep.tolerance)},
                     {"h", g17(rep.h)},
                     {"worst_step", std::to_string(rep.worst_step)},
                     {"worst_dim", std::to_string(rep.worst_dim)},
                     {"analytic_at_worst", g17(rep.analytic)},
                     {"numeric_at_worst", g17(rep.numeric)}});
  });
  std::printf("gradcheck: max_rel_err=%s at action (step %d, dim %d), "
              "tolerance %s -> %s\n",
              g17(rep.max_rel_err).c_str(), rep.worst_step, rep.worst_dim,
              g17(rep.tolerance).c_str(), rep.pass ? "pass" : "FAIL");
  check(st);  // PS_ERR_TOLERANCE surfaces as exit code 4 after reporting
  return 0;
}

int cmd_export(const Flags& f) {
  plastisim::DumpData d = plastisim::with_input_file(
      f.dump_file, [](std::istream& in) { return plastisim::load_dump(in); });
  fs::path out = f.ply.empty()
                     ? fs::path(f.dump_file).replace_extension(".ply")
                     : fs::path(f.ply);
  plastisim::with_output_file(out.string(), [&](std::ostream& os) {
    os << "ply\nformat ascii 1.0\n";
    os << "comment plastisim-export/1 step " << d.step << "\n";
    os << "element vertex " << d.x.size() << "\n";
    for (const char* p : {"x", "y", "z", "vx", "vy", "vz"})
      os << "property float " << p << "\n";
    os << "end_header\n";
    char buf[128];
    for (size_t p = 0; p < d.x.size(); p++) {
      std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g %.9g %.9g\n",
                    d.x[p].x, d.x[p].y, d.x[p].z, d.v[p].x, d.v[p].y, d.v[p].z);
      os << buf;
    }
  });
  std::printf("export: %zu points (step %d) -> %s\n", d.x.size(), d.step,
              out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable elastoplastic MPM: simulate, optimize, "
               "evaluate, gradcheck, export"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Roll out actions (file, reference, or zeros); write dumps + metrics");
  add_common(sim, f, true);
  sim->add_option("--contact", f.contact, "soft | hard (default hard)");
  sim->add_flag("--reference", f.reference, "Use the task's scripted reference actions");

  CLI::App* opt = app.add_subcommand(
      "optimize", "Gradient-ascent trajectory optimization (soft rollouts, hard final score)");
  add_common(opt, f, false);
  opt->add_option("--method", f.method, "adam | gd_momentum");
  opt->add_option("--lr", f.lr, "Learning rate (0 = per-task default)");
  opt->add_option("--episodes", f.episodes, "Gradient episodes");
  opt->add_option("--init-scale", f.init_scale, "Stddev of the initial action noise");

  CLI::App* eva = app.add_subcommand(
      "evaluate", "Score actions by hard-contact normalized incremental IoU");
  add_common(eva, f, true);
  eva->add_flag("--reference", f.reference, "Use the task's scripted reference actions");

  CLI::App* gc = app.add_subcommand(
      "gradcheck", "Compare adjoint gradients against central finite differences");
  add_common(gc, f, true);
  gc->add_option("--fd-step", f.h, "Finite-difference step");
  gc->add_option("--tolerance", f.tolerance, "Max relative error allowed");

  CLI::App* exp = app.add_subcommand("export", "Convert a particle dump to a PLY point cloud");
  exp->add_option("dump", f.dump_file, "plastisim-dump/1 file")->required();
  exp->add_option("--ply", f.ply, "Output path (default: dump with .ply)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // CLI misuse is a config error
  }
  try {
    if (sim->parsed()) return cmd_simulate(sim, f);
    if (opt->parsed()) return cmd_optimize(opt, f);
    if (eva->parsed()) return cmd_evaluate(eva, f);
    if (gc->parsed()) return cmd_gradcheck(gc, f);
    if (exp->parsed()) return cmd_export(f);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
