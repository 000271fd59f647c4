// Manifest parsing (strictness, versioning, defaults) and the versioned text
// artifact formats (bit-exact round trips, unknown-version rejection).
#include <sstream>

#include "core/config.hpp"
#include "core/io.hpp"
#include "doctest.h"

using namespace plastisim;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code;
  }
  FAIL("expected an error");
  return ErrorCode::Invalid;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifests.

TEST_CASE("manifest: full document round trip") {
  std::string text = R"({
    "format": "plastisim-manifest/1",
    "task": "rollingpin", "variant": 3, "seed": 17,
    "mode": "optimize", "output": "runs/demo",
    "precision": "float", "contact": "hard", "actions": "a.txt",
    "sim": { "grid_n": 32, "dt": 2e-4, "n_substeps": 10, "env_steps": 25,
             "youngs_modulus": 4000, "yield_stress": 40, "alpha": 300,
             "ppc": 4, "mass_grid": 32, "landmarks": 50 },
    "optim": { "method": "gd_momentum", "learning_rate": 0.05,
               "episodes": 77, "init_scale": 0.01 },
    "gradcheck": { "h": 1e-5, "tolerance": 1e-4 }
  })";
  RunManifest m = parse_manifest(text);
  CHECK(m.task == "rollingpin");
  CHECK(m.variant == 3);
  CHECK(m.seed == 17);
  CHECK(m.mode == "optimize");
  CHECK(m.output == "runs/demo");
  CHECK(m.precision == "float");
  CHECK(m.contact == "hard");
  CHECK(m.actions_file == "a.txt");
  CHECK(m.grid_n == 32);
  CHECK(m.dt == 2e-4);
  CHECK(m.n_substeps == 10);
  CHECK(m.env_steps == 25);
  CHECK(m.youngs_modulus == 4000);
  CHECK(m.yield_stress == 40);
  CHECK(m.alpha == 300);
  CHECK(m.ppc == 4);
  CHECK(m.mass_grid == 32);
  CHECK(m.landmarks == 50);
  CHECK(m.method == "gd_momentum");
  CHECK(m.learning_rate == 0.05);
  CHECK(m.episodes == 77);
  CHECK(m.init_scale == 0.01);
  CHECK(m.h == 1e-5);
  CHECK(m.tolerance == 1e-4);

  // serialize -> reparse -> identical fields
  RunManifest m2 = parse_manifest(manifest_to_json(m));
  CHECK(m2.task == m.task);
  CHECK(m2.seed == m.seed);
  CHECK(m2.dt == m.dt);
  CHECK(m2.learning_rate == m.learning_rate);
  CHECK(m2.tolerance == m.tolerance);
  CHECK(m2.contact == m.contact);
}

TEST_CASE("manifest: defaults when sections are absent") {
  RunManifest m = parse_manifest(R"({"format": "plastisim-manifest/1"})");
  CHECK(m.task == "move");
  CHECK(m.variant == 1);
  CHECK(m.seed == 0);
  CHECK(m.mode.empty());
  CHECK(m.precision == "double");
  CHECK(m.contact.empty());
  CHECK(m.grid_n == 0);
  CHECK(m.method == "adam");
  CHECK(m.learning_rate == 0);
  CHECK(m.episodes == 200);
  CHECK(m.h == 1e-4);
  CHECK(m.tolerance == 1e-3);
}

TEST_CASE("manifest: unknown keys and versions are rejected") {
  auto cfgerr = [](const std::string& text) {
    try {
      parse_manifest(text);
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::Config);
      return std::string(e.what());
    }
    FAIL("expected a config error");
    return std::string();
  };
  CHECK(cfgerr(R"({"format":"plastisim-manifest/1","tsak":"move"})")
            .find("tsak") != std::string::npos);
  CHECK(cfgerr(R"({"format":"plastisim-manifest/1","sim":{"gridn":32}})")
            .find("gridn") != std::string::npos);
  CHECK(cfgerr(R"({"format":"plastisim-manifest/2"})").find("format") !=
        std::string::npos);
  CHECK(cfgerr(R"({"task":"move"})").find("format") != std::string::npos);
  cfgerr("not json at all");
  cfgerr(R"(["array"])");
  cfgerr(R"({"format":"plastisim-manifest/1","precision":"half"})");
  cfgerr(R"({"format":"plastisim-manifest/1","contact":"rigid"})");
  cfgerr(R"({"format":"plastisim-manifest/1","mode":"train"})");
  cfgerr(R"({"format":"plastisim-manifest/1","optim":{"method":"lbfgs"}})");
  cfgerr(R"({"format":"plastisim-manifest/1","seed":-3})");
  cfgerr(R"({"format":"plastisim-manifest/1","variant":"one"})");
  cfgerr(R"({"format":"plastisim-manifest/1","sim":{"dt":"fast"}})");
}

TEST_CASE("manifest: overrides reach the task config") {
  RunManifest m;
  m.task = "move";
  m.grid_n = 32;
  m.env_steps = 25;
  m.yield_stress = 30;
  m.ppc = 4;
  TaskConfig<double> cfg = manifest_task<double>(m);
  CHECK(cfg.name == "move");
  CHECK(cfg.prm.n == 32);
  CHECK(cfg.env_steps == 25);
  CHECK(cfg.prm.yield_stress == 30);
  CHECK(cfg.prm.ppc == 4);
  CHECK(cfg.prm.n_substeps == 19);  // untouched default

  RunManifest plain;
  plain.task = "move";
  CHECK(manifest_task<double>(plain).prm.n == 64);

  plain.task = "nosuch";
  CHECK(code_of([&] { manifest_task<double>(plain); }) == ErrorCode::Config);
}

TEST_CASE("manifest: optimizer config and per-task default learning rate") {
  RunManifest m;
  m.task = "rope";
  m.method = "gd_momentum";
  m.episodes = 33;
  OptimConfig<double> oc = manifest_optim<double>(m);
  CHECK(oc.method == OptimMethod::GdMomentum);
  CHECK(oc.learning_rate == 0.01);  // rope default
  CHECK(oc.episodes == 33);

  m.task = "move";
  m.method = "adam";
  CHECK(manifest_optim<double>(m).learning_rate == 0.1);
  m.learning_rate = 0.5;
  CHECK(manifest_optim<double>(m).learning_rate == 0.5);
}

// ---------------------------------------------------------------------------
// Artifact formats.

TEST_CASE("actions: bit-exact round trip and version rejection") {
  std::vector<std::vector<double>> a = {
      {0.1, -1.0 / 3.0, 1e-300},
      {-0.0, 2.5000000000000004, 123456789.123456789},
  };
  std::ostringstream out;
  save_actions(out, a);
  std::istringstream in(out.str());
  auto b = load_actions(in);
  REQUIRE(b.size() == a.size());
  for (size_t t = 0; t < a.size(); t++)
    for (size_t i = 0; i < a[t].size(); i++) CHECK(b[t][i] == a[t][i]);

  CHECK(out.str().substr(0, std::string(kActionsFormat).size()) ==
        kActionsFormat);

  std::istringstream bad("plastisim-actions/9\n1 1\n0\n");
  CHECK(code_of([&] { load_actions(bad); }) == ErrorCode::Io);
  std::istringstream trunc("plastisim-actions/1\n2 3\n1 2 3\n");
  CHECK(code_of([&] { load_actions(trunc); }) == ErrorCode::Io);
  std::istringstream junk("plastisim-actions/1\n1 1\npotato\n");
  CHECK(code_of([&] { load_actions(junk); }) == ErrorCode::Io);
}

TEST_CASE("actions: float matrices load as doubles") {
  std::vector<std::vector<float>> a = {{0.25f, -1.5f}};
  std::ostringstream out;
  save_actions(out, a);
  std::istringstream in(out.str());
  auto b = load_actions(in);
  CHECK(b[0][0] == 0.25);
  CHECK(b[0][1] == -1.5);
}

TEST_CASE("dump: round trip") {
  Particles<double> ps;
  ps.resize(3);
  ps.x = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {1.0 / 7, 2.0 / 7, 3.0 / 7}};
  ps.v = {{0, -1, 0}, {0.125, 0, 0}, {1e-9, 1e9, -3.3}};
  std::ostringstream out;
  save_dump(out, ps, 12);
  std::istringstream in(out.str());
  DumpData d = load_dump(in);
  CHECK(d.step == 12);
  REQUIRE(d.x.size() == 3);
  for (int p = 0; p < 3; p++) {
    CHECK(d.x[p].x == ps.x[p].x);
    CHECK(d.x[p].y == ps.x[p].y);
    CHECK(d.x[p].z == ps.x[p].z);
    CHECK(d.v[p].x == ps.v[p].x);
    CHECK(d.v[p].y == ps.v[p].y);
    CHECK(d.v[p].z == ps.v[p].z);
  }
  std::istringstream bad("plastisim-dump/2\n0 0\n");
  CHECK(code_of([&] { load_dump(bad); }) == ErrorCode::Io);
}

TEST_CASE("metrics csv: round trip, header, rejection") {
  std::ostringstream out;
  {
    MetricsWriter w(out, {"step", "reward", "iou"});
    w.row({0, -1.25, 0.03125});
    w.row({1, -1.0 / 3, 0.0625});
  }
  std::istringstream in(out.str());
  MetricsData m = load_metrics(in);
  REQUIRE(m.cols == std::vector<std::string>{"step", "reward", "iou"});
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[1][1] == -1.0 / 3);
  CHECK(m.rows[0][2] == 0.03125);

  std::istringstream bad("# plastisim-metrics/7\nstep\n0\n");
  CHECK(code_of([&] { load_metrics(bad); }) == ErrorCode::Io);
  std::istringstream ragged("# plastisim-metrics/1\na,b\n1\n");
  CHECK(code_of([&] { load_metrics(ragged); }) == ErrorCode::Io);
}

TEST_CASE("report: round trip and missing keys") {
  std::ostringstream out;
  save_report(out, {{"max_rel_err", "4.0000000000000001e-05"}, {"pass", "1"}});
  std::istringstream in(out.str());
  auto kv = load_report(in);
  CHECK(report_value(kv, "max_rel_err") == "4.0000000000000001e-05");
  CHECK(report_value(kv, "pass") == "1");
  CHECK(code_of([&] { report_value(kv, "nope"); }) == ErrorCode::Io);

  std::istringstream bad("format=plastisim-report/3\nmax=1\n");
  CHECK(code_of([&] { load_report(bad); }) == ErrorCode::Io);
}

TEST_CASE("file helpers surface io errors") {
  CHECK(code_of([] { read_text_file("/nonexistent/really/not.txt"); }) ==
        ErrorCode::Io);
  CHECK(code_of([] { write_text_file("/nonexistent/really/not.txt", "x"); }) ==
        ErrorCode::Io);
}
