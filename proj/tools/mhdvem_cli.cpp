// Command-line driver for the mhdvem shared library: single runs,
// convergence studies, and mesh utilities. Talks to the solver exclusively
// through the C API.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mhdvem.h"

namespace {

// Exit codes: 0 success, 2 config, 3 io, 4 mesh validation, 5 solver.
int exit_code(mhdvem_status st) {
  switch (st) {
    case MHDVEM_OK: return 0;
    case MHDVEM_ERR_CONFIG: return 2;
    case MHDVEM_ERR_IO: return 3;
    case MHDVEM_ERR_MESH: return 4;
    case MHDVEM_ERR_SOLVER: return 5;
  }
  return 1;
}

int fail(mhdvem_status st) {
  std::fprintf(stderr, "error: %s\n", mhdvem_last_error());
  return exit_code(st);
}

bool verbose() {
  const char* v = std::getenv("MHDVEM_LOG");
  return v && *v && std::strcmp(v, "0") != 0;
}

struct MeshSpec {
  std::string family;  // cube | tet | file
  int n = 0;
  std::string path;
};

bool parse_mesh_spec(const std::string& s, MeshSpec& spec) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) return false;
  spec.family = s.substr(0, colon);
  const std::string arg = s.substr(colon + 1);
  if (spec.family == "cube" || spec.family == "tet") {
    try {
      spec.n = std::stoi(arg);
    } catch (...) {
      return false;
    }
    return spec.n >= 1;
  }
  if (spec.family == "file") {
    spec.path = arg;
    return !spec.path.empty();
  }
  return false;
}

mhdvem_status make_mesh(const MeshSpec& spec, mhdvem_mesh** mesh) {
  if (spec.family == "cube") return mhdvem_mesh_create_cube(spec.n, mesh);
  if (spec.family == "tet") return mhdvem_mesh_create_tet(spec.n, mesh);
  return mhdvem_mesh_read(spec.path.c_str(), mesh);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mhdvem: divergence-free virtual element solver for resistive MHD"};
  app.require_subcommand(1);
  app.set_config("--config", "", "optional key=value configuration file");

  std::string mesh_arg, out_path, problem = "manufactured", levels_arg = "2,4";
  mhdvem_run_config cfg;
  mhdvem_run_config_defaults(&cfg);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--mesh", mesh_arg, "mesh spec: cube:N, tet:N, or file:PATH")->required();
    cmd->add_option("--dt", cfg.dt, "time step");
    cmd->add_option("--T", cfg.T, "final time");
    cmd->add_option("--re", cfg.re, "viscous Reynolds number");
    cmd->add_option("--rem", cfg.rem, "magnetic Reynolds number");
    cmd->add_option("--hartmann", cfg.hartmann, "Lorentz coupling coefficient");
    cmd->add_option("--picard-tol", cfg.picard_tol, "Picard relative increment tolerance");
    cmd->add_option("--picard-max", cfg.picard_max, "maximum Picard iterations");
    cmd->add_option("--threads", cfg.threads, "assembly parallelism cap");
    cmd->add_option("--out", out_path, "output CSV path");
  };

  CLI::App* run = app.add_subcommand("run", "run a single transient simulation");
  add_common(run);
  run->add_flag_callback("--manufactured", [&] { problem = "manufactured"; },
                         "use the manufactured benchmark problem (default)");
  run->add_option("--problem", problem, "problem kind: manufactured | decay");
  run->add_option("--seed", cfg.seed, "decay initial data seed");

  CLI::App* conv = app.add_subcommand("convergence", "simultaneous space/time refinement study");
  add_common(conv);
  conv->add_option("--levels", levels_arg, "comma-separated generator levels, e.g. 2,4,8");

  CLI::App* info = app.add_subcommand("mesh-info", "report mesh counts and quality");
  std::string info_arg;
  info->add_option("mesh", info_arg, "mesh spec: cube:N, tet:N, or file:PATH")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  if (info->parsed()) {
    MeshSpec spec;
    if (!parse_mesh_spec(info_arg, spec)) {
      std::fprintf(stderr, "error: invalid mesh spec '%s'\n", info_arg.c_str());
      return 2;
    }
    mhdvem_mesh* mesh = nullptr;
    if (mhdvem_status st = make_mesh(spec, &mesh); st != MHDVEM_OK) return fail(st);
    long nv, ne, nf, nc;
    mhdvem_mesh_counts(mesh, &nv, &ne, &nf, &nc);
    std::printf("%ld vertices, %ld edges, %ld faces, %ld cells\n", nv, ne, nf, nc);
    std::printf("h = %.17g\n", mhdvem_mesh_size(mesh));
    double q1, q2;
    mhdvem_mesh_quality(mesh, &q1, &q2);
    std::printf("min h_F/h_P = %.17g, min h_e/h_F = %.17g\n", q1, q2);
    char buf[16384];
    int nviol = 0;
    const mhdvem_status st = mhdvem_mesh_validate(mesh, buf, sizeof buf, &nviol);
    std::printf("%s", buf);
    mhdvem_mesh_free(mesh);
    return st == MHDVEM_OK ? 0 : fail(st);
  }

  MeshSpec spec;
  if (!parse_mesh_spec(mesh_arg, spec)) {
    std::fprintf(stderr, "error: invalid mesh spec '%s' (field --mesh)\n", mesh_arg.c_str());
    return 2;
  }

  if (run->parsed()) {
    if (problem != "manufactured" && problem != "decay") {
      std::fprintf(stderr, "error: invalid problem '%s' (field --problem)\n", problem.c_str());
      return 2;
    }
    cfg.problem = problem == "decay" ? MHDVEM_PROBLEM_DECAY : MHDVEM_PROBLEM_MANUFACTURED;
    cfg.step_csv_path = out_path.empty() ? nullptr : out_path.c_str();
    mhdvem_mesh* mesh = nullptr;
    if (mhdvem_status st = make_mesh(spec, &mesh); st != MHDVEM_OK) return fail(st);
    if (verbose()) std::fprintf(stderr, "running %s on %s\n", problem.c_str(), mesh_arg.c_str());
    mhdvem_run_result result;
    const mhdvem_status st = mhdvem_run(mesh, &cfg, &result);
    mhdvem_mesh_free(mesh);
    if (st != MHDVEM_OK) return fail(st);
    std::printf("steps: %ld\n", result.steps);
    std::printf("max picard iterations: %d\n", result.max_picard_iters);
    std::printf("max div_u: %.6e\nmax div_B: %.6e\n", result.max_div_u, result.max_div_B);
    std::printf("final energy: %.17g\n", result.final_energy);
    if (cfg.problem == MHDVEM_PROBLEM_MANUFACTURED)
      std::printf("errors at T: u %.6e, E %.6e, B %.6e, p %.6e\n", result.err_u, result.err_E,
                  result.err_B, result.err_p);
    return 0;
  }

  // convergence
  if (spec.family == "file") {
    std::fprintf(stderr, "error: convergence requires a generator family (field --mesh)\n");
    return 2;
  }
  std::vector<int> levels;
  for (size_t pos = 0; pos < levels_arg.size();) {
    const size_t next = levels_arg.find(',', pos);
    const std::string tok = levels_arg.substr(pos, next == std::string::npos ? next : next - pos);
    try {
      levels.push_back(std::stoi(tok));
    } catch (...) {
      std::fprintf(stderr, "error: invalid level '%s' (field --levels)\n", tok.c_str());
      return 2;
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (levels.size() < 2) {
    std::fprintf(stderr, "error: need at least 2 levels (field --levels)\n");
    return 2;
  }
  std::vector<double> dts(levels.size());
  for (size_t i = 0; i < levels.size(); ++i) dts[i] = cfg.dt / double(1 << i);

  mhdvem_convergence_result result;
  const mhdvem_status st =
      mhdvem_convergence(spec.family.c_str(), levels.data(), dts.data(),
                         static_cast<int>(levels.size()), &cfg,
                         out_path.empty() ? nullptr : out_path.c_str(), &result);
  if (st != MHDVEM_OK) return fail(st);
  std::printf("fitted rates: u %.3f, E %.3f, B %.3f, p %.3f\n", result.rate_u, result.rate_E,
              result.rate_B, result.rate_p);
  std::printf("max div_u: %.6e\nmax div_B: %.6e\n", result.max_div_u, result.max_div_B);
  return 0;
}
