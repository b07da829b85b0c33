#include "mhdvem.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "mhdvem/errors.hpp"
#include "mhdvem/manufactured.hpp"
#include "mhdvem/mhd.hpp"

namespace {

thread_local std::string g_last_error;

mhdvem_status set_error(mhdvem_status code, const std::string& what) {
  g_last_error = what;
  return code;
}

template <typename Fn>
mhdvem_status guarded(Fn&& fn) {
  try {
    fn();
    return MHDVEM_OK;
  } catch (const mhdvem::ConfigError& e) {
    return set_error(MHDVEM_ERR_CONFIG, e.what());
  } catch (const mhdvem::IoError& e) {
    return set_error(MHDVEM_ERR_IO, e.what());
  } catch (const mhdvem::MeshError& e) {
    return set_error(MHDVEM_ERR_MESH, e.what());
  } catch (const mhdvem::SolverError& e) {
    return set_error(MHDVEM_ERR_SOLVER, e.what());
  } catch (const std::exception& e) {
    return set_error(MHDVEM_ERR_SOLVER, e.what());
  }
}

}  // namespace

struct mhdvem_mesh {
  mhdvem::PolyMesh mesh;
};

extern "C" {

const char* mhdvem_last_error(void) { return g_last_error.c_str(); }

mhdvem_status mhdvem_mesh_create_cube(int n, mhdvem_mesh** out) {
  return guarded([&] { *out = new mhdvem_mesh{mhdvem::build_cube_mesh(n)}; });
}

mhdvem_status mhdvem_mesh_create_tet(int n, mhdvem_mesh** out) {
  return guarded([&] { *out = new mhdvem_mesh{mhdvem::build_tet_mesh(n)}; });
}

mhdvem_status mhdvem_mesh_read(const char* path, mhdvem_mesh** out) {
  return guarded([&] { *out = new mhdvem_mesh{mhdvem::read_poly_mesh_file(path)}; });
}

mhdvem_status mhdvem_mesh_write(const mhdvem_mesh* mesh, const char* path) {
  return guarded([&] { mhdvem::write_poly_mesh_file(mesh->mesh, path); });
}

void mhdvem_mesh_free(mhdvem_mesh* mesh) { delete mesh; }

void mhdvem_mesh_counts(const mhdvem_mesh* mesh, long* nv, long* ne, long* nf, long* nc) {
  if (nv) *nv = mesh->mesh.n_vertices();
  if (ne) *ne = mesh->mesh.n_edges();
  if (nf) *nf = mesh->mesh.n_faces();
  if (nc) *nc = mesh->mesh.n_cells();
}

double mhdvem_mesh_size(const mhdvem_mesh* mesh) {
  return mhdvem::MeshGeometry::compute(mesh->mesh).h;
}

mhdvem_status mhdvem_mesh_validate(const mhdvem_mesh* mesh, char* buf, size_t bufsize,
                                   int* n_violations) {
  mhdvem::MeshDiagnostics diag;
  const mhdvem_status st = guarded([&] { diag = mhdvem::validate(mesh->mesh); });
  if (st != MHDVEM_OK) return st;
  if (buf && bufsize > 0) {
    const std::string s = diag.summary();
    std::strncpy(buf, s.c_str(), bufsize - 1);
    buf[bufsize - 1] = '\0';
  }
  if (n_violations) *n_violations = static_cast<int>(diag.violations.size());
  if (!diag.ok()) return set_error(MHDVEM_ERR_MESH, "mesh validation reported violations");
  return MHDVEM_OK;
}

void mhdvem_mesh_quality(const mhdvem_mesh* mesh, double* min_face_to_cell,
                         double* min_edge_to_face) {
  const mhdvem::MeshDiagnostics diag = mhdvem::validate(mesh->mesh);
  if (min_face_to_cell) *min_face_to_cell = diag.min_cell_face_ratio;
  if (min_edge_to_face) *min_edge_to_face = diag.min_face_edge_ratio;
}

void mhdvem_run_config_defaults(mhdvem_run_config* cfg) {
  cfg->T = 1.0;
  cfg->dt = 0.25;
  cfg->re = 1.0;
  cfg->rem = 1.0;
  cfg->hartmann = 1.0;
  cfg->picard_tol = 1e-8;
  cfg->picard_max = 20;
  cfg->problem = MHDVEM_PROBLEM_MANUFACTURED;
  cfg->threads = 1;
  cfg->seed = 7;
  cfg->step_csv_path = nullptr;
}

namespace {

void check_config(const mhdvem_run_config* cfg) {
  using mhdvem::ConfigError;
  if (!(cfg->T > 0)) throw ConfigError("config field T must be positive");
  if (!(cfg->dt > 0)) throw ConfigError("config field dt must be positive");
  if (cfg->dt > cfg->T * (1 + 1e-12)) throw ConfigError("config requires dt <= T");
  if (!(cfg->re > 0)) throw ConfigError("config field re must be positive");
  if (!(cfg->rem > 0)) throw ConfigError("config field rem must be positive");
  if (!(cfg->hartmann > 0)) throw ConfigError("config field hartmann must be positive");
  if (!(cfg->picard_tol > 0)) throw ConfigError("config field picard_tol must be positive");
  if (cfg->picard_max < 1) throw ConfigError("config field picard_max must be at least 1");
  if (cfg->threads < 1) throw ConfigError("config field threads must be at least 1");
}

}  // namespace

mhdvem_status mhdvem_run(const mhdvem_mesh* mesh, const mhdvem_run_config* cfg,
                         mhdvem_run_result* result) {
  return guarded([&] {
    check_config(cfg);
    const mhdvem::MeshDiagnostics diag = mhdvem::validate(mesh->mesh);
    if (!diag.ok()) throw mhdvem::MeshError("mesh validation failed:\n" + diag.summary());

    mhdvem::PhysParams pp{cfg->re, cfg->rem, cfg->hartmann};
    mhdvem::PicardConfig picard{cfg->picard_tol, cfg->picard_max};
    mhdvem::Discretization disc(mesh->mesh, cfg->threads);
    const mhdvem::ProblemDef prob = cfg->problem == MHDVEM_PROBLEM_MANUFACTURED
                                        ? mhdvem::manufactured::problem(pp)
                                        : mhdvem::make_decay_problem(disc, cfg->seed);

    std::ofstream csv;
    std::ostream* csv_ptr = nullptr;
    if (cfg->step_csv_path) {
      csv.open(cfg->step_csv_path);
      if (!csv) throw mhdvem::IoError(std::string("cannot open CSV path: ") + cfg->step_csv_path);
      csv_ptr = &csv;
    }

    const mhdvem::TransientResult run =
        mhdvem::run_transient(disc, prob, pp, picard, cfg->T, cfg->dt, csv_ptr);

    if (result) {
      result->steps = static_cast<long>(run.reports.size());
      result->max_picard_iters = 0;
      result->max_div_u = 0;
      result->max_div_B = 0;
      for (const auto& rep : run.reports) {
        result->max_picard_iters = std::max(result->max_picard_iters, rep.picard_iterations);
        result->max_div_u = std::max(result->max_div_u, rep.div_u);
        result->max_div_B = std::max(result->max_div_B, rep.div_B);
      }
      result->final_energy = run.reports.empty() ? 0.0 : run.reports.back().energy;
      if (cfg->problem == MHDVEM_PROBLEM_MANUFACTURED) {
        const auto err =
            mhdvem::manufactured::error_norms(disc, run.final_state, run.final_state.t);
        result->err_u = err.u;
        result->err_E = err.E;
        result->err_B = err.B;
        result->err_p = err.p;
      } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        result->err_u = result->err_E = result->err_B = result->err_p = nan;
      }
    }
  });
}

mhdvem_status mhdvem_convergence(const char* family, const int* levels, const double* dts,
                                 int nlevels, const mhdvem_run_config* cfg,
                                 const char* csv_path, mhdvem_convergence_result* result) {
  return guarded([&] {
    check_config(cfg);
    mhdvem::PhysParams pp{cfg->re, cfg->rem, cfg->hartmann};
    mhdvem::PicardConfig picard{cfg->picard_tol, cfg->picard_max};
    const auto study = mhdvem::manufactured::convergence_study(
        family, std::vector<int>(levels, levels + nlevels),
        std::vector<double>(dts, dts + nlevels), cfg->T, pp, picard, cfg->threads);

    if (csv_path) {
      std::ofstream csv(csv_path);
      if (!csv) throw mhdvem::IoError(std::string("cannot open CSV path: ") + csv_path);
      mhdvem::manufactured::write_convergence_csv_header(csv);
      for (const auto& row : study.rows) mhdvem::manufactured::write_convergence_csv_row(csv, row);
    }
    if (result) {
      result->rate_u = study.rates[0];
      result->rate_E = study.rates[1];
      result->rate_B = study.rates[2];
      result->rate_p = study.rates[3];
      result->max_div_u = 0;
      result->max_div_B = 0;
      for (const auto& row : study.rows) {
        result->max_div_u = std::max(result->max_div_u, row.div_u);
        result->max_div_B = std::max(result->max_div_B, row.div_B);
      }
    }
  });
}

}  // extern "C"
