/*
 * C API of the mhdvem shared library: divergence-free virtual element
 * discretization of time-dependent resistive MHD on polyhedral meshes.
 *
 * All functions return MHDVEM_OK on success; on failure they return a
 * category code and leave a message retrievable with mhdvem_last_error()
 * (thread local). Objects are opaque handles released with the matching
 * _free function.
 */
#ifndef MHDVEM_H
#define MHDVEM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mhdvem_status {
  MHDVEM_OK = 0,
  MHDVEM_ERR_CONFIG = 1,
  MHDVEM_ERR_IO = 2,
  MHDVEM_ERR_MESH = 3,
  MHDVEM_ERR_SOLVER = 4
} mhdvem_status;

typedef struct mhdvem_mesh mhdvem_mesh;

const char* mhdvem_last_error(void);

/* ---- meshes ---- */

mhdvem_status mhdvem_mesh_create_cube(int n, mhdvem_mesh** out);
mhdvem_status mhdvem_mesh_create_tet(int n, mhdvem_mesh** out);
mhdvem_status mhdvem_mesh_read(const char* path, mhdvem_mesh** out);
mhdvem_status mhdvem_mesh_write(const mhdvem_mesh* mesh, const char* path);
void mhdvem_mesh_free(mhdvem_mesh* mesh);

void mhdvem_mesh_counts(const mhdvem_mesh* mesh, long* nv, long* ne, long* nf, long* nc);
double mhdvem_mesh_size(const mhdvem_mesh* mesh); /* max cell diameter */

/* Writes the diagnostics report into buf (truncating) and the violation
 * count into n_violations; returns MHDVEM_ERR_MESH when violations exist. */
mhdvem_status mhdvem_mesh_validate(const mhdvem_mesh* mesh, char* buf, size_t bufsize,
                                   int* n_violations);
void mhdvem_mesh_quality(const mhdvem_mesh* mesh, double* min_face_to_cell,
                         double* min_edge_to_face);

/* ---- simulations ---- */

typedef enum mhdvem_problem_kind {
  MHDVEM_PROBLEM_MANUFACTURED = 0, /* benchmark solution, exact-trace BCs */
  MHDVEM_PROBLEM_DECAY = 1         /* f = g = 0, homogeneous BCs, seeded data */
} mhdvem_problem_kind;

typedef struct mhdvem_run_config {
  double T;          /* final time, > 0 */
  double dt;         /* time step, 0 < dt <= T */
  double re;         /* viscous Reynolds number */
  double rem;        /* magnetic Reynolds number */
  double hartmann;   /* Lorentz coupling coefficient s */
  double picard_tol; /* relative increment tolerance */
  int picard_max;    /* maximum Picard iterations per step */
  int problem;       /* mhdvem_problem_kind */
  int threads;       /* assembly parallelism cap, >= 1 */
  unsigned seed;     /* decay problem initial data seed */
  const char* step_csv_path; /* optional per-step CSV output, may be NULL */
} mhdvem_run_config;

void mhdvem_run_config_defaults(mhdvem_run_config* cfg);

typedef struct mhdvem_run_result {
  long steps;
  int max_picard_iters;
  double max_div_u, max_div_B;
  double final_energy;
  /* Relative projected L2 errors at T against the manufactured fields;
   * NaN for the decay problem. */
  double err_u, err_E, err_B, err_p;
} mhdvem_run_result;

mhdvem_status mhdvem_run(const mhdvem_mesh* mesh, const mhdvem_run_config* cfg,
                         mhdvem_run_result* result);

/* ---- convergence study ---- */

typedef struct mhdvem_convergence_result {
  double rate_u, rate_E, rate_B, rate_p;
  double max_div_u, max_div_B;
} mhdvem_convergence_result;

/* family: "cube" or "tet"; levels/dts: nlevels entries; csv_path optional. */
mhdvem_status mhdvem_convergence(const char* family, const int* levels, const double* dts,
                                 int nlevels, const mhdvem_run_config* cfg,
                                 const char* csv_path, mhdvem_convergence_result* result);

#ifdef __cplusplus
}
#endif

#endif /* MHDVEM_H */
