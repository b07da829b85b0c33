// Global four-field saddle-point assembly, implicit Euler stepping with
// Picard linearization, Dirichlet lifts, sparse direct solve, and per-step
// diagnostics.
#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "mhdvem/forms.hpp"
#include "mhdvem/geometry.hpp"
#include "mhdvem/mesh.hpp"
#include "mhdvem/projectors.hpp"
#include "mhdvem/spaces.hpp"

namespace mhdvem {

struct PhysParams {
  double Re = 1.0, Rem = 1.0, s = 1.0;
};

struct PicardConfig {
  double tol = 1e-8;
  int max_iter = 20;
};

using SpaceTimeField = std::function<Vec3(const Vec3&, double)>;

struct ProblemDef {
  SpaceTimeField f, g;              // volume sources; null means zero
  SpaceTimeField u_bc, E_bc, B_bc;  // Dirichlet traces; null means homogeneous
  VectorField u0, B0, E0;           // initial fields
  std::optional<Eigen::VectorXd> u0_dofs, B0_dofs, E0_dofs;  // override interpolation
};

struct MhdState {
  double t = 0.0;
  Eigen::VectorXd u, p, E, B;
};

struct StepReport {
  int picard_iterations = 0;
  double final_increment = 0.0;
  double div_u = 0.0, div_B = 0.0;
  double energy = 0.0;
};

// Mesh-bound discretization: geometry, layouts, element operators, local
// forms, and the global lag-independent mass matrices.
class Discretization {
 public:
  Discretization(PolyMesh mesh_in, int threads_in);

  PolyMesh mesh;
  MeshGeometry geom;
  BoundaryTags tags;
  DofLayout layout;
  std::vector<ElementOperators> ops;
  std::vector<LocalForms> forms;
  int threads = 1;

  Eigen::SparseMatrix<double> M_global;      // velocity m_h
  Eigen::SparseMatrix<double> Mface_global;  // face inner product

  double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& B, const PhysParams& pp) const;
};

struct SparseSystem {
  Eigen::SparseMatrix<double> mat;
  Eigen::VectorXd rhs;
  long dim = 0;
  long off_u = 0, off_p = 0, off_lambda = 0, off_E = 0, off_B = 0;
  std::vector<long> u_index, E_index, B_index;  // global dof -> interior index or -1
  Eigen::VectorXd u_lift, E_lift, B_lift;       // Dirichlet values at t^{n+1}
};

// One implicit-Euler row block with the nonlinear coefficients lagged at
// `lag` (Picard): ubar in the advection form, Bbar in every chi_h occurrence.
SparseSystem assemble_step(const Discretization& disc, const MhdState& state_n,
                           const MhdState& lag, double dt, const ProblemDef& problem,
                           const PhysParams& pp);

std::pair<MhdState, StepReport> solve_time_step(const Discretization& disc,
                                                const MhdState& state_n, double dt,
                                                const ProblemDef& problem, const PhysParams& pp,
                                                const PicardConfig& picard);

MhdState initial_state(const Discretization& disc, const ProblemDef& problem);

StepReport diagnostics(const Discretization& disc, const MhdState& state, const PhysParams& pp);

struct TransientResult {
  std::vector<StepReport> reports;
  MhdState final_state;
};

// Steps from t=0 to T; emits one CSV row per step when step_csv is non-null.
TransientResult run_transient(const Discretization& disc, const ProblemDef& problem,
                              const PhysParams& pp, const PicardConfig& picard, double T,
                              double dt, std::ostream* step_csv);

void write_step_csv_header(std::ostream& os);
void write_step_csv_row(std::ostream& os, int step, double t, const StepReport& rep);

// f = g = 0, homogeneous BCs, deterministic solenoidal initial data: B0 is
// the curl of a seeded interior edge field (exactly divergence free), u0 a
// smooth div-free field vanishing on the boundary.
ProblemDef make_decay_problem(const Discretization& disc, unsigned seed);

}  // namespace mhdvem
