// Closed-form benchmark solution on the unit cube, the frozen source terms
// that make it satisfy the resistive MHD system, projected error norms, and
// the simultaneous space/time refinement study.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "mhdvem/mhd.hpp"

namespace mhdvem::manufactured {

Vec3 velocity(const Vec3& x, double t);
double pressure(const Vec3& x, double t);
Vec3 electric(const Vec3& x, double t);
Vec3 magnetic(const Vec3& x, double t);

// Closed-form derivatives used by the frozen sources (and handy in tests).
Vec3 velocity_dt(const Vec3& x, double t);
Eigen::Matrix3d velocity_grad(const Vec3& x, double t);
Vec3 velocity_laplacian(const Vec3& x, double t);
Vec3 pressure_grad(const Vec3& x, double t);
Vec3 magnetic_curl(const Vec3& x, double t);
Vec3 current(const Vec3& x, double t);  // j = E + u x B

Vec3 source_f(const Vec3& x, double t, const PhysParams& pp);
Vec3 source_g(const Vec3& x, double t, const PhysParams& pp);

// The full problem definition: sources, exact-trace Dirichlet data, exact
// initial fields.
ProblemDef problem(const PhysParams& pp);

struct ErrorNorms {
  double u = 0, E = 0, B = 0, p = 0;
};

// Relative L2 errors of Pi0_1 u_h, Pi0_0 E_h, Pi0_0 B_h, p_h against the
// exact fields at time t, by degree-4 quadrature.
ErrorNorms error_norms(const Discretization& disc, const MhdState& state, double t);

struct ConvergenceRow {
  std::string family;
  int level = 0;  // generator parameter n
  double h = 0, dt = 0;
  ErrorNorms err;
  double div_u = 0, div_B = 0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::array<double, 4> rates{};  // fitted rates for u, E, B, p
};

ConvergenceResult convergence_study(const std::string& family, const std::vector<int>& levels,
                                    const std::vector<double>& dts, double T,
                                    const PhysParams& pp, const PicardConfig& picard,
                                    int threads);

std::array<double, 4> fit_rates(const std::vector<ConvergenceRow>& rows);

void write_convergence_csv_header(std::ostream& os);
void write_convergence_csv_row(std::ostream& os, const ConvergenceRow& row);

}  // namespace mhdvem::manufactured
