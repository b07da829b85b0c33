#include "mhdvem/manufactured.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "mhdvem/errors.hpp"

namespace mhdvem::manufactured {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Vec3 velocity(const Vec3& x, double t) {
  const double sx = std::sin(kPi * x.x()), cx = std::cos(kPi * x.x());
  const double sy = std::sin(kPi * x.y()), cy = std::cos(kPi * x.y());
  const double sz = std::sin(kPi * x.z()), cz = std::cos(kPi * x.z());
  return std::cos(t) * Vec3(sx * cy * cz, cx * sy * cz, -2 * cx * cy * sz);
}

double pressure(const Vec3& x, double t) {
  return (x.x() * x.x() + x.y() * x.z() + x.z() - 13.0 / 12.0) * std::cos(t);
}

Vec3 electric(const Vec3& x, double t) {
  return Vec3(6 * x.y(), 12 * x.z() * x.z() - 24 * t, 12 * x.y() * x.y() - 24 * t + 6 * x.x());
}

Vec3 magnetic(const Vec3& x, double t) {
  const double y = x.y(), z = x.z();
  return Vec3(4 * y * y * y - 4 * z * z * z - t * (24 * y - 24 * z), -3 * x.x() * x.x() + 6 * t,
              -3 * y * y + 6 * t);
}

Vec3 velocity_dt(const Vec3& x, double t) {
  const double sx = std::sin(kPi * x.x()), cx = std::cos(kPi * x.x());
  const double sy = std::sin(kPi * x.y()), cy = std::cos(kPi * x.y());
  const double sz = std::sin(kPi * x.z()), cz = std::cos(kPi * x.z());
  return -std::sin(t) * Vec3(sx * cy * cz, cx * sy * cz, -2 * cx * cy * sz);
}

Eigen::Matrix3d velocity_grad(const Vec3& x, double t) {
  const double sx = std::sin(kPi * x.x()), cx = std::cos(kPi * x.x());
  const double sy = std::sin(kPi * x.y()), cy = std::cos(kPi * x.y());
  const double sz = std::sin(kPi * x.z()), cz = std::cos(kPi * x.z());
  const double a = kPi * std::cos(t);
  Eigen::Matrix3d g;  // g(i,j) = d_j u_i
  g << a * cx * cy * cz, -a * sx * sy * cz, -a * sx * cy * sz,   //
      -a * sx * sy * cz, a * cx * cy * cz, -a * cx * sy * sz,    //
      2 * a * sx * cy * sz, 2 * a * cx * sy * sz, -2 * a * cx * cy * cz;
  return g;
}

Vec3 velocity_laplacian(const Vec3& x, double t) {
  // Each component is a product of one-frequency factors per direction.
  return -3 * kPi * kPi * velocity(x, t);
}

Vec3 pressure_grad(const Vec3& x, double t) {
  return std::cos(t) * Vec3(2 * x.x(), x.z(), x.y() + 1);
}

Vec3 magnetic_curl(const Vec3& x, double t) {
  return Vec3(-6 * x.y(), -12 * x.z() * x.z() + 24 * t,
              -6 * x.x() - 12 * x.y() * x.y() + 24 * t);
}

Vec3 current(const Vec3& x, double t) {
  return electric(x, t) + velocity(x, t).cross(magnetic(x, t));
}

Vec3 source_f(const Vec3& x, double t, const PhysParams& pp) {
  const Vec3 u = velocity(x, t);
  const Vec3 j = current(x, t);
  return velocity_dt(x, t) + velocity_grad(x, t) * u - velocity_laplacian(x, t) / pp.Re -
         pp.s * j.cross(magnetic(x, t)) + pressure_grad(x, t);
}

Vec3 source_g(const Vec3& x, double t, const PhysParams& pp) {
  return current(x, t) - magnetic_curl(x, t) / pp.Rem;
}

ProblemDef problem(const PhysParams& pp) {
  ProblemDef prob;
  prob.f = [pp](const Vec3& x, double t) { return source_f(x, t, pp); };
  prob.g = [pp](const Vec3& x, double t) { return source_g(x, t, pp); };
  prob.u_bc = [](const Vec3& x, double t) { return velocity(x, t); };
  prob.E_bc = [](const Vec3& x, double t) { return electric(x, t); };
  prob.B_bc = [](const Vec3& x, double t) { return magnetic(x, t); };
  prob.u0 = [](const Vec3& x) { return velocity(x, 0.0); };
  prob.B0 = [](const Vec3& x) { return magnetic(x, 0.0); };
  prob.E0 = [](const Vec3& x) { return electric(x, 0.0); };
  return prob;
}

ErrorNorms error_norms(const Discretization& disc, const MhdState& state, double t) {
  double num[4] = {0, 0, 0, 0}, den[4] = {0, 0, 0, 0};
  for (int c = 0; c < disc.mesh.n_cells(); ++c) {
    const ElementOperators& op = disc.ops[c];
    const long nv = disc.mesh.n_vertices();
    Eigen::VectorXd uloc(op.n_vel_dofs());
    {
      int k = 0;
      for (int v : op.verts)
        for (int comp = 0; comp < 3; ++comp) uloc[k++] = state.u[3l * v + comp];
      for (int f : op.faces) uloc[k++] = state.u[3l * nv + f];
    }
    Eigen::VectorXd Eloc(op.n_edge_dofs()), Bloc(op.n_face_dofs());
    for (int i = 0; i < op.n_edge_dofs(); ++i) Eloc[i] = state.E[op.edges[i]];
    for (int i = 0; i < op.n_face_dofs(); ++i) Bloc[i] = state.B[op.faces[i]];

    const Eigen::VectorXd ucoef = op.pi_zero * uloc;  // P1 coefficients
    const Vec3 Econst = op.pi_edge * Eloc;
    const Vec3 Bconst = op.pi_face * Bloc;
    const double pcell = state.p[c];

    const Quadrature quad = cell_quadrature(disc.mesh, disc.geom, c, 4);
    for (size_t q = 0; q < quad.points.size(); ++q) {
      const Vec3& xq = quad.points[q];
      const double w = quad.weights[q];
      Vec3 uh = Vec3::Zero();
      for (int i = 0; i < 3; ++i)
        for (int a = 0; a < 4; ++a)
          uh[i] += ucoef[4 * i + a] * cell_monomial(disc.geom.cell[c], a, xq);
      const Vec3 ue = velocity(xq, t), Ee = electric(xq, t), Be = magnetic(xq, t);
      const double pe = pressure(xq, t);
      num[0] += w * (ue - uh).squaredNorm();
      den[0] += w * ue.squaredNorm();
      num[1] += w * (Ee - Econst).squaredNorm();
      den[1] += w * Ee.squaredNorm();
      num[2] += w * (Be - Bconst).squaredNorm();
      den[2] += w * Be.squaredNorm();
      num[3] += w * (pe - pcell) * (pe - pcell);
      den[3] += w * pe * pe;
    }
  }
  ErrorNorms err;
  err.u = std::sqrt(num[0] / den[0]);
  err.E = std::sqrt(num[1] / den[1]);
  err.B = std::sqrt(num[2] / den[2]);
  err.p = std::sqrt(num[3] / den[3]);
  return err;
}

ConvergenceResult convergence_study(const std::string& family, const std::vector<int>& levels,
                                    const std::vector<double>& dts, double T,
                                    const PhysParams& pp, const PicardConfig& picard,
                                    int threads) {
  if (levels.size() < 2) throw ConfigError("convergence_study: need at least 2 levels");
  if (levels.size() != dts.size())
    throw ConfigError("convergence_study: levels and dt schedule differ in length");

  ConvergenceResult result;
  for (size_t l = 0; l < levels.size(); ++l) {
    PolyMesh mesh = family == "cube"  ? build_cube_mesh(levels[l])
                    : family == "tet" ? build_tet_mesh(levels[l])
                                      : throw ConfigError("convergence_study: unknown family '" +
                                                          family + "'");
    Discretization disc(std::move(mesh), threads);
    const ProblemDef prob = problem(pp);
    const TransientResult run = run_transient(disc, prob, pp, picard, T, dts[l], nullptr);

    ConvergenceRow row;
    row.family = family;
    row.level = levels[l];
    row.h = disc.geom.h;
    row.dt = dts[l];
    row.err = error_norms(disc, run.final_state, run.final_state.t);
    row.div_u = 0;
    row.div_B = 0;
    for (const StepReport& rep : run.reports) {
      row.div_u = std::max(row.div_u, rep.div_u);
      row.div_B = std::max(row.div_B, rep.div_B);
    }
    result.rows.push_back(row);
  }
  result.rates = fit_rates(result.rows);
  return result;
}

std::array<double, 4> fit_rates(const std::vector<ConvergenceRow>& rows) {
  std::array<double, 4> rates{};
  if (rows.size() < 2) return rates;
  for (int q = 0; q < 4; ++q) {
    double acc = 0.0;
    for (size_t l = 0; l + 1 < rows.size(); ++l) {
      auto pick = [&](const ConvergenceRow& r) {
        return q == 0 ? r.err.u : q == 1 ? r.err.E : q == 2 ? r.err.B : r.err.p;
      };
      acc += std::log2(pick(rows[l]) / pick(rows[l + 1]));
    }
    rates[q] = acc / static_cast<double>(rows.size() - 1);
  }
  return rates;
}

void write_convergence_csv_header(std::ostream& os) {
  os << "family,level,h,dt,err_u,err_E,err_B,err_p,div_u,div_B\n";
}

void write_convergence_csv_row(std::ostream& os, const ConvergenceRow& row) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                row.family.c_str(), row.level, row.h, row.dt, row.err.u, row.err.E, row.err.B,
                row.err.p, row.div_u, row.div_B);
  os << buf;
}

}  // namespace mhdvem::manufactured
