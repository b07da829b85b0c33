#include "mhdvem/forms.hpp"

namespace mhdvem {

LocalForms local_bilinear_forms(const ElementOperators& ops) {
  const int n = ops.n_vel_dofs(), ne = ops.n_edge_dofs(), nf = ops.n_face_dofs();
  const double vol = ops.volume, h = ops.h;
  LocalForms lf;

  // a_h: consistency term in the scaled-monomial basis, gradient Gram is
  // diagonal |P|/h^2 on the non-constant monomials.
  Eigen::MatrixXd Gn = Eigen::MatrixXd::Zero(12, 12);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(12, 12);
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 4; ++a) {
      if (a >= 1) Gn(4 * i + a, 4 * i + a) = vol / (h * h);
      for (int b = 0; b < 4; ++b) G(4 * i + a, 4 * i + b) = ops.gram1(a, b);
    }
  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Kn = In - ops.vel_poly_dofs * ops.pi_nabla;
  const Eigen::MatrixXd Kz = In - ops.vel_poly_dofs * ops.pi_zero;
  lf.A = ops.pi_nabla.transpose() * Gn * ops.pi_nabla + ops.s_a_scale * Kn.transpose() * Kn;
  lf.M = ops.pi_zero.transpose() * G * ops.pi_zero + ops.s_m_scale * Kz.transpose() * Kz;

  const Eigen::MatrixXd Ke =
      Eigen::MatrixXd::Identity(ne, ne) - ops.edge_const_dofs * ops.pi_edge;
  lf.Medge = vol * ops.pi_edge.transpose() * ops.pi_edge +
             Ke.transpose() * ops.s_edge_diag.asDiagonal() * Ke;

  const Eigen::MatrixXd Kf =
      Eigen::MatrixXd::Identity(nf, nf) - ops.face_const_dofs * ops.pi_face;
  lf.Mface = vol * ops.pi_face.transpose() * ops.pi_face +
             Kf.transpose() * ops.s_face_diag.asDiagonal() * Kf;

  lf.Curl = lf.Mface * ops.curl_local;
  lf.Bdiv = -vol * ops.div_row;
  return lf;
}

Eigen::MatrixXd local_advection(const ElementOperators& ops, const Eigen::VectorXd& ubar_local) {
  const int n = ops.n_vel_dofs();
  // zeta = Pi0_1 ubar as 3 x 4 coefficient block.
  Eigen::Matrix<double, 3, 4> zeta;
  const Eigen::VectorXd zc = ops.pi_zero * ubar_local;
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 4; ++a) zeta(i, a) = zc(4 * i + a);

  // c(ubar; u, w) = sum_ab H(a,b) (G_u zeta_a) . w_b with G_u from pi_grad.
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);  // rows w-test, cols u-trial
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double hab = ops.gram1(a, b);
      if (hab == 0.0) continue;
      for (int i = 0; i < 3; ++i) {
        Eigen::RowVectorXd gz = Eigen::RowVectorXd::Zero(n);
        for (int j = 0; j < 3; ++j) gz += zeta(j, a) * ops.pi_grad.row(3 * i + j);
        C += hab * ops.pi_zero.row(4 * i + b).transpose() * gz;
      }
    }
  return 0.5 * (C - C.transpose());
}

LorentzBlocks local_lorentz(const ElementOperators& ops, const Eigen::VectorXd& Bbar_local) {
  const Vec3 bbar = ops.pi_face * Bbar_local;
  Eigen::Matrix3d X;  // X a = bbar x a
  X << 0, -bbar.z(), bbar.y(), bbar.z(), 0, -bbar.x(), -bbar.y(), bbar.x(), 0;
  const Eigen::MatrixXd chi = -X * ops.vel_mean();  // 3 x n, chi(v, Bbar)

  LorentzBlocks blocks;
  blocks.vE = ops.volume * chi.transpose() * ops.pi_edge;
  blocks.vu = ops.volume * chi.transpose() * chi;
  blocks.Fu = ops.volume * ops.pi_edge.transpose() * chi;
  return blocks;
}

Eigen::VectorXd load_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                              const ElementOperators& ops, const VectorField& f) {
  const Quadrature quad = cell_quadrature(mesh, geom, ops.cell, 4);
  Eigen::VectorXd mom = Eigen::VectorXd::Zero(12);
  for (size_t q = 0; q < quad.points.size(); ++q) {
    const Vec3 fv = f(quad.points[q]);
    for (int a = 0; a < 4; ++a) {
      const double m = quad.weights[q] * cell_monomial(geom.cell[ops.cell], a, quad.points[q]);
      for (int i = 0; i < 3; ++i) mom(4 * i + a) += m * fv[i];
    }
  }
  return ops.pi_zero.transpose() * mom;
}

Eigen::VectorXd load_edge(const PolyMesh& mesh, const MeshGeometry& geom,
                          const ElementOperators& ops, const VectorField& g) {
  const Quadrature quad = cell_quadrature(mesh, geom, ops.cell, 4);
  Vec3 mom = Vec3::Zero();
  for (size_t q = 0; q < quad.points.size(); ++q) mom += quad.weights[q] * g(quad.points[q]);
  return ops.pi_edge.transpose() * mom;
}

}  // namespace mhdvem
