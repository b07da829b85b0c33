#include "mhdvem/projectors.hpp"

#include <cmath>
#include <sstream>

#include "mhdvem/errors.hpp"
#include "mhdvem/parallel.hpp"

namespace mhdvem {

namespace {

// Axial vector of a skew matrix: skew(omega) v = omega x v.
Vec3 axial(const Eigen::Matrix3d& s) { return Vec3(s(2, 1), s(0, 2), s(1, 0)); }

}  // namespace

FaceNodalProjector face_nodal_projector(const PolyMesh& mesh, const MeshGeometry& geom, int f) {
  const Face& face = mesh.faces[f];
  const FaceGeom& fg = geom.face[f];
  const FaceFrame& fr = fg.frame;
  const int k = static_cast<int>(face.verts.size());
  const double hF = fg.diameter, area = fg.area;

  FaceNodalProjector P;
  P.nodal = Eigen::MatrixXd::Zero(3, k);

  // Gradient rows: (grad Pi v, grad m_i)_F = sum_e (grad m_i . nu_e) int_e v,
  // with the in-plane stiffness (grad m_i, grad m_j)_F = |F|/hF^2 delta_ij.
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2, k);
  double perim = 0.0;
  Eigen::RowVectorXd bnd_int = Eigen::RowVectorXd::Zero(k);    // int_dF v
  Eigen::Vector2d bnd_mono = Eigen::Vector2d::Zero();          // int_dF m_i ds
  for (int i = 0; i < k; ++i) {
    const int j = (i + 1) % k;
    const Vec3& a = mesh.vertices[face.verts[i]];
    const Vec3& b = mesh.vertices[face.verts[j]];
    const double len = (b - a).norm();
    const Vec3 dir = (b - a) / len;
    const Vec3 nu = dir.cross(fr.n);  // outward in-plane normal of a CCW loop
    rhs(0, i) += nu.dot(fr.t1) / hF * len / 2;
    rhs(0, j) += nu.dot(fr.t1) / hF * len / 2;
    rhs(1, i) += nu.dot(fr.t2) / hF * len / 2;
    rhs(1, j) += nu.dot(fr.t2) / hF * len / 2;
    bnd_int(i) += len / 2;
    bnd_int(j) += len / 2;
    const Eigen::Vector2d xa = fr.to2d(a), xb = fr.to2d(b);
    bnd_mono(0) += len * (xa.x() + xb.x()) / (2 * hF);
    bnd_mono(1) += len * (xa.y() + xb.y()) / (2 * hF);
    perim += len;
  }
  P.nodal.row(1) = (hF * hF / area) * rhs.row(0);
  P.nodal.row(2) = (hF * hF / area) * rhs.row(1);
  // Boundary-mean closure fixes the constant coefficient.
  P.nodal.row(0) =
      (bnd_int - bnd_mono(0) * P.nodal.row(1) - bnd_mono(1) * P.nodal.row(2)) / perim;

  const Quadrature quad = face_quadrature(mesh, geom, f, 4);
  P.cross_gram = Eigen::MatrixXd::Zero(3, 6);
  P.p2_moments = Eigen::VectorXd::Zero(6);
  for (size_t q = 0; q < quad.points.size(); ++q) {
    const Eigen::Vector2d xi = fr.to2d(quad.points[q]);
    double m[6];
    for (int a = 0; a < 6; ++a) m[a] = face_monomial(fg, a, xi);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 6; ++b) P.cross_gram(a, b) += quad.weights[q] * m[a] * m[b];
    for (int b = 0; b < 6; ++b) P.p2_moments(b) += quad.weights[q] * m[b];
  }
  return P;
}

Eigen::MatrixXd ElementOperators::vel_mean() const {
  Eigen::MatrixXd m(3, pi_zero.cols());
  for (int i = 0; i < 3; ++i) m.row(i) = pi_zero.row(4 * i);
  return m;
}

namespace {

// Coefficients of the restriction to face F of the quadratic
// s(x) = g.(x - b_P) + 1/2 (x - b_P)^T Asym (x - b_P)
// in the scaled face monomial basis of the stored frame.
Eigen::Matrix<double, 6, 1> restrict_quadratic_to_face(const Vec3& g, const Eigen::Matrix3d& A,
                                                       const Vec3& bP, const FaceGeom& fg) {
  const Vec3 r = fg.centroid - bP;
  const Vec3 t1 = fg.frame.t1, t2 = fg.frame.t2;
  const double hF = fg.diameter;
  Eigen::Matrix<double, 6, 1> c;
  c(0) = g.dot(r) + 0.5 * r.dot(A * r);
  c(1) = hF * (g.dot(t1) + r.dot(A * t1));
  c(2) = hF * (g.dot(t2) + r.dot(A * t2));
  c(3) = hF * hF * 0.5 * t1.dot(A * t1);
  c(4) = hF * hF * t1.dot(A * t2);
  c(5) = hF * hF * 0.5 * t2.dot(A * t2);
  return c;
}

}  // namespace

ElementOperators build_element_operators(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                         const std::vector<FaceNodalProjector>& face_proj) {
  const Cell& c = mesh.cells[cell];
  ElementOperators ops;
  ops.cell = cell;
  ops.faces = c.faces;
  ops.face_signs = c.face_signs;
  ops.volume = geom.cell[cell].volume;
  ops.h = geom.cell[cell].diameter;
  ops.centroid = geom.cell[cell].centroid;
  ops.gram1 = monomial_gram_cell(mesh, geom, cell, 1);

  // Local entity numbering: vertices and edges in first-appearance order over
  // the cell's faces.
  std::vector<int> vert_of_global(mesh.n_vertices(), -1), edge_of_global(mesh.n_edges(), -1);
  for (int f : c.faces) {
    for (int v : mesh.faces[f].verts)
      if (vert_of_global[v] < 0) {
        vert_of_global[v] = static_cast<int>(ops.verts.size());
        ops.verts.push_back(v);
      }
    for (int e : mesh.faces[f].edges)
      if (edge_of_global[e] < 0) {
        edge_of_global[e] = static_cast<int>(ops.edges.size());
        ops.edges.push_back(e);
      }
  }
  const int nv = static_cast<int>(ops.verts.size());
  const int ne = static_cast<int>(ops.edges.size());
  const int nf = static_cast<int>(ops.faces.size());
  const int n = 3 * nv + nf;
  const double vol = ops.volume, h = ops.h;
  const Vec3 bP = ops.centroid;

  // ---- face moment operators of the velocity space ----
  ops.face_vec_moment.resize(nf);
  ops.face_normal_moment.resize(nf);
  for (int lf = 0; lf < nf; ++lf) {
    const int f = c.faces[lf];
    const Face& face = mesh.faces[f];
    const FaceGeom& fg = geom.face[f];
    const FaceNodalProjector& fp = face_proj[f];
    const int kf = static_cast<int>(face.verts.size());

    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, n);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(6, n);
    // Tangential zeroth moments come from the face elliptic projector; the
    // P1 coefficients integrate to |F| * c_0 on the centroid-centered basis.
    for (int lv = 0; lv < kf; ++lv) {
      const int gl = vert_of_global[face.verts[lv]];
      for (int comp = 0; comp < 3; ++comp) {
        const double wt1 = fp.nodal(0, lv) * fg.frame.t1[comp] * fg.area;
        const double wt2 = fp.nodal(0, lv) * fg.frame.t2[comp] * fg.area;
        for (int i = 0; i < 3; ++i)
          Z(i, 3 * gl + comp) += wt1 * fg.frame.t1[i] + wt2 * fg.frame.t2[i];
      }
    }
    for (int i = 0; i < 3; ++i) Z(i, 3 * nv + lf) += fg.area * fg.frame.n[i];

    // Normal moments: constant from the face DoF, higher monomials from the
    // enhancement through the face elliptic projector of w.n.
    N(0, 3 * nv + lf) = fg.area;
    for (int j = 1; j < 6; ++j)
      for (int a = 0; a < 3; ++a)
        for (int lv = 0; lv < kf; ++lv) {
          const int gl = vert_of_global[face.verts[lv]];
          for (int comp = 0; comp < 3; ++comp)
            N(j, 3 * gl + comp) += fp.cross_gram(a, j) * fp.nodal(a, lv) * fg.frame.n[comp];
        }
    ops.face_vec_moment[lf] = std::move(Z);
    ops.face_normal_moment[lf] = std::move(N);
  }

  // ---- exact divergence and elliptic projector ----
  ops.div_row = Eigen::RowVectorXd::Zero(n);
  for (int lf = 0; lf < nf; ++lf)
    ops.div_row(3 * nv + lf) = c.face_signs[lf] * geom.face[c.faces[lf]].area / vol;

  ops.pi_nabla = Eigen::MatrixXd::Zero(12, n);
  double total_area = 0.0;
  Eigen::RowVectorXd closure_rhs[3] = {Eigen::RowVectorXd::Zero(n), Eigen::RowVectorXd::Zero(n),
                                       Eigen::RowVectorXd::Zero(n)};
  Eigen::Vector3d mono_bnd = Eigen::Vector3d::Zero();  // int_dP m_a ds, a = 1..3
  for (int lf = 0; lf < nf; ++lf) {
    const FaceGeom& fg = geom.face[c.faces[lf]];
    const Vec3 n_out = c.face_signs[lf] * fg.frame.n;
    for (int i = 0; i < 3; ++i) {
      for (int a = 1; a <= 3; ++a)
        ops.pi_nabla.row(4 * i + a) += (h / vol) * n_out[a - 1] * ops.face_vec_moment[lf].row(i);
      closure_rhs[i] += ops.face_vec_moment[lf].row(i);
    }
    total_area += fg.area;
    for (int a = 1; a <= 3; ++a)
      mono_bnd(a - 1) += fg.area * cell_monomial(geom.cell[cell], a, fg.centroid);
  }
  for (int i = 0; i < 3; ++i) {
    Eigen::RowVectorXd row = closure_rhs[i];
    for (int a = 1; a <= 3; ++a) row -= mono_bnd(a - 1) * ops.pi_nabla.row(4 * i + a);
    ops.pi_nabla.row(4 * i) = row / total_area;
  }

  ops.pi_grad = Eigen::MatrixXd::Zero(9, n);
  for (int lf = 0; lf < nf; ++lf) {
    const FaceGeom& fg = geom.face[c.faces[lf]];
    const Vec3 n_out = c.face_signs[lf] * fg.frame.n;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        ops.pi_grad.row(3 * i + j) += (n_out[j] / vol) * ops.face_vec_moment[lf].row(i);
  }

  // ---- L2 projector of the velocity space ----
  // Moments against p = m_b e_i via p = grad s + x  x  c: the gradient part
  // integrates by parts with the exact divergence and the face normal
  // moments, the rotational part is traded for the elliptic projection by
  // the element enhancement constraint.
  Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(12, n);
  for (int i = 0; i < 3; ++i) {
    for (int b = 0; b < 4; ++b) {
      Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
      if (b >= 1) A(i, b - 1) = 1.0 / h;
      const Eigen::Matrix3d Asym = 0.5 * (A + A.transpose());
      const Eigen::Matrix3d Askew = 0.5 * (A - A.transpose());
      const Vec3 cvec = axial(-Askew);            // x x cvec = Askew x
      const Vec3 pb = (b == 0) ? Vec3(Vec3::Unit(i)) : Vec3(Vec3::Zero());  // p(b_P)
      const Vec3 g = pb - Askew * bP;             // grad s = g + Asym (x - b_P)

      Eigen::RowVectorXd L = Eigen::RowVectorXd::Zero(n);
      // - div(w) int_P s  (the linear part of s integrates to zero only up to
      //   roundoff of the centroid; keep the Gram-exact value)
      double int_s = 0.0;
      for (int gdx = 1; gdx <= 3; ++gdx) {
        int_s += g[gdx - 1] * h * ops.gram1(0, gdx);
        for (int ddx = 1; ddx <= 3; ++ddx)
          int_s += 0.5 * h * h * Asym(gdx - 1, ddx - 1) * ops.gram1(gdx, ddx);
      }
      L -= int_s * ops.div_row;  // -(div w) int_P s
      for (int lf = 0; lf < nf; ++lf) {
        const auto sf = restrict_quadratic_to_face(g, Asym, bP, geom.face[c.faces[lf]]);
        L += c.face_signs[lf] * (sf.transpose() * ops.face_normal_moment[lf]);
      }
      // rotational part: int_P (Pi_nabla w).(x x cvec)
      for (int ii = 0; ii < 3; ++ii) {
        const Vec3 bxc = bP.cross(cvec);
        for (int a = 0; a < 4; ++a) {
          double w = bxc[ii] * ops.gram1(a, 0);
          for (int gdx = 1; gdx <= 3; ++gdx)
            w += h * Vec3(Vec3::Unit(gdx - 1)).cross(cvec)[ii] * ops.gram1(a, gdx);
          L += w * ops.pi_nabla.row(4 * ii + a);
        }
      }
      moments.row(4 * i + b) = L;
    }
  }
  Eigen::Matrix4d gram_lu = ops.gram1;
  const Eigen::PartialPivLU<Eigen::Matrix4d> lu(gram_lu);
  ops.pi_zero = Eigen::MatrixXd::Zero(12, n);
  for (int i = 0; i < 3; ++i)
    ops.pi_zero.middleRows(4 * i, 4) = lu.solve(moments.middleRows(4 * i, 4));

  // ---- DoFs of the polynomial basis fields m_a e_i ----
  ops.vel_poly_dofs = Eigen::MatrixXd::Zero(n, 12);
  for (int lv = 0; lv < nv; ++lv)
    for (int comp = 0; comp < 3; ++comp)
      for (int a = 0; a < 4; ++a)
        ops.vel_poly_dofs(3 * lv + comp, 4 * comp + a) =
            cell_monomial(geom.cell[cell], a, mesh.vertices[ops.verts[lv]]);
  for (int lf = 0; lf < nf; ++lf) {
    const FaceGeom& fg = geom.face[c.faces[lf]];
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a)
        ops.vel_poly_dofs(3 * nv + lf, 4 * i + a) =
            fg.frame.n[i] * cell_monomial(geom.cell[cell], a, fg.centroid);
  }

  // ---- face space: L2 projector from the exact divergence and face means ----
  ops.pi_face = Eigen::MatrixXd::Zero(3, nf);
  Eigen::RowVectorXd div_face = Eigen::RowVectorXd::Zero(nf);
  for (int lf = 0; lf < nf; ++lf)
    div_face(lf) = c.face_signs[lf] * geom.face[c.faces[lf]].area / vol;
  for (int i = 0; i < 3; ++i) {
    Eigen::RowVectorXd row = -ops.gram1(0, i + 1) * div_face;
    for (int lf = 0; lf < nf; ++lf) {
      const FaceGeom& fg = geom.face[c.faces[lf]];
      row(lf) += c.face_signs[lf] * fg.area * cell_monomial(geom.cell[cell], i + 1, fg.centroid);
    }
    ops.pi_face.row(i) = (h / vol) * row;
  }
  ops.face_const_dofs = Eigen::MatrixXd::Zero(nf, 3);
  for (int lf = 0; lf < nf; ++lf)
    ops.face_const_dofs.row(lf) = geom.face[c.faces[lf]].frame.n.transpose();

  // ---- curl map: stored-normal circulation per face ----
  ops.curl_local = Eigen::MatrixXd::Zero(nf, ne);
  for (int lf = 0; lf < nf; ++lf) {
    const Face& face = mesh.faces[c.faces[lf]];
    for (size_t q = 0; q < face.edges.size(); ++q)
      ops.curl_local(lf, edge_of_global[face.edges[q]]) +=
          face.edge_signs[q] * geom.edge[face.edges[q]].length / geom.face[c.faces[lf]].area;
  }

  // ---- edge space: L2 projector ----
  // int_P E.c = int_P curl E . phi - sum_F int_F (n_out x E).phi with
  // phi = c x x / 2; the volume term collapses to the constant projection of
  // curl E by the interior moment constraint, the face terms are evaluated
  // through the 2D curl_F decomposition of the rotated test field.
  std::vector<double> gn, gw;
  gauss_legendre_01(3, gn, gw);
  const Eigen::MatrixXd p0curl = ops.pi_face * ops.curl_local;  // 3 x ne
  ops.pi_edge = Eigen::MatrixXd::Zero(3, ne);
  for (int i = 0; i < 3; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    Eigen::RowVectorXd acc = 0.5 * vol * (ei.cross(bP)).transpose() * p0curl;
    for (int lf = 0; lf < nf; ++lf) {
      const int f = c.faces[lf];
      const Face& face = mesh.faces[f];
      const FaceGeom& fg = geom.face[f];
      const int sgn = c.face_signs[lf];
      // Outward right-handed frame.
      const Vec3 t1 = sgn > 0 ? fg.frame.t1 : fg.frame.t2;
      const Vec3 t2 = sgn > 0 ? fg.frame.t2 : fg.frame.t1;

      // phi(xi) = phi0 + xi1 w1 + xi2 w2; p = R^-1 (tangential part).
      const Vec3 phi0 = 0.5 * ei.cross(fg.centroid);
      const Vec3 w1 = 0.5 * ei.cross(t1), w2 = 0.5 * ei.cross(t2);
      const Eigen::Vector2d pbar(phi0.dot(t2), -phi0.dot(t1));
      Eigen::Matrix2d A2;
      A2 << w1.dot(t2), w2.dot(t2), -w1.dot(t1), -w2.dot(t1);
      const double divp = A2.trace();
      const Eigen::Matrix2d Abar = A2 - 0.5 * divp * Eigen::Matrix2d::Identity();
      // q with curl_F q = deviatoric part + constants: closed form.
      const double qa = Abar(0, 0), qb = Abar(0, 1), qc = Abar(1, 0);
      auto qfun = [&](const Eigen::Vector2d& xi) {
        return -0.5 * qc * xi.x() * xi.x() + qa * xi.x() * xi.y() + 0.5 * qb * xi.y() * xi.y() +
               pbar.x() * xi.y() - pbar.y() * xi.x();
      };
      // int_F q from the stored-frame second moments (swap under frame flip).
      const double hF2 = fg.diameter * fg.diameter;
      double S11 = hF2 * face_proj[f].p2_moments(3);
      const double S12 = hF2 * face_proj[f].p2_moments(4);
      double S22 = hF2 * face_proj[f].p2_moments(5);
      if (sgn < 0) std::swap(S11, S22);
      const double int_q = -0.5 * qc * S11 + qa * S12 + 0.5 * qb * S22;

      acc -= int_q * sgn * ops.curl_local.row(lf);  // rot_F E (outward) int_F q
      for (size_t qe = 0; qe < face.edges.size(); ++qe) {
        const int ge = face.edges[qe];
        const Vec3& a = mesh.vertices[mesh.edges[ge][0]];
        const Vec3& b = mesh.vertices[mesh.edges[ge][1]];
        double int_q_e = 0.0;
        for (size_t g = 0; g < gn.size(); ++g) {
          const Vec3 x = a + gn[g] * (b - a);
          const Vec3 d = x - fg.centroid;
          int_q_e += gw[g] * qfun(Eigen::Vector2d(d.dot(t1), d.dot(t2)));
        }
        int_q_e *= geom.edge[ge].length;
        acc += sgn * face.edge_signs[qe] * int_q_e * Eigen::RowVectorXd::Unit(ne, edge_of_global[ge]);
      }
    }
    ops.pi_edge.row(i) = acc / vol;
  }
  ops.edge_const_dofs = Eigen::MatrixXd::Zero(ne, 3);
  for (int le = 0; le < ne; ++le)
    ops.edge_const_dofs.row(le) = geom.edge[ops.edges[le]].tangent.transpose();

  // ---- stabilization scalings ----
  ops.s_a_scale = h;
  ops.s_m_scale = h * h * h;
  ops.s_edge_diag = Eigen::VectorXd::Zero(ne);
  for (int lf = 0; lf < nf; ++lf)
    for (int e : mesh.faces[c.faces[lf]].edges)
      ops.s_edge_diag(edge_of_global[e]) += h * h * geom.edge[e].length;
  ops.s_face_diag = Eigen::VectorXd::Zero(nf);
  for (int lf = 0; lf < nf; ++lf) ops.s_face_diag(lf) = h * geom.face[c.faces[lf]].area;

  return ops;
}

std::vector<ElementOperators> build_all_element_operators(const PolyMesh& mesh,
                                                          const MeshGeometry& geom, int threads) {
  std::vector<FaceNodalProjector> face_proj(mesh.n_faces());
  parallel_for(mesh.n_faces(), threads,
               [&](int f) { face_proj[f] = face_nodal_projector(mesh, geom, f); });
  std::vector<ElementOperators> ops(mesh.n_cells());
  parallel_for(mesh.n_cells(), threads,
               [&](int c) { ops[c] = build_element_operators(mesh, geom, c, face_proj); });
  return ops;
}

}  // namespace mhdvem
