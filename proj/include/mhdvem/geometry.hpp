// Metric quantities, face frames, scaled monomial bases, and quadrature on
// polygons and polyhedra (centroid fan subdivision, exact up to degree 4).
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mhdvem/mesh.hpp"

namespace mhdvem {

struct FaceFrame {
  Vec3 origin;  // face centroid b_F
  Vec3 t1, t2;  // orthonormal in-plane directions, t1 along the first edge
  Vec3 n;       // unit normal = t1 x t2, matching the stored face orientation

  Vec3 to3d(double xi1, double xi2) const { return origin + xi1 * t1 + xi2 * t2; }
  Eigen::Vector2d to2d(const Vec3& x) const {
    const Vec3 d = x - origin;
    return {d.dot(t1), d.dot(t2)};
  }
};

struct EdgeGeom {
  double length;
  Vec3 midpoint;
  Vec3 tangent;  // unit, along the stored orientation
};

struct FaceGeom {
  double area;
  double diameter;
  Vec3 centroid;
  FaceFrame frame;
};

struct CellGeom {
  double volume;
  double diameter;
  Vec3 centroid;
};

struct MeshGeometry {
  std::vector<EdgeGeom> edge;
  std::vector<FaceGeom> face;
  std::vector<CellGeom> cell;
  double h = 0.0;  // max cell diameter

  static MeshGeometry compute(const PolyMesh& mesh);
};

struct Quadrature {
  std::vector<Vec3> points;
  std::vector<double> weights;
  bool signed_fallback = false;  // inverted fan simplices were kept with signs

  double integrate(const std::vector<double>& values) const;
  template <typename F>
  double apply(F&& f) const {
    double s = 0.0;
    for (size_t i = 0; i < points.size(); ++i) s += weights[i] * f(points[i]);
    return s;
  }
};

// Gauss-Legendre nodes/weights on [0,1]; exact up to degree 2*npts-1.
void gauss_legendre_01(int npts, std::vector<double>& nodes, std::vector<double>& weights);

Quadrature face_quadrature(const PolyMesh& mesh, const MeshGeometry& geom, int f, int degree);
Quadrature cell_quadrature(const PolyMesh& mesh, const MeshGeometry& geom, int c, int degree);

// Scaled monomials m_0 = 1, m_i = (x_i - b_i)/h. For cells the basis has 4
// (degree 1) or 10 (degree 2) members; faces use in-plane coordinates with 3
// or 6 members.
int n_cell_monomials(int degree);
int n_face_monomials(int degree);
double cell_monomial(const CellGeom& cg, int a, const Vec3& x);
double face_monomial(const FaceGeom& fg, int a, const Eigen::Vector2d& xi);

// Gram matrices of the scaled monomial bases.
Eigen::MatrixXd monomial_gram_cell(const PolyMesh& mesh, const MeshGeometry& geom, int c,
                                   int degree);
Eigen::MatrixXd monomial_gram_face(const PolyMesh& mesh, const MeshGeometry& geom, int f,
                                   int degree);

// Volume by fan tetrahedralization, kept as an independent cross-check of the
// divergence-theorem volume.
double cell_volume_by_fan(const PolyMesh& mesh, const MeshGeometry& geom, int c);

}  // namespace mhdvem
