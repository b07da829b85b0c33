// Degree-of-freedom layouts for the four discrete spaces, DoF interpolants,
// and the exact differential maps computable from DoFs alone: the cellwise
// divergence and the edge-to-face curl (Stokes circulation).
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mhdvem/geometry.hpp"
#include "mhdvem/mesh.hpp"

namespace mhdvem {

using ScalarField = std::function<double(const Vec3&)>;
using VectorField = std::function<Vec3(const Vec3&)>;

// Global numbering, entity-index order:
//   velocity (W_h): dof(vertex v, comp c) = 3*v + c; dof(face f) = 3*nv + f
//   pressure (Q_h): one dof per cell (zero mean imposed by a multiplier row)
//   edge (V_edge):  one dof per edge, tangential component along the stored
//                   edge orientation
//   face (V_face):  one dof per face, normal component along the stored face
//                   normal
struct DofLayout {
  long n_velocity = 0, n_pressure = 0, n_edge = 0, n_face = 0;
  std::vector<std::uint8_t> velocity_boundary, edge_boundary, face_boundary;

  long vdof(int v, int c) const { return 3l * v + c; }
  long fdof(int nv, int f) const { return 3l * nv + f; }

  static DofLayout build(const PolyMesh& mesh, const BoundaryTags& tags);
};

Eigen::VectorXd interpolate_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                                     const VectorField& u);
Eigen::VectorXd interpolate_edge(const PolyMesh& mesh, const MeshGeometry& geom,
                                 const VectorField& E);
Eigen::VectorXd interpolate_face(const PolyMesh& mesh, const MeshGeometry& geom,
                                 const VectorField& B);
Eigen::VectorXd interpolate_pressure(const PolyMesh& mesh, const MeshGeometry& geom,
                                     const ScalarField& p);

// Cellwise constant divergence, exact from the DoFs (no quadrature).
double divergence_from_dofs_velocity(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                     const Eigen::VectorXd& u);
double divergence_from_dofs_face(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                 const Eigen::VectorXd& B);

// Per face, (curl E).n_F = |F|^-1 sum_{e in dF} sigma_{F,e} h_e E_e.
Eigen::VectorXd curl_edge_to_face(const PolyMesh& mesh, const MeshGeometry& geom,
                                  const Eigen::VectorXd& E);

// L2 norm over the mesh of the piecewise-constant divergence of a field.
double divergence_l2_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                              const Eigen::VectorXd& u);
double divergence_l2_face(const PolyMesh& mesh, const MeshGeometry& geom,
                          const Eigen::VectorXd& B);

}  // namespace mhdvem
