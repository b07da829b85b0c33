// Dense brute-force oracle for the elemental projectors: solves the local
// constrained-minimization problems that define the virtual functions on a
// fine P2 tetrahedral submesh of one cell, then evaluates every projector
// and form matrix by dense quadrature. Shares only mesh/geometry types with
// the library; all functionals compared against the library are pinned
// exactly by the trace and moment constraints, so the comparison is at
// solver precision rather than FEM accuracy.
#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mhdvem/geometry.hpp"
#include "mhdvem/mesh.hpp"

namespace oracle {

using mhdvem::Vec3;

// All oracle-computed elemental matrices for one cell, in the library's
// local dof ordering and coefficient conventions.
struct CellOracle {
  // velocity space
  Eigen::MatrixXd pi_nabla;  // 12 x n
  Eigen::MatrixXd pi_zero;   // 12 x n
  Eigen::MatrixXd pi_grad;   // 9 x n
  std::vector<Eigen::MatrixXd> face_vec_moment;     // per local face, 3 x n
  std::vector<Eigen::MatrixXd> face_normal_moment;  // per local face, 6 x n
  Eigen::MatrixXd A, M;      // n x n forms

  // edge space
  Eigen::MatrixXd pi_edge;  // 3 x ne
  Eigen::MatrixXd Medge;    // ne x ne

  // face space
  Eigen::MatrixXd pi_face;  // 3 x nf
  Eigen::MatrixXd Mface;    // nf x nf
  Eigen::MatrixXd Curl;     // nf x ne
};

// subdivisions: cells per direction of the structured submesh (cube) or
// red-refinement levels (tetrahedron); the cell must be a cube or a tet.
CellOracle compute_cell_oracle(const mhdvem::PolyMesh& mesh, const mhdvem::MeshGeometry& geom,
                               int cell, int subdivisions);

double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace oracle
