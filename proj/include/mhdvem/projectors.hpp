// Computable per-cell projection and stabilization operators for the four
// discrete spaces: the elliptic and L2 projectors of the nodal velocity
// space, the L2 projectors of the edge and face spaces, and the dofi-dofi
// stabilization scalings. Everything is assembled from degrees of freedom by
// integration by parts; no virtual basis function is ever represented.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mhdvem/geometry.hpp"
#include "mhdvem/mesh.hpp"

namespace mhdvem {

// Per-face scalar machinery shared by every velocity component: the face
// elliptic projector (vertex trace -> P1 coefficients in the stored frame)
// and the P1 x P2 scaled-monomial cross Gram used to evaluate enhanced
// moments.
struct FaceNodalProjector {
  Eigen::MatrixXd nodal;       // 3 x nv_F
  Eigen::MatrixXd cross_gram;  // 3 x 6, int_F m_a m_j
  Eigen::VectorXd p2_moments;  // 6, int_F m_j
};

FaceNodalProjector face_nodal_projector(const PolyMesh& mesh, const MeshGeometry& geom, int f);

// All projector/stabilization data of one cell. Velocity polynomial
// coefficients are indexed 4*i + a (component i, scaled monomial a);
// gradient means are indexed 3*i + j (mean of d_j w_i).
struct ElementOperators {
  int cell = -1;
  std::vector<int> verts, edges, faces;  // local -> global entity ids
  std::vector<int> face_signs;

  double volume = 0, h = 0;
  Vec3 centroid = Vec3::Zero();
  Eigen::Matrix4d gram1;  // int_P m_a m_b, degree-1 basis

  // velocity space
  Eigen::MatrixXd pi_nabla;                       // 12 x n
  Eigen::MatrixXd pi_zero;                        // 12 x n
  Eigen::MatrixXd pi_grad;                        // 9 x n
  Eigen::MatrixXd vel_poly_dofs;                  // n x 12
  Eigen::RowVectorXd div_row;                     // 1 x n, cellwise div
  std::vector<Eigen::MatrixXd> face_vec_moment;   // per local face: 3 x n
  std::vector<Eigen::MatrixXd> face_normal_moment;  // per local face: 6 x n

  // edge and face spaces
  Eigen::MatrixXd pi_edge;          // 3 x ne
  Eigen::MatrixXd edge_const_dofs;  // ne x 3
  Eigen::MatrixXd pi_face;          // 3 x nf
  Eigen::MatrixXd face_const_dofs;  // nf x 3
  Eigen::MatrixXd curl_local;       // nf x ne, stored-normal curl circulation

  // dofi-dofi stabilization scalings
  double s_a_scale = 0, s_m_scale = 0;  // h_P and h_P^3
  Eigen::VectorXd s_edge_diag;          // per local edge
  Eigen::VectorXd s_face_diag;          // per local face

  int n_vel_dofs() const { return 3 * static_cast<int>(verts.size()) + static_cast<int>(faces.size()); }
  int n_edge_dofs() const { return static_cast<int>(edges.size()); }
  int n_face_dofs() const { return static_cast<int>(faces.size()); }

  // Velocity mean rows (constant L2 projection), a view into pi_zero.
  Eigen::MatrixXd vel_mean() const;
};

ElementOperators build_element_operators(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                         const std::vector<FaceNodalProjector>& face_proj);

std::vector<ElementOperators> build_all_element_operators(const PolyMesh& mesh,
                                                          const MeshGeometry& geom, int threads);

}  // namespace mhdvem
