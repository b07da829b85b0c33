// Elemental matrices of the scheme: the H1 and L2 velocity forms with their
// stabilizations, the exact divergence pairing, the edge/face discrete inner
// products, the curl coupling, the skew-symmetric advection matrix of a
// lagged velocity, and the Lorentz/Ohm coupling blocks of a lagged magnetic
// field.
#pragma once

#include <Eigen/Dense>

#include "mhdvem/projectors.hpp"
#include "mhdvem/spaces.hpp"

namespace mhdvem {

struct LocalForms {
  Eigen::MatrixXd A;        // n x n, a_h^P
  Eigen::MatrixXd M;        // n x n, m_h^P
  Eigen::MatrixXd Medge;    // ne x ne
  Eigen::MatrixXd Mface;    // nf x nf
  Eigen::MatrixXd Curl;     // nf x ne, [C, curl E]_{face,P}
  Eigen::RowVectorXd Bdiv;  // 1 x n, b^P(v, 1) = -(div v, 1)_P
};

LocalForms local_bilinear_forms(const ElementOperators& ops);

// Matrix of the skew form c~_h(ubar; u, w) over (w-test, u-trial) local
// velocity DoFs; exact Gram integration of the P0*P1*P1 integrand.
Eigen::MatrixXd local_advection(const ElementOperators& ops, const Eigen::VectorXd& ubar_local);

// chi_h(v, Bbar) = Pi0 v x Pi0 Bbar is cellwise constant, so every coupling
// in which it appears reduces to an exact volume product.
struct LorentzBlocks {
  Eigen::MatrixXd vE;  // n x ne,  <E, chi(v, Bbar)>
  Eigen::MatrixXd vu;  // n x n,   <chi(u, Bbar), chi(v, Bbar)>
  Eigen::MatrixXd Fu;  // ne x n,  <chi(u, Bbar), F>
};

LorentzBlocks local_lorentz(const ElementOperators& ops, const Eigen::VectorXd& Bbar_local);

// Load vectors (f, Pi0_1 v)_P and (g, Pi0_0 F)_P by degree-4 quadrature.
Eigen::VectorXd load_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                              const ElementOperators& ops, const VectorField& f);
Eigen::VectorXd load_edge(const PolyMesh& mesh, const MeshGeometry& geom,
                          const ElementOperators& ops, const VectorField& g);

}  // namespace mhdvem
