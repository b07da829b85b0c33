#include "mhdvem/spaces.hpp"

#include <cmath>

namespace mhdvem {

DofLayout DofLayout::build(const PolyMesh& mesh, const BoundaryTags& tags) {
  DofLayout L;
  const int nv = mesh.n_vertices(), nf = mesh.n_faces();
  L.n_velocity = 3l * nv + nf;
  L.n_pressure = mesh.n_cells();
  L.n_edge = mesh.n_edges();
  L.n_face = nf;

  L.velocity_boundary.assign(L.n_velocity, 0);
  for (int v = 0; v < nv; ++v)
    if (tags.vertex_mask[v])
      for (int c = 0; c < 3; ++c) L.velocity_boundary[3l * v + c] = 1;
  for (int f = 0; f < nf; ++f)
    if (tags.face_mask[f]) L.velocity_boundary[3l * nv + f] = 1;

  L.edge_boundary = tags.edge_mask;
  L.face_boundary = tags.face_mask;
  return L;
}

Eigen::VectorXd interpolate_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                                     const VectorField& u) {
  const int nv = mesh.n_vertices(), nf = mesh.n_faces();
  Eigen::VectorXd dofs(3l * nv + nf);
  for (int v = 0; v < nv; ++v) dofs.segment<3>(3l * v) = u(mesh.vertices[v]);
  for (int f = 0; f < nf; ++f) {
    const Quadrature quad = face_quadrature(mesh, geom, f, 4);
    const Vec3 n = geom.face[f].frame.n;
    dofs[3l * nv + f] = quad.apply([&](const Vec3& x) { return u(x).dot(n); }) / geom.face[f].area;
  }
  return dofs;
}

Eigen::VectorXd interpolate_edge(const PolyMesh& mesh, const MeshGeometry& geom,
                                 const VectorField& E) {
  std::vector<double> gn, gw;
  gauss_legendre_01(3, gn, gw);
  Eigen::VectorXd dofs(mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec3& a = mesh.vertices[mesh.edges[e][0]];
    const Vec3& b = mesh.vertices[mesh.edges[e][1]];
    const Vec3 t = geom.edge[e].tangent;
    double v = 0.0;
    for (size_t q = 0; q < gn.size(); ++q) v += gw[q] * E(a + gn[q] * (b - a)).dot(t);
    dofs[e] = v;  // edge average of E.t
  }
  return dofs;
}

Eigen::VectorXd interpolate_face(const PolyMesh& mesh, const MeshGeometry& geom,
                                 const VectorField& B) {
  Eigen::VectorXd dofs(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Quadrature quad = face_quadrature(mesh, geom, f, 4);
    const Vec3 n = geom.face[f].frame.n;
    dofs[f] = quad.apply([&](const Vec3& x) { return B(x).dot(n); }) / geom.face[f].area;
  }
  return dofs;
}

Eigen::VectorXd interpolate_pressure(const PolyMesh& mesh, const MeshGeometry& geom,
                                     const ScalarField& p) {
  Eigen::VectorXd dofs(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Quadrature quad = cell_quadrature(mesh, geom, c, 4);
    dofs[c] = quad.apply(p) / geom.cell[c].volume;
  }
  return dofs;
}

double divergence_from_dofs_velocity(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                     const Eigen::VectorXd& u) {
  const Cell& c = mesh.cells[cell];
  const long off = 3l * mesh.n_vertices();
  double flux = 0.0;
  for (size_t i = 0; i < c.faces.size(); ++i)
    flux += c.face_signs[i] * geom.face[c.faces[i]].area * u[off + c.faces[i]];
  return flux / geom.cell[cell].volume;
}

double divergence_from_dofs_face(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                                 const Eigen::VectorXd& B) {
  const Cell& c = mesh.cells[cell];
  double flux = 0.0;
  for (size_t i = 0; i < c.faces.size(); ++i)
    flux += c.face_signs[i] * geom.face[c.faces[i]].area * B[c.faces[i]];
  return flux / geom.cell[cell].volume;
}

Eigen::VectorXd curl_edge_to_face(const PolyMesh& mesh, const MeshGeometry& geom,
                                  const Eigen::VectorXd& E) {
  Eigen::VectorXd dofs(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    double circ = 0.0;
    for (size_t i = 0; i < face.edges.size(); ++i)
      circ += face.edge_signs[i] * geom.edge[face.edges[i]].length * E[face.edges[i]];
    dofs[f] = circ / geom.face[f].area;
  }
  return dofs;
}

namespace {

template <typename DivFn>
double divergence_l2(const PolyMesh& mesh, const MeshGeometry& geom, DivFn&& div) {
  double s = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double d = div(c);
    s += geom.cell[c].volume * d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double divergence_l2_velocity(const PolyMesh& mesh, const MeshGeometry& geom,
                              const Eigen::VectorXd& u) {
  return divergence_l2(mesh, geom,
                       [&](int c) { return divergence_from_dofs_velocity(mesh, geom, c, u); });
}

double divergence_l2_face(const PolyMesh& mesh, const MeshGeometry& geom,
                          const Eigen::VectorXd& B) {
  return divergence_l2(mesh, geom,
                       [&](int c) { return divergence_from_dofs_face(mesh, geom, c, B); });
}

}  // namespace mhdvem
