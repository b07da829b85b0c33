#include "mhdvem/geometry.hpp"

#include <cmath>
#include <sstream>

#include "mhdvem/errors.hpp"

namespace mhdvem {

namespace {

Vec3 newell_normal(const PolyMesh& mesh, const Face& face) {
  Vec3 n = Vec3::Zero();
  const int k = static_cast<int>(face.verts.size());
  for (int i = 0; i < k; ++i)
    n += mesh.vertices[face.verts[i]].cross(mesh.vertices[face.verts[(i + 1) % k]]);
  return n;
}

double max_pairwise_distance(const std::vector<Vec3>& pts) {
  double d = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
  return d;
}

}  // namespace

void gauss_legendre_01(int npts, std::vector<double>& nodes, std::vector<double>& weights) {
  // Nodes/weights on [-1,1], mapped to [0,1].
  static const double n2 = 0.57735026918962576451;
  static const double n3 = 0.77459666924148337704;
  static const double n4a = 0.33998104358485626480, n4b = 0.86113631159405257522;
  static const double w4a = 0.65214515486254614263, w4b = 0.34785484513745385737;
  static const double n5a = 0.53846931010568309104, n5b = 0.90617984593866399280;
  static const double w5a = 0.47862867049936646804, w5b = 0.23692688505618908751;
  static const double w5c = 0.56888888888888888889;
  std::vector<double> x, w;
  switch (npts) {
    case 1: x = {0.0}; w = {2.0}; break;
    case 2: x = {-n2, n2}; w = {1.0, 1.0}; break;
    case 3: x = {-n3, 0.0, n3}; w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}; break;
    case 4: x = {-n4b, -n4a, n4a, n4b}; w = {w4b, w4a, w4a, w4b}; break;
    case 5: x = {-n5b, -n5a, 0.0, n5a, n5b}; w = {w5b, w5a, w5c, w5a, w5b}; break;
    default: throw ConfigError("gauss_legendre_01: unsupported point count");
  }
  nodes.resize(npts);
  weights.resize(npts);
  for (int i = 0; i < npts; ++i) {
    nodes[i] = 0.5 * (x[i] + 1.0);
    weights[i] = 0.5 * w[i];
  }
}

MeshGeometry MeshGeometry::compute(const PolyMesh& mesh) {
  MeshGeometry g;
  g.edge.resize(mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec3& a = mesh.vertices[mesh.edges[e][0]];
    const Vec3& b = mesh.vertices[mesh.edges[e][1]];
    g.edge[e].length = (b - a).norm();
    if (g.edge[e].length <= 0) {
      std::ostringstream os;
      os << "degenerate zero-length edge " << e;
      throw MeshError(os.str());
    }
    g.edge[e].midpoint = 0.5 * (a + b);
    g.edge[e].tangent = (b - a) / g.edge[e].length;
  }

  g.face.resize(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    FaceGeom& fg = g.face[f];
    Vec3 n = newell_normal(mesh, face);
    const double area2 = n.norm();
    if (area2 <= 0) {
      std::ostringstream os;
      os << "degenerate zero-area face " << f;
      throw MeshError(os.str());
    }
    n /= area2;

    // In-plane fan from the vertex mean: exact area and centroid of the
    // polygon projected onto its least-squares plane.
    Vec3 vm = Vec3::Zero();
    for (int v : face.verts) vm += mesh.vertices[v];
    vm /= static_cast<double>(face.verts.size());
    const int k = static_cast<int>(face.verts.size());
    double area = 0.0;
    Vec3 centroid = Vec3::Zero();
    for (int i = 0; i < k; ++i) {
      const Vec3 a = mesh.vertices[face.verts[i]] - vm;
      const Vec3 b = mesh.vertices[face.verts[(i + 1) % k]] - vm;
      const Vec3 ap = a - a.dot(n) * n, bp = b - b.dot(n) * n;
      const double at = 0.5 * ap.cross(bp).dot(n);
      area += at;
      centroid += at * (ap + bp) / 3.0;
    }
    if (area <= 0) {
      std::ostringstream os;
      os << "degenerate or inverted face " << f;
      throw MeshError(os.str());
    }
    fg.area = area;
    fg.centroid = vm + centroid / area;
    std::vector<Vec3> pts;
    for (int v : face.verts) pts.push_back(mesh.vertices[v]);
    fg.diameter = max_pairwise_distance(pts);

    Vec3 t1 = mesh.vertices[face.verts[1]] - mesh.vertices[face.verts[0]];
    t1 -= t1.dot(n) * n;
    fg.frame.origin = fg.centroid;
    fg.frame.t1 = t1.normalized();
    fg.frame.n = n;
    fg.frame.t2 = n.cross(fg.frame.t1);
  }

  g.cell.resize(mesh.n_cells());
  g.h = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Cell& cell = mesh.cells[c];
    CellGeom& cg = g.cell[c];
    double vol = 0.0;
    for (size_t i = 0; i < cell.faces.size(); ++i) {
      const FaceGeom& fg = g.face[cell.faces[i]];
      vol += cell.face_signs[i] * fg.area * fg.centroid.dot(fg.frame.n) / 3.0;
    }
    if (vol <= 0) {
      std::ostringstream os;
      os << "cell with non-positive divergence-theorem volume " << c;
      throw MeshError(os.str());
    }
    cg.volume = vol;

    // Centroid from the signed fan tetrahedralization about the vertex mean.
    std::vector<int> cv;
    for (int f : cell.faces)
      for (int v : mesh.faces[f].verts) cv.push_back(v);
    std::sort(cv.begin(), cv.end());
    cv.erase(std::unique(cv.begin(), cv.end()), cv.end());
    Vec3 apex = Vec3::Zero();
    for (int v : cv) apex += mesh.vertices[v];
    apex /= static_cast<double>(cv.size());

    Vec3 moment = Vec3::Zero();
    double fanvol = 0.0;
    for (size_t i = 0; i < cell.faces.size(); ++i) {
      const Face& face = mesh.faces[cell.faces[i]];
      const FaceGeom& fg = g.face[cell.faces[i]];
      const int sgn = cell.face_signs[i];
      const int k = static_cast<int>(face.verts.size());
      for (int q = 0; q < k; ++q) {
        const Vec3& p0 = mesh.vertices[face.verts[q]];
        const Vec3& p1 = mesh.vertices[face.verts[(q + 1) % k]];
        const double vt =
            sgn * (fg.centroid - apex).cross(p0 - apex).dot(p1 - apex) / 6.0;
        fanvol += vt;
        moment += vt * (apex + fg.centroid + p0 + p1) / 4.0;
      }
    }
    cg.centroid = moment / fanvol;

    std::vector<Vec3> pts;
    for (int v : cv) pts.push_back(mesh.vertices[v]);
    cg.diameter = max_pairwise_distance(pts);
    g.h = std::max(g.h, cg.diameter);
  }
  return g;
}

double cell_volume_by_fan(const PolyMesh& mesh, const MeshGeometry& geom, int c) {
  const Cell& cell = mesh.cells[c];
  const Vec3 apex = geom.cell[c].centroid;
  double vol = 0.0;
  for (size_t i = 0; i < cell.faces.size(); ++i) {
    const Face& face = mesh.faces[cell.faces[i]];
    const Vec3 bf = geom.face[cell.faces[i]].centroid;
    const int sgn = cell.face_signs[i];
    const int k = static_cast<int>(face.verts.size());
    for (int q = 0; q < k; ++q) {
      const Vec3& p0 = mesh.vertices[face.verts[q]];
      const Vec3& p1 = mesh.vertices[face.verts[(q + 1) % k]];
      vol += sgn * (bf - apex).cross(p0 - apex).dot(p1 - apex) / 6.0;
    }
  }
  return vol;
}

double Quadrature::integrate(const std::vector<double>& values) const {
  double s = 0.0;
  for (size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
  return s;
}

namespace {

// Duffy-collapsed tensor Gauss rule on the triangle (q0,q1,q2); the weight
// carries the doubled signed area so inverted fan triangles integrate with
// their sign.
void append_triangle_rule(const Vec3& q0, const Vec3& q1, const Vec3& q2, double signed_area2,
                          int degree, Quadrature& quad) {
  const int k = (degree + 3) / 2;  // 2k-1 >= degree+1
  std::vector<double> xa, wa;
  gauss_legendre_01(k, xa, wa);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double a = xa[i], b = xa[j];
      const double u = a, v = b * (1.0 - a);
      quad.points.push_back(q0 + u * (q1 - q0) + v * (q2 - q0));
      quad.weights.push_back(wa[i] * wa[j] * (1.0 - a) * signed_area2);
    }
}

void append_tet_rule(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3,
                     double signed_vol6, int degree, Quadrature& quad) {
  const int k = (degree + 4) / 2;  // 2k-1 >= degree+2
  std::vector<double> xa, wa;
  gauss_legendre_01(k, xa, wa);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) {
        const double a = xa[i], b = xa[j], c = xa[l];
        const double u = a, v = b * (1.0 - a), w = c * (1.0 - a) * (1.0 - b);
        quad.points.push_back(q0 + u * (q1 - q0) + v * (q2 - q0) + w * (q3 - q0));
        quad.weights.push_back(wa[i] * wa[j] * wa[l] * (1.0 - a) * (1.0 - a) * (1.0 - b) *
                               signed_vol6);
      }
}

}  // namespace

Quadrature face_quadrature(const PolyMesh& mesh, const MeshGeometry& geom, int f, int degree) {
  if (degree > 4) throw ConfigError("face_quadrature: degree > 4 unsupported");
  const Face& face = mesh.faces[f];
  const FaceGeom& fg = geom.face[f];
  Quadrature quad;
  const int k = static_cast<int>(face.verts.size());
  for (int i = 0; i < k; ++i) {
    const Vec3& p0 = mesh.vertices[face.verts[i]];
    const Vec3& p1 = mesh.vertices[face.verts[(i + 1) % k]];
    const double sa2 = (p0 - fg.centroid).cross(p1 - fg.centroid).dot(fg.frame.n);
    if (sa2 <= 0) quad.signed_fallback = true;
    append_triangle_rule(fg.centroid, p0, p1, sa2, degree, quad);
  }
  return quad;
}

Quadrature cell_quadrature(const PolyMesh& mesh, const MeshGeometry& geom, int c, int degree) {
  if (degree > 4) throw ConfigError("cell_quadrature: degree > 4 unsupported");
  const Cell& cell = mesh.cells[c];
  const Vec3 apex = geom.cell[c].centroid;
  Quadrature quad;
  for (size_t i = 0; i < cell.faces.size(); ++i) {
    const Face& face = mesh.faces[cell.faces[i]];
    const Vec3 bf = geom.face[cell.faces[i]].centroid;
    const int sgn = cell.face_signs[i];
    const int k = static_cast<int>(face.verts.size());
    for (int q = 0; q < k; ++q) {
      const Vec3& p0 = mesh.vertices[face.verts[q]];
      const Vec3& p1 = mesh.vertices[face.verts[(q + 1) % k]];
      const double sv6 = sgn * (bf - apex).cross(p0 - apex).dot(p1 - apex);
      if (sv6 <= 0) quad.signed_fallback = true;
      append_tet_rule(apex, bf, p0, p1, sv6, degree, quad);
    }
  }
  return quad;
}

int n_cell_monomials(int degree) { return degree == 0 ? 1 : (degree == 1 ? 4 : 10); }
int n_face_monomials(int degree) { return degree == 0 ? 1 : (degree == 1 ? 3 : 6); }

double cell_monomial(const CellGeom& cg, int a, const Vec3& x) {
  const Vec3 m = (x - cg.centroid) / cg.diameter;
  switch (a) {
    case 0: return 1.0;
    case 1: return m.x();
    case 2: return m.y();
    case 3: return m.z();
    case 4: return m.x() * m.x();
    case 5: return m.x() * m.y();
    case 6: return m.x() * m.z();
    case 7: return m.y() * m.y();
    case 8: return m.y() * m.z();
    case 9: return m.z() * m.z();
    default: throw ConfigError("cell_monomial: index out of range");
  }
}

double face_monomial(const FaceGeom& fg, int a, const Eigen::Vector2d& xi) {
  const double u = xi.x() / fg.diameter, v = xi.y() / fg.diameter;
  switch (a) {
    case 0: return 1.0;
    case 1: return u;
    case 2: return v;
    case 3: return u * u;
    case 4: return u * v;
    case 5: return v * v;
    default: throw ConfigError("face_monomial: index out of range");
  }
}

Eigen::MatrixXd monomial_gram_cell(const PolyMesh& mesh, const MeshGeometry& geom, int c,
                                   int degree) {
  const int nm = n_cell_monomials(degree);
  const Quadrature quad = cell_quadrature(mesh, geom, c, 2 * degree);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nm, nm);
  Eigen::VectorXd m(nm);
  for (size_t q = 0; q < quad.points.size(); ++q) {
    for (int a = 0; a < nm; ++a) m[a] = cell_monomial(geom.cell[c], a, quad.points[q]);
    G += quad.weights[q] * m * m.transpose();
  }
  return G;
}

Eigen::MatrixXd monomial_gram_face(const PolyMesh& mesh, const MeshGeometry& geom, int f,
                                   int degree) {
  const int nm = n_face_monomials(degree);
  const Quadrature quad = face_quadrature(mesh, geom, f, 2 * degree);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nm, nm);
  Eigen::VectorXd m(nm);
  for (size_t q = 0; q < quad.points.size(); ++q) {
    const Eigen::Vector2d xi = geom.face[f].frame.to2d(quad.points[q]);
    for (int a = 0; a < nm; ++a) m[a] = face_monomial(geom.face[f], a, xi);
    G += quad.weights[q] * m * m.transpose();
  }
  return G;
}

}  // namespace mhdvem
