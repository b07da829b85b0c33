#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace oracle {

using mhdvem::Face;
using mhdvem::FaceGeom;
using mhdvem::MeshGeometry;
using mhdvem::PolyMesh;

namespace {

// ---------------------------------------------------------------------------
// quadrature (self-contained copies)
// ---------------------------------------------------------------------------

void gauss01(int k, std::vector<double>& x, std::vector<double>& w) {
  switch (k) {
    case 2:
      x = {0.5 - 0.5 * 0.57735026918962576451, 0.5 + 0.5 * 0.57735026918962576451};
      w = {0.5, 0.5};
      return;
    case 3:
      x = {0.5 - 0.5 * 0.77459666924148337704, 0.5, 0.5 + 0.5 * 0.77459666924148337704};
      w = {2.5 / 9.0, 4.0 / 9.0, 2.5 / 9.0};
      return;
    case 4: {
      const double a = 0.33998104358485626480, b = 0.86113631159405257522;
      const double wa = 0.65214515486254614263, wb = 0.34785484513745385737;
      x = {0.5 - 0.5 * b, 0.5 - 0.5 * a, 0.5 + 0.5 * a, 0.5 + 0.5 * b};
      w = {0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb};
      return;
    }
    default: throw std::runtime_error("oracle gauss01: unsupported order");
  }
}

struct QP3 {
  Vec3 x;
  double w;
  std::array<double, 4> lambda;
};

// Duffy rule on the tet (q0..q3), exact to degree 5 with k = 4.
std::vector<QP3> tet_rule(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3) {
  std::vector<double> x, w;
  gauss01(4, x, w);
  const double vol6 = (q1 - q0).cross(q2 - q0).dot(q3 - q0);
  std::vector<QP3> out;
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j)
      for (size_t l = 0; l < x.size(); ++l) {
        const double a = x[i], b = x[j], c = x[l];
        const double u = a, v = b * (1 - a), t = c * (1 - a) * (1 - b);
        QP3 qp;
        qp.lambda = {1 - u - v - t, u, v, t};
        qp.x = q0 * qp.lambda[0] + q1 * qp.lambda[1] + q2 * qp.lambda[2] + q3 * qp.lambda[3];
        qp.w = w[i] * w[j] * w[l] * (1 - a) * (1 - a) * (1 - b) * vol6;
        out.push_back(qp);
      }
  return out;
}

struct QP2 {
  Vec3 x;
  double w;
  std::array<double, 3> lambda;
};

std::vector<QP2> tri_rule(const Vec3& q0, const Vec3& q1, const Vec3& q2) {
  std::vector<double> x, w;
  gauss01(4, x, w);
  const double area2 = (q1 - q0).cross(q2 - q0).norm();
  std::vector<QP2> out;
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j) {
      const double a = x[i], b = x[j];
      const double u = a, v = b * (1 - a);
      QP2 qp;
      qp.lambda = {1 - u - v, u, v};
      qp.x = q0 * qp.lambda[0] + q1 * qp.lambda[1] + q2 * qp.lambda[2];
      qp.w = w[i] * w[j] * (1 - a) * area2;
      out.push_back(qp);
    }
  return out;
}

// ---------------------------------------------------------------------------
// P2 submesh of one cell
// ---------------------------------------------------------------------------

struct Submesh {
  std::vector<Vec3> nodes;                    // P2 nodes
  std::vector<std::array<int, 10>> tets;      // 4 corners + 6 edge nodes (01,02,03,12,13,23)
  std::vector<std::array<Vec3, 4>> tet_corners;
  struct BTri {
    std::array<int, 6> nodes;  // 3 corners + midside (01,12,20)
    std::array<Vec3, 3> corners;
    int parent;                // local face index in the cell
  };
  std::vector<BTri> btris;
};

// P2 shape values and gradients on a tet at barycentric lambda.
void p2_tet_shapes(const std::array<Vec3, 4>& q, const std::array<double, 4>& la, double N[10],
                   Vec3 gradN[10]) {
  Eigen::Matrix3d J;
  J << q[1] - q[0], q[2] - q[0], q[3] - q[0];
  const Eigen::Matrix3d Jinv = J.inverse();
  Vec3 gl[4];
  gl[1] = Jinv.row(0);
  gl[2] = Jinv.row(1);
  gl[3] = Jinv.row(2);
  gl[0] = -gl[1] - gl[2] - gl[3];
  for (int i = 0; i < 4; ++i) {
    N[i] = la[i] * (2 * la[i] - 1);
    gradN[i] = (4 * la[i] - 1) * gl[i];
  }
  static const int ep[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int e = 0; e < 6; ++e) {
    N[4 + e] = 4 * la[ep[e][0]] * la[ep[e][1]];
    gradN[4 + e] = 4 * (la[ep[e][0]] * gl[ep[e][1]] + la[ep[e][1]] * gl[ep[e][0]]);
  }
}

void p2_tri_shapes(const std::array<double, 3>& la, double N[6]) {
  for (int i = 0; i < 3; ++i) N[i] = la[i] * (2 * la[i] - 1);
  static const int ep[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int e = 0; e < 3; ++e) N[3 + e] = 4 * la[ep[e][0]] * la[ep[e][1]];
}

// In-plane gradients of the P2 triangle shapes (triangle embedded in 3D).
void p2_tri_gradients(const std::array<Vec3, 3>& q, const std::array<double, 3>& la,
                      Vec3 gradN[6]) {
  const Vec3 n = (q[1] - q[0]).cross(q[2] - q[0]);
  const double a2 = n.norm();
  const Vec3 nn = n / a2;
  // grad lambda_i = (edge opposite i rotated into the plane) / (2 area)
  Vec3 gl[3];
  gl[0] = nn.cross(q[2] - q[1]) / a2;
  gl[1] = nn.cross(q[0] - q[2]) / a2;
  gl[2] = nn.cross(q[1] - q[0]) / a2;
  for (int i = 0; i < 3; ++i) gradN[i] = (4 * la[i] - 1) * gl[i];
  static const int ep[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int e = 0; e < 3; ++e)
    gradN[3 + e] = 4 * (la[ep[e][0]] * gl[ep[e][1]] + la[ep[e][1]] * gl[ep[e][0]]);
}

class NodeBank {
 public:
  int vertex(const Vec3& x) {
    const auto key = std::array<long, 3>{llround(x.x() * 1e12), llround(x.y() * 1e12),
                                         llround(x.z() * 1e12)};
    auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(x);
    ids_.emplace(key, id);
    return id;
  }
  std::vector<Vec3> nodes;

 private:
  std::map<std::array<long, 3>, int> ids_;
};

void append_tet(NodeBank& bank, Submesh& sub, const std::array<Vec3, 4>& q) {
  std::array<int, 10> ids;
  for (int i = 0; i < 4; ++i) ids[i] = bank.vertex(q[i]);
  static const int ep[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int e = 0; e < 6; ++e) ids[4 + e] = bank.vertex(0.5 * (q[ep[e][0]] + q[ep[e][1]]));
  sub.tets.push_back(ids);
  sub.tet_corners.push_back(q);
}

void red_refine(std::vector<std::array<Vec3, 4>>& tets) {
  std::vector<std::array<Vec3, 4>> out;
  for (const auto& t : tets) {
    const Vec3 m01 = 0.5 * (t[0] + t[1]), m02 = 0.5 * (t[0] + t[2]), m03 = 0.5 * (t[0] + t[3]);
    const Vec3 m12 = 0.5 * (t[1] + t[2]), m13 = 0.5 * (t[1] + t[3]), m23 = 0.5 * (t[2] + t[3]);
    out.push_back({t[0], m01, m02, m03});
    out.push_back({t[1], m01, m12, m13});
    out.push_back({t[2], m02, m12, m23});
    out.push_back({t[3], m03, m13, m23});
    out.push_back({m01, m23, m02, m12});
    out.push_back({m01, m23, m12, m13});
    out.push_back({m01, m23, m13, m03});
    out.push_back({m01, m23, m03, m02});
  }
  tets = std::move(out);
}

Submesh build_submesh(const PolyMesh& mesh, const MeshGeometry& geom, int cell, int nsub) {
  const auto& c = mesh.cells[cell];
  std::vector<int> cv;
  for (int f : c.faces)
    for (int v : mesh.faces[f].verts) cv.push_back(v);
  std::sort(cv.begin(), cv.end());
  cv.erase(std::unique(cv.begin(), cv.end()), cv.end());

  std::vector<std::array<Vec3, 4>> tets;
  if (cv.size() == 4) {
    tets.push_back({mesh.vertices[cv[0]], mesh.vertices[cv[1]], mesh.vertices[cv[2]],
                    mesh.vertices[cv[3]]});
    for (int l = 0; l < nsub; ++l) red_refine(tets);
  } else if (cv.size() == 8) {
    Vec3 lo = mesh.vertices[cv[0]], hi = mesh.vertices[cv[0]];
    for (int v : cv) {
      lo = lo.cwiseMin(mesh.vertices[v]);
      hi = hi.cwiseMax(mesh.vertices[v]);
    }
    const Vec3 d = (hi - lo) / nsub;
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                    {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < nsub; ++k)
      for (int j = 0; j < nsub; ++j)
        for (int i = 0; i < nsub; ++i) {
          const Vec3 base = lo + Vec3(i * d.x(), j * d.y(), k * d.z());
          for (const auto& perm : perms) {
            std::array<Vec3, 4> t;
            Vec3 p = base;
            t[0] = p;
            for (int s = 0; s < 3; ++s) {
              p[perm[s]] += d[perm[s]];
              t[s + 1] = p;
            }
            tets.push_back(t);
          }
        }
  } else {
    throw std::runtime_error("oracle: cell is neither a tetrahedron nor a cube");
  }

  NodeBank bank;
  Submesh sub;
  for (const auto& t : tets) append_tet(bank, sub, t);
  sub.nodes = bank.nodes;

  // boundary triangles: tet faces used once, assigned to the parent cell face
  std::map<std::array<int, 3>, std::pair<int, int>> count;  // sorted corners -> (tet, omitted)
  std::map<std::array<int, 3>, int> uses;
  for (size_t t = 0; t < sub.tets.size(); ++t)
    for (int omit = 0; omit < 4; ++omit) {
      std::array<int, 3> tri;
      int k = 0;
      for (int s = 0; s < 4; ++s)
        if (s != omit) tri[k++] = sub.tets[t][s];
      std::sort(tri.begin(), tri.end());
      ++uses[tri];
      count[tri] = {static_cast<int>(t), omit};
    }
  static const int edge_of[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  for (const auto& [tri, use] : count) {
    if (uses[tri] != 1) continue;
    Submesh::BTri bt;
    const auto& tet = sub.tets[use.first];
    std::array<int, 3> corners_local;
    int k = 0;
    for (int s = 0; s < 4; ++s)
      if (s != use.second) corners_local[k++] = s;
    for (int s = 0; s < 3; ++s) {
      bt.nodes[s] = tet[corners_local[s]];
      bt.corners[s] = sub.nodes[bt.nodes[s]];
    }
    bt.nodes[3] = tet[4 + edge_of[corners_local[0]][corners_local[1]]];
    bt.nodes[4] = tet[4 + edge_of[corners_local[1]][corners_local[2]]];
    bt.nodes[5] = tet[4 + edge_of[corners_local[2]][corners_local[0]]];
    // parent face: the original cell face whose plane contains the triangle
    bt.parent = -1;
    const Vec3 ctr = (bt.corners[0] + bt.corners[1] + bt.corners[2]) / 3.0;
    for (size_t lf = 0; lf < c.faces.size(); ++lf) {
      const FaceGeom& fg = geom.face[c.faces[lf]];
      if (std::abs((ctr - fg.centroid).dot(fg.frame.n)) < 1e-9 * fg.diameter) {
        bt.parent = static_cast<int>(lf);
        break;
      }
    }
    if (bt.parent < 0) throw std::runtime_error("oracle: boundary triangle without parent face");
    sub.btris.push_back(bt);
  }
  return sub;
}

// ---------------------------------------------------------------------------
// generic constrained quadratic minimization with matrix-valued data
// ---------------------------------------------------------------------------

// minimize 1/2 x^T K x subject to x_fixed = G (columns = data cases) and
// C x = V. Returns the full solution matrix (rows = all dofs).
Eigen::MatrixXd constrained_minimize(const Eigen::MatrixXd& K, const std::vector<int>& fixed,
                                     const Eigen::MatrixXd& G, const Eigen::MatrixXd& C,
                                     const Eigen::MatrixXd& V) {
  const long n = K.rows(), ncase = G.cols(), nc = C.rows();
  std::vector<int> role(n, -1);
  for (size_t i = 0; i < fixed.size(); ++i) role[fixed[i]] = static_cast<int>(i);
  std::vector<long> free_ids;
  for (long i = 0; i < n; ++i)
    if (role[i] < 0) free_ids.push_back(i);
  const long nf = static_cast<long>(free_ids.size());

  Eigen::MatrixXd Kff(nf, nf), Kfb(nf, fixed.size()), Cf(nc, nf), Cb(nc, fixed.size());
  for (long i = 0; i < nf; ++i) {
    for (long j = 0; j < nf; ++j) Kff(i, j) = K(free_ids[i], free_ids[j]);
    for (size_t j = 0; j < fixed.size(); ++j) Kfb(i, j) = K(free_ids[i], fixed[j]);
  }
  for (long r = 0; r < nc; ++r) {
    for (long j = 0; j < nf; ++j) Cf(r, j) = C(r, free_ids[j]);
    for (size_t j = 0; j < fixed.size(); ++j) Cb(r, j) = C(r, fixed[j]);
  }

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + nc, nf + nc);
  kkt.topLeftCorner(nf, nf) = Kff;
  kkt.topRightCorner(nf, nc) = Cf.transpose();
  kkt.bottomLeftCorner(nc, nf) = Cf;
  Eigen::MatrixXd rhs(nf + nc, ncase);
  rhs.topRows(nf) = -Kfb * G;
  rhs.bottomRows(nc) = V - Cb * G;

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  const Eigen::MatrixXd sol = lu.solve(rhs);

  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, ncase);
  for (long i = 0; i < nf; ++i) full.row(free_ids[i]) = sol.row(i);
  for (size_t i = 0; i < fixed.size(); ++i) full.row(fixed[i]) = G.row(i);
  return full;
}

// ---------------------------------------------------------------------------
// cell context shared by the three space oracles
// ---------------------------------------------------------------------------

struct Ctx {
  const PolyMesh& mesh;
  const MeshGeometry& geom;
  int cell;
  Submesh sub;
  std::vector<int> lverts, ledges, lfaces;  // library-local entity order
  std::vector<int> fsigns;
  int n, ne, nf;
  double vol, h;
  Vec3 bP;

  // per local face: triangles, node set, boundary-of-face structure
  struct FaceCtx {
    std::vector<int> tris;              // indices into sub.btris
    std::vector<int> nodes;             // face node ids (sorted)
    std::vector<int> bnd_nodes;         // nodes on the polygon boundary
    std::vector<int> bnd_poly_edge;     // local polygon edge index per bnd node
    std::vector<double> bnd_param;      // arclength parameter on that edge
  };
  std::vector<FaceCtx> fctx;

  int cell_monomial_count = 10;
  double mono(int a, const Vec3& x) const {
    return mhdvem::cell_monomial(geom.cell[cell], a, x);
  }
};

Ctx make_ctx(const PolyMesh& mesh, const MeshGeometry& geom, int cell, int nsub) {
  Ctx ctx{mesh, geom, cell, build_submesh(mesh, geom, cell, nsub), {}, {}, {}, {}, 0, 0,
          0,    0,    0,    Vec3::Zero(), {}};
  const auto& c = mesh.cells[cell];
  std::vector<int> vmap(mesh.n_vertices(), -1), emap(mesh.n_edges(), -1);
  for (int f : c.faces) {
    for (int v : mesh.faces[f].verts)
      if (vmap[v] < 0) {
        vmap[v] = static_cast<int>(ctx.lverts.size());
        ctx.lverts.push_back(v);
      }
    for (int e : mesh.faces[f].edges)
      if (emap[e] < 0) {
        emap[e] = static_cast<int>(ctx.ledges.size());
        ctx.ledges.push_back(e);
      }
  }
  ctx.lfaces = c.faces;
  ctx.fsigns = c.face_signs;
  ctx.n = 3 * static_cast<int>(ctx.lverts.size()) + static_cast<int>(ctx.lfaces.size());
  ctx.ne = static_cast<int>(ctx.ledges.size());
  ctx.nf = static_cast<int>(ctx.lfaces.size());
  ctx.vol = geom.cell[cell].volume;
  ctx.h = geom.cell[cell].diameter;
  ctx.bP = geom.cell[cell].centroid;

  ctx.fctx.resize(ctx.nf);
  for (size_t t = 0; t < ctx.sub.btris.size(); ++t)
    ctx.fctx[ctx.sub.btris[t].parent].tris.push_back(static_cast<int>(t));
  for (int lf = 0; lf < ctx.nf; ++lf) {
    auto& fc = ctx.fctx[lf];
    std::set<int> nodeset;
    std::map<std::array<int, 2>, int> edge_use;
    for (int t : fc.tris) {
      const auto& bt = ctx.sub.btris[t];
      for (int i = 0; i < 6; ++i) nodeset.insert(bt.nodes[i]);
      for (int e = 0; e < 3; ++e) {
        std::array<int, 2> key{bt.nodes[e], bt.nodes[(e + 1) % 3]};
        std::sort(key.begin(), key.end());
        ++edge_use[key];
      }
    }
    fc.nodes.assign(nodeset.begin(), nodeset.end());
    std::set<int> bnd;
    for (int t : fc.tris) {
      const auto& bt = ctx.sub.btris[t];
      static const int mid[3] = {3, 4, 5};
      for (int e = 0; e < 3; ++e) {
        std::array<int, 2> key{bt.nodes[e], bt.nodes[(e + 1) % 3]};
        std::sort(key.begin(), key.end());
        if (edge_use[key] == 1) {
          bnd.insert(bt.nodes[e]);
          bnd.insert(bt.nodes[(e + 1) % 3]);
          bnd.insert(bt.nodes[mid[e]]);
        }
      }
    }
    // locate every boundary node on a polygon edge of the original face
    const Face& face = mesh.faces[ctx.lfaces[lf]];
    const int kf = static_cast<int>(face.verts.size());
    for (int nd : bnd) {
      const Vec3 x = ctx.sub.nodes[nd];
      int best = -1;
      double best_dev = 1e30, best_s = 0;
      for (int e = 0; e < kf; ++e) {
        const Vec3& a = mesh.vertices[face.verts[e]];
        const Vec3& b = mesh.vertices[face.verts[(e + 1) % kf]];
        const double len = (b - a).norm();
        const double s = (x - a).dot(b - a) / (len * len);
        if (s < -1e-9 || s > 1 + 1e-9) continue;
        const double dev = (x - (a + s * (b - a))).norm();
        if (dev < best_dev) {
          best_dev = dev;
          best = e;
          best_s = s;
        }
      }
      if (best < 0 || best_dev > 1e-9 * geom.face[ctx.lfaces[lf]].diameter)
        throw std::runtime_error("oracle: face boundary node not on a polygon edge");
      fc.bnd_nodes.push_back(nd);
      fc.bnd_poly_edge.push_back(best);
      fc.bnd_param.push_back(best_s);
    }
  }
  return ctx;
}

// volume quadrature sweep: fn(point, weight, tet index, shape values, shape grads)
template <typename Fn>
void for_volume_qp(const Ctx& ctx, Fn&& fn) {
  for (size_t t = 0; t < ctx.sub.tets.size(); ++t) {
    const auto& q = ctx.sub.tet_corners[t];
    for (const QP3& qp : tet_rule(q[0], q[1], q[2], q[3])) {
      double N[10];
      Vec3 G[10];
      p2_tet_shapes(q, qp.lambda, N, G);
      fn(qp.x, qp.w, t, N, G);
    }
  }
}

// surface quadrature over one local face
template <typename Fn>
void for_face_qp(const Ctx& ctx, int lf, Fn&& fn) {
  for (int t : ctx.fctx[lf].tris) {
    const auto& bt = ctx.sub.btris[t];
    for (const QP2& qp : tri_rule(bt.corners[0], bt.corners[1], bt.corners[2])) {
      double N[6];
      p2_tri_shapes(qp.lambda, N);
      fn(qp.x, qp.w, bt, N);
    }
  }
}

// P2 scalar stiffness over the whole submesh
Eigen::MatrixXd volume_stiffness(const Ctx& ctx) {
  const int nn = static_cast<int>(ctx.sub.nodes.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nn, nn);
  for_volume_qp(ctx, [&](const Vec3&, double w, size_t t, const double*, const Vec3* G) {
    const auto& ids = ctx.sub.tets[t];
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) K(ids[i], ids[j]) += w * G[i].dot(G[j]);
  });
  return K;
}

// in-plane P2 stiffness over one face's triangulation, indexed by the face
// node list
Eigen::MatrixXd face_stiffness(const Ctx& ctx, int lf, std::map<int, int>& local_of_node) {
  const auto& fc = ctx.fctx[lf];
  local_of_node.clear();
  for (size_t i = 0; i < fc.nodes.size(); ++i) local_of_node[fc.nodes[i]] = static_cast<int>(i);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(fc.nodes.size(), fc.nodes.size());
  for (int t : fc.tris) {
    const auto& bt = ctx.sub.btris[t];
    for (const QP2& qp : tri_rule(bt.corners[0], bt.corners[1], bt.corners[2])) {
      Vec3 G[6];
      p2_tri_gradients(bt.corners, qp.lambda, G);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
          K(local_of_node.at(bt.nodes[i]), local_of_node.at(bt.nodes[j])) += qp.w * G[i].dot(G[j]);
    }
  }
  return K;
}

// dense elliptic projector of a piecewise-linear polygon trace: rows of the
// P1 coefficients (stored frame scaled monomials) as functionals of the trace
// data rows. trace_rows maps a point on polygon edge e with parameter s to a
// row over the data columns.
Eigen::MatrixXd dense_face_pinabla(const Ctx& ctx, int lf,
                                   const std::function<Eigen::RowVectorXd(int, double)>& trace_row,
                                   int ncols) {
  const Face& face = ctx.mesh.faces[ctx.lfaces[lf]];
  const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
  const int kf = static_cast<int>(face.verts.size());
  const double hF = fg.diameter;
  std::vector<double> gx, gw;
  gauss01(3, gx, gw);

  Eigen::MatrixXd grad_rhs = Eigen::MatrixXd::Zero(2, ncols);
  Eigen::RowVectorXd closure = Eigen::RowVectorXd::Zero(ncols);
  Eigen::Vector2d mono_bnd = Eigen::Vector2d::Zero();
  double perim = 0;
  for (int e = 0; e < kf; ++e) {
    const Vec3& a = ctx.mesh.vertices[face.verts[e]];
    const Vec3& b = ctx.mesh.vertices[face.verts[(e + 1) % kf]];
    const double len = (b - a).norm();
    const Vec3 dir = (b - a) / len;
    const Vec3 nu = dir.cross(fg.frame.n);
    for (size_t g = 0; g < gx.size(); ++g) {
      const Eigen::RowVectorXd row = trace_row(e, gx[g]);
      const Vec3 x = a + gx[g] * (b - a);
      const Eigen::Vector2d xi = fg.frame.to2d(x);
      grad_rhs.row(0) += gw[g] * len * nu.dot(fg.frame.t1) / hF * row;
      grad_rhs.row(1) += gw[g] * len * nu.dot(fg.frame.t2) / hF * row;
      closure += gw[g] * len * row;
      mono_bnd(0) += gw[g] * len * xi.x() / hF;
      mono_bnd(1) += gw[g] * len * xi.y() / hF;
    }
    perim += len;
  }
  Eigen::MatrixXd coef(3, ncols);
  coef.row(1) = (hF * hF / fg.area) * grad_rhs.row(0);
  coef.row(2) = (hF * hF / fg.area) * grad_rhs.row(1);
  coef.row(0) = (closure - mono_bnd(0) * coef.row(1) - mono_bnd(1) * coef.row(2)) / perim;
  return coef;
}

// dense cross gram int_F m_a m_j on one face (stored frame)
Eigen::MatrixXd dense_face_gram(const Ctx& ctx, int lf, int na, int nb) {
  const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(na, nb);
  for_face_qp(ctx, lf, [&](const Vec3& x, double w, const Submesh::BTri&, const double*) {
    const Eigen::Vector2d xi = fg.frame.to2d(x);
    for (int a = 0; a < na; ++a)
      for (int b = 0; b < nb; ++b)
        G(a, b) += w * mhdvem::face_monomial(fg, a, xi) * mhdvem::face_monomial(fg, b, xi);
  });
  return G;
}

// ---------------------------------------------------------------------------
// velocity-space oracle
// ---------------------------------------------------------------------------

struct VelocityOracle {
  Eigen::MatrixXd nodal_x, nodal_y, nodal_z;  // (#nodes) x n Cartesian trace/volume data
  // boundary trace values at every submesh node that lies on the cell
  // boundary are Dirichlet data; interior from the constrained minimization
};

void velocity_oracle(const Ctx& ctx, CellOracle& out) {
  const int n = ctx.n;
  const int nn = static_cast<int>(ctx.sub.nodes.size());
  const int nvl = static_cast<int>(ctx.lverts.size());

  // ---- per-face 2D solves (tangential x2 + normal), assembling the full
  //      Cartesian boundary trace as data matrices over the n local dofs ----
  Eigen::MatrixXd trace[3];  // per component: nn x n (only boundary-face nodes used)
  for (int i = 0; i < 3; ++i) trace[i] = Eigen::MatrixXd::Zero(nn, n);
  std::vector<char> node_on_boundary(nn, 0);

  for (int lf = 0; lf < ctx.nf; ++lf) {
    const Face& face = ctx.mesh.faces[ctx.lfaces[lf]];
    const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
    const auto& fc = ctx.fctx[lf];
    const int kf = static_cast<int>(face.verts.size());

    // pw-linear trace row of component "dir . w" at parameter s on polygon edge e
    auto trace_row_dir = [&](const Vec3& dir) {
      return [&, dir](int e, double s) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        const int va = face.verts[e], vb = face.verts[(e + 1) % kf];
        int la = -1, lb = -1;
        for (int q = 0; q < nvl; ++q) {
          if (ctx.lverts[q] == va) la = q;
          if (ctx.lverts[q] == vb) lb = q;
        }
        for (int compo = 0; compo < 3; ++compo) {
          row(3 * la + compo) += (1 - s) * dir[compo];
          row(3 * lb + compo) += s * dir[compo];
        }
        return row;
      };
    };

    std::map<int, int> lon;
    const Eigen::MatrixXd K2 = face_stiffness(ctx, lf, lon);
    const Eigen::MatrixXd cg = dense_face_gram(ctx, lf, 3, 6);

    Eigen::MatrixXd sol[3];
    const Vec3 dirs[3] = {fg.frame.t1, fg.frame.t2, fg.frame.n};
    for (int variant = 0; variant < 3; ++variant) {
      const Vec3 dir = dirs[variant];
      auto trow = trace_row_dir(dir);
      const Eigen::MatrixXd pin = dense_face_pinabla(ctx, lf, trow, n);  // 3 x n

      // Dirichlet data at the polygon-boundary nodes
      std::vector<int> fixed;
      Eigen::MatrixXd G(fc.bnd_nodes.size(), n);
      for (size_t bi = 0; bi < fc.bnd_nodes.size(); ++bi) {
        fixed.push_back(lon.at(fc.bnd_nodes[bi]));
        G.row(bi) = trow(fc.bnd_poly_edge[bi], fc.bnd_param[bi]);
      }

      // enhancement moments: (v, m_j) = (dense Pi_nabla of the trace, m_j)
      std::vector<int> monomials;
      if (variant < 2)
        monomials = {0, 1, 2, 3, 4, 5};
      else
        monomials = {1, 2, 3, 4, 5};
      const int ncon = static_cast<int>(monomials.size()) + (variant == 2 ? 1 : 0);
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ncon, fc.nodes.size());
      Eigen::MatrixXd V = Eigen::MatrixXd::Zero(ncon, n);
      for (size_t mi = 0; mi < monomials.size(); ++mi) {
        const int j = monomials[mi];
        for_face_qp(ctx, lf, [&](const Vec3& x, double w, const Submesh::BTri& bt,
                                 const double* N) {
          const double mj = mhdvem::face_monomial(fg, j, fg.frame.to2d(x));
          for (int q = 0; q < 6; ++q) C(mi, lon.at(bt.nodes[q])) += w * N[q] * mj;
        });
        for (int a = 0; a < 3; ++a) V.row(mi) += cg(a, j) * pin.row(a);
      }
      if (variant == 2) {
        // mean pinned by the face moment DoF
        const int r = ncon - 1;
        for_face_qp(ctx, lf,
                    [&](const Vec3&, double w, const Submesh::BTri& bt, const double* N) {
                      for (int q = 0; q < 6; ++q) C(r, lon.at(bt.nodes[q])) += w * N[q];
                    });
        V(r, 3 * nvl + lf) = fg.area;
      }

      sol[variant] = constrained_minimize(K2, fixed, G, C, V);  // (#face nodes) x n
    }

    for (size_t q = 0; q < fc.nodes.size(); ++q) {
      const int nd = fc.nodes[q];
      node_on_boundary[nd] = 1;
      for (int i = 0; i < 3; ++i)
        trace[i].row(nd) = fg.frame.t1[i] * sol[0].row(q) + fg.frame.t2[i] * sol[1].row(q) +
                           fg.frame.n[i] * sol[2].row(q);
    }
  }

  // ---- dense face moments from the traces ----
  out.face_vec_moment.assign(ctx.nf, Eigen::MatrixXd::Zero(3, n));
  out.face_normal_moment.assign(ctx.nf, Eigen::MatrixXd::Zero(6, n));
  for (int lf = 0; lf < ctx.nf; ++lf) {
    const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
    for_face_qp(ctx, lf, [&](const Vec3& x, double w, const Submesh::BTri& bt, const double* N) {
      Eigen::RowVectorXd wn = Eigen::RowVectorXd::Zero(n);
      for (int i = 0; i < 3; ++i) {
        Eigen::RowVectorXd wi = Eigen::RowVectorXd::Zero(n);
        for (int q = 0; q < 6; ++q) wi += N[q] * trace[i].row(bt.nodes[q]);
        out.face_vec_moment[lf].row(i) += w * wi;
        wn += fg.frame.n[i] * wi;
      }
      const Eigen::Vector2d xi = fg.frame.to2d(x);
      for (int j = 0; j < 6; ++j)
        out.face_normal_moment[lf].row(j) += w * mhdvem::face_monomial(fg, j, xi) * wn;
    });
  }

  // ---- dense elliptic projector and gradient means (trace data only) ----
  out.pi_nabla = Eigen::MatrixXd::Zero(12, n);
  out.pi_grad = Eigen::MatrixXd::Zero(9, n);
  {
    double area_sum = 0;
    Eigen::Vector3d mono_bnd = Eigen::Vector3d::Zero();
    std::vector<Eigen::RowVectorXd> closure(3, Eigen::RowVectorXd::Zero(n));
    for (int lf = 0; lf < ctx.nf; ++lf) {
      const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
      const Vec3 n_out = ctx.fsigns[lf] * fg.frame.n;
      for (int i = 0; i < 3; ++i) {
        for (int a = 1; a <= 3; ++a)
          out.pi_nabla.row(4 * i + a) +=
              (ctx.h / ctx.vol) * n_out[a - 1] * out.face_vec_moment[lf].row(i);
        closure[i] += out.face_vec_moment[lf].row(i);
        for (int j = 0; j < 3; ++j)
          out.pi_grad.row(3 * i + j) += (n_out[j] / ctx.vol) * out.face_vec_moment[lf].row(i);
      }
      area_sum += fg.area;
      for (int a = 1; a <= 3; ++a)
        mono_bnd(a - 1) += fg.area * ctx.mono(a, fg.centroid);
    }
    for (int i = 0; i < 3; ++i) {
      Eigen::RowVectorXd row = closure[i];
      for (int a = 1; a <= 3; ++a) row -= mono_bnd(a - 1) * out.pi_nabla.row(4 * i + a);
      out.pi_nabla.row(4 * i) = row / area_sum;
    }
  }

  // ---- 3D constrained minimization ----
  const Eigen::MatrixXd Ks = volume_stiffness(ctx);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nn, 3 * nn);
  for (int i = 0; i < 3; ++i) K.block(i * nn, i * nn, nn, nn) = Ks;

  std::vector<int> fixed;
  std::vector<std::pair<int, int>> fixed_src;  // (component, node)
  for (int nd = 0; nd < nn; ++nd)
    if (node_on_boundary[nd])
      for (int i = 0; i < 3; ++i) {
        fixed.push_back(i * nn + nd);
        fixed_src.push_back({i, nd});
      }
  Eigen::MatrixXd G(fixed.size(), n);
  for (size_t i = 0; i < fixed.size(); ++i)
    G.row(i) = trace[fixed_src[i].first].row(fixed_src[i].second);

  // constraints: 9 divergence moments against non-constant P2 monomials with
  // the exact constant divergence, and 3 rotational moments pinned by the
  // dense elliptic projection
  const int ncon = 12;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ncon, 3 * nn);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(ncon, n);

  // d = (1/|P|) sum_F sigma |F| (face moment of w.n) -- dense row from traces
  Eigen::RowVectorXd divrow = Eigen::RowVectorXd::Zero(n);
  for (int lf = 0; lf < ctx.nf; ++lf) {
    const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
    for (int i = 0; i < 3; ++i)
      divrow += ctx.fsigns[lf] * fg.frame.n[i] * out.face_vec_moment[lf].row(i) / ctx.vol;
  }

  Eigen::VectorXd int_mono = Eigen::VectorXd::Zero(10);
  for_volume_qp(ctx, [&](const Vec3& x, double w, size_t, const double*, const Vec3*) {
    for (int a = 0; a < 10; ++a) int_mono(a) += w * ctx.mono(a, x);
  });
  for (int s = 1; s <= 9; ++s) {
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double*, const Vec3* Gr) {
      const double ms = ctx.mono(s, x);
      const auto& ids = ctx.sub.tets[t];
      (void)x;
      for (int q = 0; q < 10; ++q)
        for (int i = 0; i < 3; ++i) C(s - 1, i * nn + ids[q]) += w * ms * Gr[q][i];
    });
    // (div w, m_s) = -(w, grad m_s) + boundary; impose directly as
    // int (div w) m_s = d * int m_s using elementwise exact derivatives
    V.row(s - 1) = int_mono(s) * divrow;
  }
  // rotational moments: (w, x x e_k) = (Pi_nabla w, x x e_k)
  for (int k = 0; k < 3; ++k) {
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double* N, const Vec3*) {
      const Vec3 xxe = x.cross(Vec3::Unit(k));
      const auto& ids = ctx.sub.tets[t];
      for (int q = 0; q < 10; ++q)
        for (int i = 0; i < 3; ++i) C(9 + k, i * nn + ids[q]) += w * N[q] * xxe[i];
    });
    // dense volume integrals of the P1 basis against x x e_k
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a) {
        double coef = 0;
        for_volume_qp(ctx, [&](const Vec3& x, double w, size_t, const double*, const Vec3*) {
          coef += w * ctx.mono(a, x) * x.cross(Vec3::Unit(k))[i];
        });
        V.row(9 + k) += coef * out.pi_nabla.row(4 * i + a);
      }
  }

  const Eigen::MatrixXd sol = constrained_minimize(K, fixed, G, C, V);  // 3nn x n

  // ---- dense L2 projector ----
  Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(12, n);
  Eigen::Matrix4d gram = Eigen::Matrix4d::Zero();
  for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double* N, const Vec3*) {
    const auto& ids = ctx.sub.tets[t];
    double m[4];
    for (int a = 0; a < 4; ++a) m[a] = ctx.mono(a, x);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) gram(a, b) += w * m[a] * m[b];
    for (int i = 0; i < 3; ++i) {
      Eigen::RowVectorXd wi = Eigen::RowVectorXd::Zero(n);
      for (int q = 0; q < 10; ++q) wi += N[q] * sol.row(i * nn + ids[q]);
      for (int a = 0; a < 4; ++a) moments.row(4 * i + a) += w * m[a] * wi;
    }
  });
  const Eigen::PartialPivLU<Eigen::Matrix4d> glu(gram);
  out.pi_zero = Eigen::MatrixXd::Zero(12, n);
  for (int i = 0; i < 3; ++i)
    out.pi_zero.middleRows(4 * i, 4) = glu.solve(moments.middleRows(4 * i, 4));

  // ---- forms with the oracle projectors ----
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, 12);
  for (int lv = 0; lv < nvl; ++lv)
    for (int compo = 0; compo < 3; ++compo)
      for (int a = 0; a < 4; ++a)
        D(3 * lv + compo, 4 * compo + a) = ctx.mono(a, ctx.mesh.vertices[ctx.lverts[lv]]);
  for (int lf = 0; lf < ctx.nf; ++lf) {
    const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
    Eigen::RowVectorXd mean_mono = Eigen::RowVectorXd::Zero(6);
    double area = 0;
    for_face_qp(ctx, lf, [&](const Vec3& x, double w, const Submesh::BTri&, const double*) {
      for (int a = 0; a < 4; ++a) mean_mono(a) += w * ctx.mono(a, x);
      area += w;
    });
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a)
        D(3 * nvl + lf, 4 * i + a) = fg.frame.n[i] * mean_mono(a) / area;
  }
  Eigen::MatrixXd Gn = Eigen::MatrixXd::Zero(12, 12), Gm = Eigen::MatrixXd::Zero(12, 12);
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 4; ++a) {
      if (a >= 1) Gn(4 * i + a, 4 * i + a) = ctx.vol / (ctx.h * ctx.h);
      for (int b = 0; b < 4; ++b) Gm(4 * i + a, 4 * i + b) = gram(a, b);
    }
  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Kn = In - D * out.pi_nabla;
  const Eigen::MatrixXd Kz = In - D * out.pi_zero;
  out.A = out.pi_nabla.transpose() * Gn * out.pi_nabla + ctx.h * Kn.transpose() * Kn;
  out.M = out.pi_zero.transpose() * Gm * out.pi_zero +
          ctx.h * ctx.h * ctx.h * Kz.transpose() * Kz;
}

// ---------------------------------------------------------------------------
// edge-space oracle
// ---------------------------------------------------------------------------

// orthogonalize possibly-redundant point constraints d^T E(node) = r
struct PointConstraints {
  std::vector<Vec3> dirs;
  std::vector<Eigen::RowVectorXd> vals;
  void add(const Vec3& d, const Eigen::RowVectorXd& r) {
    Vec3 q = d;
    Eigen::RowVectorXd rr = r;
    for (size_t k = 0; k < dirs.size(); ++k) {
      const double c = q.dot(dirs[k]);
      q -= c * dirs[k];
      rr -= c * vals[k];
    }
    const double nq = q.norm();
    if (nq < 1e-8) return;  // redundant (consistent by construction)
    dirs.push_back(q / nq);
    vals.push_back(rr / nq);
  }
};

void edge_oracle(const Ctx& ctx, CellOracle& out) {
  const int ne = ctx.ne;
  const int nn = static_cast<int>(ctx.sub.nodes.size());

  // per-face 2D solves: in-plane vector fields with constant tangential
  // traces, constant-rot moments, weak constant divergence, zero x_F moment
  Eigen::MatrixXd trace[3];
  for (int i = 0; i < 3; ++i) trace[i] = Eigen::MatrixXd::Zero(nn, ne);
  std::vector<char> node_on_boundary(nn, 0);

  for (int lf = 0; lf < ctx.nf; ++lf) {
    const Face& face = ctx.mesh.faces[ctx.lfaces[lf]];
    const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
    const auto& fc = ctx.fctx[lf];
    const int nfn = static_cast<int>(fc.nodes.size());
    std::map<int, int> lon;
    const Eigen::MatrixXd K2s = face_stiffness(ctx, lf, lon);
    Eigen::MatrixXd K2 = Eigen::MatrixXd::Zero(2 * nfn + 1, 2 * nfn + 1);  // +1: free div const
    K2.block(0, 0, nfn, nfn) = K2s;
    K2.block(nfn, nfn, nfn, nfn) = K2s;

    // constraint rows: tangential trace at boundary nodes (in the rotated
    // per-edge direction), rot moments, div moments with the extra unknown,
    // and the x_F moment
    std::vector<Eigen::RowVectorXd> crows;
    std::vector<Eigen::RowVectorXd> cvals;
    auto row_of = [&](int node, const Eigen::Vector2d& dir) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * nfn + 1);
      row(lon.at(node)) = dir.x();
      row(nfn + lon.at(node)) = dir.y();
      return row;
    };
    // tangential trace rows; at polygon corners both incident edges apply
    for (size_t bi = 0; bi < fc.bnd_nodes.size(); ++bi) {
      const int nd = fc.bnd_nodes[bi];
      const Vec3 x = ctx.sub.nodes[nd];
      const int kf = static_cast<int>(face.verts.size());
      for (int e = 0; e < kf; ++e) {
        const Vec3& a = ctx.mesh.vertices[face.verts[e]];
        const Vec3& b = ctx.mesh.vertices[face.verts[(e + 1) % kf]];
        const double len = (b - a).norm();
        const double s = (x - a).dot(b - a) / (len * len);
        if (s < -1e-9 || s > 1 + 1e-9) continue;
        if ((x - (a + s * (b - a))).norm() > 1e-9 * fg.diameter) continue;
        const int ge = face.edges[e];
        const Vec3 t = ctx.geom.edge[ge].tangent;
        const Eigen::Vector2d t2d(t.dot(fg.frame.t1), t.dot(fg.frame.t2));
        int le = -1;
        for (int q = 0; q < ne; ++q)
          if (ctx.ledges[q] == ge) le = q;
        Eigen::RowVectorXd val = Eigen::RowVectorXd::Zero(ne);
        val(le) = 1.0;
        // orthogonalize against rows already present for this node
        crows.push_back(row_of(nd, t2d));
        cvals.push_back(val);
      }
    }
    // deduplicate per node via the 2D Gram-Schmidt on directions
    {
      std::map<int, std::vector<size_t>> per_slot;
      std::vector<Eigen::RowVectorXd> rows2, vals2;
      std::map<int, std::vector<std::pair<Eigen::Vector2d, size_t>>> seen;
      for (size_t r = 0; r < crows.size(); ++r) {
        int nd = -1;
        for (int q = 0; q < nfn && nd < 0; ++q)
          if (crows[r](q) != 0 || crows[r](nfn + q) != 0) nd = q;
        Eigen::Vector2d dir(crows[r](nd), crows[r](nfn + nd));
        auto& list = seen[nd];
        Eigen::Vector2d q = dir;
        Eigen::RowVectorXd v = cvals[r];
        Eigen::RowVectorXd rw = crows[r];
        for (auto& [pd, pr] : list) {
          const double c = q.dot(pd);
          q -= c * pd;
          v -= c * vals2[pr];
          rw -= c * rows2[pr];
        }
        if (q.norm() < 1e-8) continue;
        rw /= q.norm();
        v /= q.norm();
        list.push_back({q.normalized(), rows2.size()});
        rows2.push_back(rw);
        vals2.push_back(v);
      }
      (void)per_slot;
      crows = std::move(rows2);
      cvals = std::move(vals2);
    }

    // rot moments (non-constant monomials; the constant one is implied by
    // the boundary rows): int (rot E) m_j = c_r int m_j
    Eigen::RowVectorXd c_r = Eigen::RowVectorXd::Zero(ne);
    for (size_t q = 0; q < face.edges.size(); ++q) {
      int le = -1;
      for (int r = 0; r < ne; ++r)
        if (ctx.ledges[r] == face.edges[q]) le = r;
      c_r(le) += face.edge_signs[q] * ctx.geom.edge[face.edges[q]].length / fg.area;
    }
    for (int j = 1; j < 6; ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * nfn + 1);
      double int_mj = 0;
      for (int t : fc.tris) {
        const auto& bt = ctx.sub.btris[t];
        for (const QP2& qp : tri_rule(bt.corners[0], bt.corners[1], bt.corners[2])) {
          Vec3 Gr[6];
          p2_tri_gradients(bt.corners, qp.lambda, Gr);
          const double mj = mhdvem::face_monomial(fg, j, fg.frame.to2d(qp.x));
          int_mj += qp.w * mj;
          // rot E = d1 E2 - d2 E1 in the stored frame
          for (int q = 0; q < 6; ++q) {
            row(nfn + lon.at(bt.nodes[q])) += qp.w * mj * Gr[q].dot(fg.frame.t1);
            row(lon.at(bt.nodes[q])) -= qp.w * mj * Gr[q].dot(fg.frame.t2);
          }
        }
      }
      crows.push_back(row);
      cvals.push_back(int_mj * c_r);
    }
    // div moments with a free constant: int (div E) m_j - c_d int m_j = 0
    for (int j = 0; j < 6; ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * nfn + 1);
      double int_mj = 0;
      for (int t : fc.tris) {
        const auto& bt = ctx.sub.btris[t];
        for (const QP2& qp : tri_rule(bt.corners[0], bt.corners[1], bt.corners[2])) {
          Vec3 Gr[6];
          p2_tri_gradients(bt.corners, qp.lambda, Gr);
          const double mj = mhdvem::face_monomial(fg, j, fg.frame.to2d(qp.x));
          int_mj += qp.w * mj;
          for (int q = 0; q < 6; ++q) {
            row(lon.at(bt.nodes[q])) += qp.w * mj * Gr[q].dot(fg.frame.t1);
            row(nfn + lon.at(bt.nodes[q])) += qp.w * mj * Gr[q].dot(fg.frame.t2);
          }
        }
      }
      row(2 * nfn) = -int_mj;
      crows.push_back(row);
      cvals.push_back(Eigen::RowVectorXd::Zero(ne));
    }
    // zero x_F moment
    {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * nfn + 1);
      for_face_qp(ctx, lf, [&](const Vec3& x, double w, const Submesh::BTri& bt, const double* N) {
        const Eigen::Vector2d xi = fg.frame.to2d(x);
        for (int q = 0; q < 6; ++q) {
          row(lon.at(bt.nodes[q])) += w * N[q] * xi.x();
          row(nfn + lon.at(bt.nodes[q])) += w * N[q] * xi.y();
        }
      });
      crows.push_back(row);
      cvals.push_back(Eigen::RowVectorXd::Zero(ne));
    }

    Eigen::MatrixXd C(crows.size(), 2 * nfn + 1), V(crows.size(), ne);
    for (size_t r = 0; r < crows.size(); ++r) {
      C.row(r) = crows[r];
      V.row(r) = cvals[r];
    }
    const Eigen::MatrixXd sol =
        constrained_minimize(K2, {}, Eigen::MatrixXd::Zero(0, ne), C, V);

    for (int q = 0; q < nfn; ++q) {
      const int nd = fc.nodes[q];
      node_on_boundary[nd] = 1;
      for (int i = 0; i < 3; ++i)
        trace[i].row(nd) = fg.frame.t1[i] * sol.row(q) + fg.frame.t2[i] * sol.row(nfn + q);
    }
  }

  // ---- 3D solve: tangential trace from the 2D solutions ----
  const int nnn = nn;
  const Eigen::MatrixXd Ks = volume_stiffness(ctx);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nnn, 3 * nnn);
  for (int i = 0; i < 3; ++i) K.block(i * nnn, i * nnn, nnn, nnn) = Ks;

  // per boundary node: orthogonalized in-plane direction constraints
  std::vector<Eigen::RowVectorXd> crows;
  std::vector<Eigen::RowVectorXd> cvals;
  {
    std::vector<PointConstraints> pc(nnn);
    for (int lf = 0; lf < ctx.nf; ++lf) {
      const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
      for (int nd : ctx.fctx[lf].nodes) {
        Eigen::RowVectorXd v1 = Eigen::RowVectorXd::Zero(ne), v2 = v1;
        for (int i = 0; i < 3; ++i) {
          v1 += fg.frame.t1[i] * trace[i].row(nd);
          v2 += fg.frame.t2[i] * trace[i].row(nd);
        }
        pc[nd].add(fg.frame.t1, v1);
        pc[nd].add(fg.frame.t2, v2);
      }
    }
    for (int nd = 0; nd < nnn; ++nd)
      for (size_t k = 0; k < pc[nd].dirs.size(); ++k) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nnn);
        for (int i = 0; i < 3; ++i) row(i * nnn + nd) = pc[nd].dirs[k][i];
        crows.push_back(row);
        cvals.push_back(pc[nd].vals[k]);
      }
  }
  // volume structure: div moments vanish, curl interior moments vanish
  for (int s = 0; s <= 9; ++s) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nnn);
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double*, const Vec3* Gr) {
      const double ms = ctx.mono(s, x);
      const auto& ids = ctx.sub.tets[t];
      for (int q = 0; q < 10; ++q)
        for (int i = 0; i < 3; ++i) row(i * nnn + ids[q]) += w * ms * Gr[q][i];
    });
    crows.push_back(row);
    cvals.push_back(Eigen::RowVectorXd::Zero(ne));
  }
  for (int k = 0; k < 3; ++k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nnn);
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double*, const Vec3* Gr) {
      const Vec3 phi = (x - ctx.bP).cross(Vec3::Unit(k));
      const auto& ids = ctx.sub.tets[t];
      // curl(E).phi summed by components: curl E = (d2E3-d3E2, d3E1-d1E3, d1E2-d2E1)
      for (int q = 0; q < 10; ++q) {
        row(2 * nnn + ids[q]) += w * (phi[0] * Gr[q][1] - phi[1] * Gr[q][0]);
        row(1 * nnn + ids[q]) += w * (phi[2] * Gr[q][0] - phi[0] * Gr[q][2]);
        row(0 * nnn + ids[q]) += w * (phi[1] * Gr[q][2] - phi[2] * Gr[q][1]);
      }
    });
    crows.push_back(row);
    cvals.push_back(Eigen::RowVectorXd::Zero(ne));
  }

  Eigen::MatrixXd C(crows.size(), 3 * nnn), V(crows.size(), ne);
  for (size_t r = 0; r < crows.size(); ++r) {
    C.row(r) = crows[r];
    V.row(r) = cvals[r];
  }
  const Eigen::MatrixXd sol = constrained_minimize(K, {}, Eigen::MatrixXd::Zero(0, ne), C, V);

  // dense mean
  out.pi_edge = Eigen::MatrixXd::Zero(3, ne);
  for_volume_qp(ctx, [&](const Vec3&, double w, size_t t, const double* N, const Vec3*) {
    const auto& ids = ctx.sub.tets[t];
    for (int i = 0; i < 3; ++i)
      for (int q = 0; q < 10; ++q) out.pi_edge.row(i) += (w / ctx.vol) * N[q] * sol.row(i * nnn + ids[q]);
  });

  Eigen::MatrixXd De = Eigen::MatrixXd::Zero(ne, 3);
  Eigen::VectorXd sdiag = Eigen::VectorXd::Zero(ne);
  for (int le = 0; le < ne; ++le) De.row(le) = ctx.geom.edge[ctx.ledges[le]].tangent.transpose();
  for (int lf = 0; lf < ctx.nf; ++lf)
    for (int e : ctx.mesh.faces[ctx.lfaces[lf]].edges)
      for (int le = 0; le < ne; ++le)
        if (ctx.ledges[le] == e)
          sdiag(le) += ctx.h * ctx.h * ctx.geom.edge[e].length;
  const Eigen::MatrixXd Ke = Eigen::MatrixXd::Identity(ne, ne) - De * out.pi_edge;
  out.Medge = ctx.vol * out.pi_edge.transpose() * out.pi_edge +
              Ke.transpose() * sdiag.asDiagonal() * Ke;
}

// ---------------------------------------------------------------------------
// face-space oracle
// ---------------------------------------------------------------------------

void face_oracle(const Ctx& ctx, CellOracle& out) {
  const int nf = ctx.nf, ne = ctx.ne;
  const int nn = static_cast<int>(ctx.sub.nodes.size());
  const Eigen::MatrixXd Ks = volume_stiffness(ctx);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nn, 3 * nn);
  for (int i = 0; i < 3; ++i) K.block(i * nn, i * nn, nn, nn) = Ks;

  std::vector<Eigen::RowVectorXd> crows;
  std::vector<Eigen::RowVectorXd> cvals;
  {
    std::vector<PointConstraints> pc(nn);
    for (int lf = 0; lf < nf; ++lf) {
      const FaceGeom& fg = ctx.geom.face[ctx.lfaces[lf]];
      Eigen::RowVectorXd val = Eigen::RowVectorXd::Zero(nf);
      val(lf) = 1.0;
      for (int nd : ctx.fctx[lf].nodes) pc[nd].add(fg.frame.n, val);
    }
    for (int nd = 0; nd < nn; ++nd)
      for (size_t k = 0; k < pc[nd].dirs.size(); ++k) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nn);
        for (int i = 0; i < 3; ++i) row(i * nn + nd) = pc[nd].dirs[k][i];
        crows.push_back(row);
        cvals.push_back(pc[nd].vals[k]);
      }
  }
  // divergence moments: (div B, m_s) = c_div int m_s for non-constant m_s
  Eigen::RowVectorXd divrow = Eigen::RowVectorXd::Zero(nf);
  for (int lf = 0; lf < nf; ++lf)
    divrow(lf) = ctx.fsigns[lf] * ctx.geom.face[ctx.lfaces[lf]].area / ctx.vol;
  Eigen::VectorXd int_mono = Eigen::VectorXd::Zero(10);
  for_volume_qp(ctx, [&](const Vec3& x, double w, size_t, const double*, const Vec3*) {
    for (int a = 0; a < 10; ++a) int_mono(a) += w * ctx.mono(a, x);
  });
  for (int s = 1; s <= 9; ++s) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nn);
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double*, const Vec3* Gr) {
      const double ms = ctx.mono(s, x);
      const auto& ids = ctx.sub.tets[t];
      for (int q = 0; q < 10; ++q)
        for (int i = 0; i < 3; ++i) row(i * nn + ids[q]) += w * ms * Gr[q][i];
    });
    crows.push_back(row);
    cvals.push_back(int_mono(s) * divrow);
  }
  // interior moments (B, x_P x q) = 0
  for (int k = 0; k < 3; ++k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * nn);
    for_volume_qp(ctx, [&](const Vec3& x, double w, size_t t, const double* N, const Vec3*) {
      const Vec3 phi = (x - ctx.bP).cross(Vec3::Unit(k));
      const auto& ids = ctx.sub.tets[t];
      for (int q = 0; q < 10; ++q)
        for (int i = 0; i < 3; ++i) row(i * nn + ids[q]) += w * N[q] * phi[i];
    });
    crows.push_back(row);
    cvals.push_back(Eigen::RowVectorXd::Zero(nf));
  }

  Eigen::MatrixXd C(crows.size(), 3 * nn), V(crows.size(), nf);
  for (size_t r = 0; r < crows.size(); ++r) {
    C.row(r) = crows[r];
    V.row(r) = cvals[r];
  }
  const Eigen::MatrixXd sol = constrained_minimize(K, {}, Eigen::MatrixXd::Zero(0, nf), C, V);

  out.pi_face = Eigen::MatrixXd::Zero(3, nf);
  for_volume_qp(ctx, [&](const Vec3&, double w, size_t t, const double* N, const Vec3*) {
    const auto& ids = ctx.sub.tets[t];
    for (int i = 0; i < 3; ++i)
      for (int q = 0; q < 10; ++q)
        out.pi_face.row(i) += (w / ctx.vol) * N[q] * sol.row(i * nn + ids[q]);
  });

  Eigen::MatrixXd Df = Eigen::MatrixXd::Zero(nf, 3);
  Eigen::VectorXd sdiag = Eigen::VectorXd::Zero(nf);
  for (int lf = 0; lf < nf; ++lf) {
    Df.row(lf) = ctx.geom.face[ctx.lfaces[lf]].frame.n.transpose();
    sdiag(lf) = ctx.h * ctx.geom.face[ctx.lfaces[lf]].area;
  }
  const Eigen::MatrixXd Kf = Eigen::MatrixXd::Identity(nf, nf) - Df * out.pi_face;
  out.Mface = ctx.vol * out.pi_face.transpose() * out.pi_face +
              Kf.transpose() * sdiag.asDiagonal() * Kf;

  // curl coupling via the circulation of the edge dofs
  Eigen::MatrixXd curlmap = Eigen::MatrixXd::Zero(nf, ne);
  for (int lf = 0; lf < nf; ++lf) {
    const Face& face = ctx.mesh.faces[ctx.lfaces[lf]];
    for (size_t q = 0; q < face.edges.size(); ++q)
      for (int le = 0; le < ne; ++le)
        if (ctx.ledges[le] == face.edges[q])
          curlmap(lf, le) += face.edge_signs[q] * ctx.geom.edge[face.edges[q]].length /
                             ctx.geom.face[ctx.lfaces[lf]].area;
  }
  out.Curl = out.Mface * curlmap;
}

}  // namespace

CellOracle compute_cell_oracle(const PolyMesh& mesh, const MeshGeometry& geom, int cell,
                               int subdivisions) {
  Ctx ctx = make_ctx(mesh, geom, cell, subdivisions);
  CellOracle out;
  velocity_oracle(ctx, out);
  edge_oracle(ctx, out);
  face_oracle(ctx, out);
  return out;
}

double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-30);
  return (a - b).norm() / scale;
}

}  // namespace oracle
