#include "mhdvem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mhdvem/errors.hpp"

namespace mhdvem {

namespace {

std::string cat(const char* what, int idx) {
  std::ostringstream os;
  os << what << " " << idx;
  return os.str();
}

// Newell normal; length equals twice the polygon area for planar loops.
Vec3 newell_normal(const PolyMesh& mesh, const Face& face) {
  Vec3 n = Vec3::Zero();
  const int k = static_cast<int>(face.verts.size());
  for (int i = 0; i < k; ++i) {
    const Vec3& a = mesh.vertices[face.verts[i]];
    const Vec3& b = mesh.vertices[face.verts[(i + 1) % k]];
    n += a.cross(b);
  }
  return n;
}

Vec3 vertex_mean(const PolyMesh& mesh, const std::vector<int>& ids) {
  Vec3 c = Vec3::Zero();
  for (int v : ids) c += mesh.vertices[v];
  return c / static_cast<double>(ids.size());
}

double loop_diameter(const PolyMesh& mesh, const std::vector<int>& ids) {
  double d = 0.0;
  for (size_t i = 0; i < ids.size(); ++i)
    for (size_t j = i + 1; j < ids.size(); ++j)
      d = std::max(d, (mesh.vertices[ids[i]] - mesh.vertices[ids[j]]).norm());
  return d;
}

bool segments_intersect_2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                           const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto orient = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
    return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

}  // namespace

void PolyMesh::finalize() {
  const int nv = n_vertices(), ne = n_edges(), nf = n_faces();
  for (int e = 0; e < ne; ++e)
    for (int v : edges[e])
      if (v < 0 || v >= nv) throw MeshError(cat("edge with out-of-range vertex: edge", e));
  for (int f = 0; f < nf; ++f) {
    const Face& face = faces[f];
    if (face.verts.size() < 3) throw MeshError(cat("face with fewer than 3 vertices: face", f));
    if (face.edges.size() != face.verts.size() || face.edge_signs.size() != face.verts.size())
      throw MeshError(cat("face with inconsistent loop arrays: face", f));
    for (int v : face.verts)
      if (v < 0 || v >= nv) throw MeshError(cat("face with out-of-range vertex: face", f));
    for (int e : face.edges)
      if (e < 0 || e >= ne) throw MeshError(cat("face with out-of-range edge: face", f));
  }
  face_cells.assign(nf, {-1, -1});
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cell = cells[c];
    if (cell.faces.size() != cell.face_signs.size())
      throw MeshError(cat("cell with inconsistent face arrays: cell", c));
    for (int f : cell.faces) {
      if (f < 0 || f >= nf) throw MeshError(cat("cell with out-of-range face: cell", c));
      if (face_cells[f][0] < 0)
        face_cells[f][0] = c;
      else if (face_cells[f][1] < 0)
        face_cells[f][1] = c;
      else
        throw MeshError(cat("face shared by more than two cells: face", f));
    }
  }
}

PolyMesh mesh_from_cell_faces(std::vector<Vec3> vertices,
                              const std::vector<std::vector<std::vector<int>>>& cell_faces) {
  PolyMesh mesh;
  mesh.vertices = std::move(vertices);

  std::map<std::pair<int, int>, int> edge_ids;
  auto get_edge = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = edge_ids.find(key);
    if (it != edge_ids.end()) return it->second;
    const int id = mesh.n_edges();
    mesh.edges.push_back({a, b});
    edge_ids.emplace(key, id);
    return id;
  };

  std::map<std::vector<int>, int> face_ids;  // key: sorted vertex loop
  mesh.cells.resize(cell_faces.size());
  for (size_t c = 0; c < cell_faces.size(); ++c) {
    for (const std::vector<int>& loop : cell_faces[c]) {
      std::vector<int> key(loop);
      std::sort(key.begin(), key.end());
      auto it = face_ids.find(key);
      int fid, sign;
      if (it == face_ids.end()) {
        fid = mesh.n_faces();
        sign = +1;
        Face face;
        face.verts = loop;
        const int k = static_cast<int>(loop.size());
        for (int i = 0; i < k; ++i) {
          const int a = loop[i], b = loop[(i + 1) % k];
          face.edges.push_back(get_edge(a, b));
          face.edge_signs.push_back(mesh.edges[face.edges.back()][0] == a ? +1 : -1);
        }
        mesh.faces.push_back(std::move(face));
        face_ids.emplace(std::move(key), fid);
      } else {
        // Shared face: the second cell sees the reversed loop.
        fid = it->second;
        sign = -1;
      }
      mesh.cells[c].faces.push_back(fid);
      mesh.cells[c].face_signs.push_back(sign);
    }
  }
  mesh.finalize();
  return mesh;
}

PolyMesh build_cube_mesh(int n) {
  if (n < 1) throw ConfigError("build_cube_mesh: n must be >= 1");
  const int m = n + 1;
  std::vector<Vec3> verts(static_cast<size_t>(m) * m * m);
  auto vid = [m](int i, int j, int k) { return (k * m + j) * m + i; };
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        verts[vid(i, j, k)] = Vec3(double(i) / n, double(j) / n, double(k) / n);

  std::vector<std::vector<std::vector<int>>> cells;
  cells.reserve(static_cast<size_t>(n) * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        // Outward counter-clockwise loops of the cube [i,i+1]x[j,j+1]x[k,k+1].
        cells.push_back({
            {vid(i, j, k), vid(i, j, k + 1), vid(i, j + 1, k + 1), vid(i, j + 1, k)},
            {vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i + 1, j + 1, k + 1), vid(i + 1, j, k + 1)},
            {vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j, k + 1), vid(i, j, k + 1)},
            {vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i + 1, j + 1, k + 1), vid(i + 1, j + 1, k)},
            {vid(i, j, k), vid(i, j + 1, k), vid(i + 1, j + 1, k), vid(i + 1, j, k)},
            {vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1)},
        });
      }
  return mesh_from_cell_faces(std::move(verts), cells);
}

PolyMesh build_tet_mesh(int n) {
  if (n < 1) throw ConfigError("build_tet_mesh: n must be >= 1");
  const int m = n + 1;
  std::vector<Vec3> verts(static_cast<size_t>(m) * m * m);
  auto vid = [m](int i, int j, int k) { return (k * m + j) * m + i; };
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        verts[vid(i, j, k)] = Vec3(double(i) / n, double(j) / n, double(k) / n);

  // Kuhn split: six tetrahedra around the main diagonal of each cube, one per
  // permutation of the axes; identical in every cube, hence conforming.
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::vector<std::vector<int>>> cells;
  cells.reserve(static_cast<size_t>(n) * n * n * 6);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& perm : perms) {
          int c[3] = {i, j, k};
          std::array<int, 4> tv;
          tv[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            tv[s + 1] = vid(c[0], c[1], c[2]);
          }
          // Orient each triangular face outward (away from the omitted vertex).
          std::vector<std::vector<int>> tfaces;
          for (int omit = 0; omit < 4; ++omit) {
            std::vector<int> tri;
            for (int s = 0; s < 4; ++s)
              if (s != omit) tri.push_back(tv[s]);
            const Vec3 a = verts[tri[0]], b = verts[tri[1]], cc = verts[tri[2]];
            const Vec3 nrm = (b - a).cross(cc - a);
            if (nrm.dot((a + b + cc) / 3.0 - verts[tv[omit]]) < 0) std::swap(tri[1], tri[2]);
            tfaces.push_back(std::move(tri));
          }
          cells.push_back(std::move(tfaces));
        }
  return mesh_from_cell_faces(std::move(verts), cells);
}

namespace {

struct LineReader {
  std::istream& in;
  int line = 0;
  std::string buf;
  bool next(std::istringstream& fields) {
    while (std::getline(in, buf)) {
      ++line;
      if (buf.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      fields.clear();
      fields.str(buf);
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "polymesh parse error at line " << line << ": " << what;
    throw IoError(os.str());
  }
};

}  // namespace

PolyMesh read_poly_mesh(std::istream& in) {
  LineReader rd{in, 0, {}};
  std::istringstream fields;

  if (!rd.next(fields)) rd.fail("missing header");
  std::string magic;
  int version = 0;
  if (!(fields >> magic >> version) || magic != "polymesh" || version != 1)
    rd.fail("expected 'polymesh 1' header");

  if (!rd.next(fields)) rd.fail("missing entity counts");
  long nv, ne, nf, nc;
  if (!(fields >> nv >> ne >> nf >> nc) || nv < 0 || ne < 0 || nf < 0 || nc < 0)
    rd.fail("malformed counts 'nv ne nf nc'");

  PolyMesh mesh;
  mesh.vertices.resize(nv);
  for (long v = 0; v < nv; ++v) {
    if (!rd.next(fields)) rd.fail("unexpected end of file in vertex block");
    double x, y, z;
    if (!(fields >> x >> y >> z)) rd.fail("malformed vertex coordinates");
    mesh.vertices[v] = Vec3(x, y, z);
  }
  for (long e = 0; e < ne; ++e) {
    if (!rd.next(fields)) rd.fail("unexpected end of file in edge block");
    long a, b;
    if (!(fields >> a >> b)) rd.fail("malformed edge line");
    if (a < 1 || a > nv || b < 1 || b > nv) rd.fail("edge vertex index out of range");
    if (a == b) rd.fail("degenerate edge with equal endpoints");
    mesh.edges.push_back({static_cast<int>(a - 1), static_cast<int>(b - 1)});
  }
  for (long f = 0; f < nf; ++f) {
    if (!rd.next(fields)) rd.fail("unexpected end of file in face block");
    long k;
    if (!(fields >> k) || k < 3) rd.fail("malformed face line: bad edge count");
    Face face;
    for (long i = 0; i < k; ++i) {
      long se;
      if (!(fields >> se) || se == 0) rd.fail("malformed signed edge index");
      const long e = std::labs(se) - 1;
      if (e >= ne) rd.fail("face edge index out of range");
      face.edges.push_back(static_cast<int>(e));
      face.edge_signs.push_back(se > 0 ? +1 : -1);
    }
    // Recover the vertex loop from the signed edge chain and check closure.
    for (long i = 0; i < k; ++i) {
      const auto& ev = mesh.edges[face.edges[i]];
      const int from = face.edge_signs[i] > 0 ? ev[0] : ev[1];
      const int to = face.edge_signs[i] > 0 ? ev[1] : ev[0];
      if (i == 0)
        face.verts.push_back(from);
      else if (face.verts.back() != from)
        rd.fail("open face loop: consecutive edges do not chain");
      if (i + 1 < k)
        face.verts.push_back(to);
      else if (to != face.verts.front())
        rd.fail("open face loop: last edge does not close the loop");
    }
    mesh.faces.push_back(std::move(face));
  }
  for (long c = 0; c < nc; ++c) {
    if (!rd.next(fields)) rd.fail("unexpected end of file in cell block");
    long k;
    if (!(fields >> k) || k < 4) rd.fail("malformed cell line: bad face count");
    Cell cell;
    for (long i = 0; i < k; ++i) {
      long sf;
      if (!(fields >> sf) || sf == 0) rd.fail("malformed signed face index");
      const long f = std::labs(sf) - 1;
      if (f >= nf) rd.fail("cell face index out of range");
      cell.faces.push_back(static_cast<int>(f));
      cell.face_signs.push_back(sf > 0 ? +1 : -1);
    }
    mesh.cells.push_back(std::move(cell));
  }
  try {
    mesh.finalize();
  } catch (const MeshError& err) {
    throw IoError(std::string("polymesh parse error: ") + err.what());
  }
  return mesh;
}

PolyMesh read_poly_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  return read_poly_mesh(in);
}

void write_poly_mesh(const PolyMesh& mesh, std::ostream& out) {
  out << "polymesh 1\n";
  out << mesh.n_vertices() << " " << mesh.n_edges() << " " << mesh.n_faces() << " "
      << mesh.n_cells() << "\n";
  char buf[96];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& e : mesh.edges) out << e[0] + 1 << " " << e[1] + 1 << "\n";
  for (const Face& f : mesh.faces) {
    out << f.edges.size();
    for (size_t i = 0; i < f.edges.size(); ++i) out << " " << f.edge_signs[i] * (f.edges[i] + 1);
    out << "\n";
  }
  for (const Cell& c : mesh.cells) {
    out << c.faces.size();
    for (size_t i = 0; i < c.faces.size(); ++i) out << " " << c.face_signs[i] * (c.faces[i] + 1);
    out << "\n";
  }
  if (!out) throw IoError("write failure while emitting polymesh stream");
}

void write_poly_mesh_file(const PolyMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open mesh file for writing: " + path);
  write_poly_mesh(mesh, out);
}

MeshDiagnostics validate(const PolyMesh& mesh) {
  MeshDiagnostics diag;
  auto violation = [&diag](const std::string& s) { diag.violations.push_back(s); };

  const int nf = mesh.n_faces(), nc = mesh.n_cells();

  // Face loops: chained edges, planarity, simplicity.
  std::vector<Vec3> face_normal(nf, Vec3::Zero());
  std::vector<double> face_area(nf, 0.0), face_diam(nf, 0.0);
  diag.face_edge_ratio.assign(nf, 0.0);
  for (int f = 0; f < nf; ++f) {
    const Face& face = mesh.faces[f];
    const int k = static_cast<int>(face.verts.size());
    bool chained = true;
    double min_edge = std::numeric_limits<double>::max();
    for (int i = 0; i < k; ++i) {
      const int a = face.verts[i], b = face.verts[(i + 1) % k];
      const auto& ev = mesh.edges[face.edges[i]];
      const int from = face.edge_signs[i] > 0 ? ev[0] : ev[1];
      const int to = face.edge_signs[i] > 0 ? ev[1] : ev[0];
      if (from != a || to != b) chained = false;
      min_edge = std::min(min_edge, (mesh.vertices[a] - mesh.vertices[b]).norm());
    }
    if (!chained) violation(cat("face loop not closed by its signed edges: face", f));

    face_diam[f] = loop_diameter(mesh, face.verts);
    diag.face_edge_ratio[f] = face_diam[f] > 0 ? min_edge / face_diam[f] : 0.0;

    Vec3 n = newell_normal(mesh, face);
    face_area[f] = 0.5 * n.norm();
    if (face_area[f] <= 0) {
      violation(cat("degenerate zero-area face: face", f));
      continue;
    }
    n.normalize();
    face_normal[f] = n;

    const Vec3 center = vertex_mean(mesh, face.verts);
    double dev = 0.0;
    for (int v : face.verts) dev = std::max(dev, std::abs((mesh.vertices[v] - center).dot(n)));
    if (dev > 1e-12 * face_diam[f]) violation(cat("non-planar face beyond tolerance: face", f));

    // Simplicity check in the face plane.
    Vec3 t1 = (mesh.vertices[face.verts[1]] - mesh.vertices[face.verts[0]]);
    t1 = (t1 - t1.dot(n) * n).normalized();
    const Vec3 t2 = n.cross(t1);
    std::vector<Eigen::Vector2d> pts(k);
    for (int i = 0; i < k; ++i) {
      const Vec3 d = mesh.vertices[face.verts[i]] - center;
      pts[i] = Eigen::Vector2d(d.dot(t1), d.dot(t2));
    }
    for (int i = 0; i < k && k > 3; ++i)
      for (int j = i + 2; j < k; ++j) {
        if (i == 0 && j == k - 1) continue;
        if (segments_intersect_2d(pts[i], pts[(i + 1) % k], pts[j], pts[(j + 1) % k])) {
          violation(cat("self-intersecting face loop: face", f));
          i = k;
          break;
        }
      }
  }

  // Face-cell incidence and sign opposition.
  std::vector<std::vector<std::pair<int, int>>> incident(nf);  // (cell, sign)
  for (int c = 0; c < nc; ++c)
    for (size_t i = 0; i < mesh.cells[c].faces.size(); ++i)
      incident[mesh.cells[c].faces[i]].push_back({c, mesh.cells[c].face_signs[i]});
  for (int f = 0; f < nf; ++f) {
    if (incident[f].empty() || incident[f].size() > 2)
      violation(cat("face not incident to one or two cells: face", f));
    else if (incident[f].size() == 2 && incident[f][0].second * incident[f][1].second != -1)
      violation(cat("interior face without opposite cell signs: face", f));
  }

  // Per-cell checks: directed-edge closure, Euler formula, closed surface.
  diag.cell_face_ratio.assign(nc, 0.0);
  for (int c = 0; c < nc; ++c) {
    const Cell& cell = mesh.cells[c];
    std::map<std::pair<int, int>, int> directed;  // directed vertex pair -> count
    std::vector<int> cverts, cedges;
    Vec3 area_sum = Vec3::Zero();
    double abs_area = 0.0;
    for (size_t i = 0; i < cell.faces.size(); ++i) {
      const Face& face = mesh.faces[cell.faces[i]];
      const int sgn = cell.face_signs[i];
      const int k = static_cast<int>(face.verts.size());
      for (int q = 0; q < k; ++q) {
        int a = face.verts[q], b = face.verts[(q + 1) % k];
        if (sgn < 0) std::swap(a, b);  // outward traversal of this cell
        ++directed[{a, b}];
        cverts.push_back(a);
        cedges.push_back(face.edges[q]);
      }
      area_sum += sgn * face_area[cell.faces[i]] * face_normal[cell.faces[i]];
      abs_area += face_area[cell.faces[i]];
    }
    bool closure = true;
    for (const auto& [de, cnt] : directed) {
      if (cnt != 1 || directed.count({de.second, de.first}) == 0 ||
          directed.at({de.second, de.first}) != 1)
        closure = false;
    }
    if (!closure) violation(cat("cell boundary edge traversals are not paired: cell", c));
    if (abs_area > 0 && area_sum.norm() > 1e-12 * abs_area)
      violation(cat("cell boundary does not close (nonzero signed area): cell", c));

    std::sort(cverts.begin(), cverts.end());
    cverts.erase(std::unique(cverts.begin(), cverts.end()), cverts.end());
    std::sort(cedges.begin(), cedges.end());
    cedges.erase(std::unique(cedges.begin(), cedges.end()), cedges.end());
    const long euler = static_cast<long>(cverts.size()) - static_cast<long>(cedges.size()) +
                       static_cast<long>(cell.faces.size());
    if (euler != 2) violation(cat("cell violates Euler's formula V-E+F=2: cell", c));

    const double h_cell = loop_diameter(mesh, cverts);
    double min_hf = std::numeric_limits<double>::max();
    for (int f : cell.faces) min_hf = std::min(min_hf, face_diam[f]);
    diag.cell_face_ratio[c] = h_cell > 0 ? min_hf / h_cell : 0.0;
  }

  diag.min_cell_face_ratio =
      nc ? *std::min_element(diag.cell_face_ratio.begin(), diag.cell_face_ratio.end()) : 0.0;
  diag.min_face_edge_ratio =
      nf ? *std::min_element(diag.face_edge_ratio.begin(), diag.face_edge_ratio.end()) : 0.0;
  return diag;
}

std::string MeshDiagnostics::summary() const {
  std::ostringstream os;
  os << "violations: " << violations.size() << "\n";
  for (const auto& v : violations) os << "  - " << v << "\n";
  os << "min h_F/h_P: " << min_cell_face_ratio << "\n";
  os << "min h_e/h_F: " << min_face_edge_ratio << "\n";
  return os.str();
}

BoundaryTags classify_boundary(const PolyMesh& mesh) {
  BoundaryTags tags;
  tags.vertex_mask.assign(mesh.n_vertices(), 0);
  tags.edge_mask.assign(mesh.n_edges(), 0);
  tags.face_mask.assign(mesh.n_faces(), 0);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.face_cells[f][1] >= 0) continue;  // interior
    tags.face_mask[f] = 1;
    tags.faces.push_back(f);
    const Face& face = mesh.faces[f];
    for (int v : face.verts) tags.vertex_mask[v] = 1;
    for (int e : face.edges) tags.edge_mask[e] = 1;
  }
  for (int v = 0; v < mesh.n_vertices(); ++v)
    if (tags.vertex_mask[v]) tags.vertices.push_back(v);
  for (int e = 0; e < mesh.n_edges(); ++e)
    if (tags.edge_mask[e]) tags.edges.push_back(e);
  return tags;
}

}  // namespace mhdvem
