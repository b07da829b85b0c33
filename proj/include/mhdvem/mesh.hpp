// Polyhedral mesh with signed face/cell incidence, generators for the cube
// and Kuhn-tetrahedral families, ASCII (de)serialization, validation, and
// boundary classification.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mhdvem {

using Vec3 = Eigen::Vector3d;

struct Face {
  // Vertex loop, counter-clockwise with respect to the stored normal.
  std::vector<int> verts;
  // edges[i] connects verts[i] -> verts[(i+1) % size]; signs[i] = +1 when the
  // stored edge orientation agrees with the loop direction.
  std::vector<int> edges;
  std::vector<int> edge_signs;
};

struct Cell {
  std::vector<int> faces;
  // +1 when the stored face normal points out of this cell.
  std::vector<int> face_signs;
};

struct PolyMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 2>> edges;  // oriented v0 -> v1
  std::vector<Face> faces;
  std::vector<Cell> cells;

  // Derived: the up-to-two cells incident to each face, -1 when absent.
  std::vector<std::array<int, 2>> face_cells;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }

  // Rebuilds face_cells; throws MeshError on out-of-range indices.
  void finalize();
};

struct BoundaryTags {
  std::vector<int> vertices, edges, faces;  // sorted index sets
  std::vector<std::uint8_t> vertex_mask, edge_mask, face_mask;
};

struct MeshDiagnostics {
  std::vector<std::string> violations;
  // Shape quality: per cell min_F h_F/h_P, per face min_e h_e/h_F.
  std::vector<double> cell_face_ratio;
  std::vector<double> face_edge_ratio;
  double min_cell_face_ratio = 0.0;
  double min_face_edge_ratio = 0.0;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

PolyMesh build_cube_mesh(int n);
PolyMesh build_tet_mesh(int n);

PolyMesh read_poly_mesh(std::istream& in);
PolyMesh read_poly_mesh_file(const std::string& path);
void write_poly_mesh(const PolyMesh& mesh, std::ostream& out);
void write_poly_mesh_file(const PolyMesh& mesh, const std::string& path);

MeshDiagnostics validate(const PolyMesh& mesh);
BoundaryTags classify_boundary(const PolyMesh& mesh);

// Assembles a polyhedral mesh from a cell list given as vertex-index loops
// per face per cell (outward orientation), deduplicating shared entities.
// Used by the generators and by test fixtures.
PolyMesh mesh_from_cell_faces(std::vector<Vec3> vertices,
                              const std::vector<std::vector<std::vector<int>>>& cell_faces);

}  // namespace mhdvem
