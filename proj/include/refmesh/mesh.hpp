#pragma once

#include <array>
#include <string>
#include <vector>

#include "refmesh/geometry.hpp"

namespace refmesh {

// Indexed triangle mesh. One frame of a time-varying sequence.
// Immutable by convention once built; all free functions below are pure.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    int frame_index = 0;
};

struct MeshSequence {
    std::vector<TriMesh> frames;
    std::string name;
};

struct WatertightReport {
    bool watertight = false;
    int boundary_edge_count = 0;
};

// Throws if a face index is out of range or a face repeats a vertex.
void validate_mesh(const TriMesh& mesh);

// watertight iff every undirected edge is shared by exactly two faces.
// Edges with one incident face are counted as boundary edges.
WatertightReport validate_watertight(const TriMesh& mesh);

// Throws EmptyMesh when the mesh has no vertices.
Aabb bounding_box(const TriMesh& mesh);

// Label faces by face-adjacency (shared undirected edge) equivalence classes.
// Returns one label in [0, count) per face.
std::vector<int> face_components(const TriMesh& mesh, int* component_count = nullptr);

// Per-vertex component labels induced by face components. Vertices used by no
// face get label -1.
std::vector<int> vertex_components(const TriMesh& mesh, int* component_count = nullptr);

// Sum of signed tetrahedron volumes; positive for outward-oriented closed meshes.
double signed_volume(const TriMesh& mesh);
double signed_volume(const TriMesh& mesh, const std::vector<int>& face_subset);

// Copy with every face of a negative-volume component flipped, so each closed
// component has outward orientation.
TriMesh with_outward_orientation(const TriMesh& mesh);

// Area-weighted per-vertex normals, zero vector for vertices on no face.
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

double surface_area(const TriMesh& mesh);

// Smallest vertex-to-vertex distance between distinct face components.
// Returns +inf for meshes with a single component.
double min_component_gap(const TriMesh& mesh);

}  // namespace refmesh
