#pragma once

#include <array>
#include <ostream>
#include <vector>

#include "romforge/common.hpp"

namespace romforge::fem {

// Triangulated rectangle clamped on its left edge, loaded on its right edge.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  // CCW node indices
  std::vector<int> left_edge;                 // nodes with x == 0, sorted by y
  std::vector<int> right_edge;                // nodes with x == length, sorted by y
  double length = 0.0;
  double height = 0.0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
};

// nx-by-ny grid of cells, each split into two triangles.  Cells in the lower
// half use the lower-left/upper-right diagonal, cells in the upper half the
// mirrored one, so for even ny the mesh is symmetric about y = height/2.
Mesh build_cantilever_mesh(int nx, int ny, double length, double height);

double triangle_area(const Mesh& mesh, int tri);

// Plain-text listing: "id x y" per node, then "id n1 n2 n3" per triangle.
void write_mesh_listing(const Mesh& mesh, std::ostream& os);

}  // namespace romforge::fem
