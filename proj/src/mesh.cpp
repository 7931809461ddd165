#include "romforge/mesh.hpp"

#include <algorithm>

namespace romforge::fem {

Mesh build_cantilever_mesh(int nx, int ny, double length, double height) {
  if (nx < 1 || ny < 1) throw ConfigError("mesh subdivisions must be >= 1");
  if (length <= 0.0 || height <= 0.0) throw ConfigError("mesh dimensions must be positive");

  Mesh mesh;
  mesh.length = length;
  mesh.height = height;
  mesh.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));

  const double hx = length / nx;
  const double hy = height / ny;
  auto node_id = [nx](int i, int j) { return j * (nx + 1) + i; };

  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.nodes.push_back(Vec2(i * hx, j * hy));

  mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = node_id(i, j);
      const int n10 = node_id(i + 1, j);
      const int n01 = node_id(i, j + 1);
      const int n11 = node_id(i + 1, j + 1);
      if (j < ny / 2) {
        mesh.triangles.push_back({n00, n10, n11});
        mesh.triangles.push_back({n00, n11, n01});
      } else {
        mesh.triangles.push_back({n00, n10, n01});
        mesh.triangles.push_back({n10, n11, n01});
      }
    }
  }

  for (int j = 0; j <= ny; ++j) {
    mesh.left_edge.push_back(node_id(0, j));
    mesh.right_edge.push_back(node_id(nx, j));
  }
  return mesh;
}

double triangle_area(const Mesh& mesh, int tri) {
  const auto& t = mesh.triangles.at(static_cast<std::size_t>(tri));
  const Vec2 a = mesh.nodes[static_cast<std::size_t>(t[0])];
  const Vec2 b = mesh.nodes[static_cast<std::size_t>(t[1])];
  const Vec2 c = mesh.nodes[static_cast<std::size_t>(t[2])];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

void write_mesh_listing(const Mesh& mesh, std::ostream& os) {
  os << "# nodes " << mesh.node_count() << "\n";
  for (int i = 0; i < mesh.node_count(); ++i) {
    const auto& p = mesh.nodes[static_cast<std::size_t>(i)];
    os << i << " " << p.x() << " " << p.y() << "\n";
  }
  os << "# triangles " << mesh.triangle_count() << "\n";
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& t = mesh.triangles[static_cast<std::size_t>(e)];
    os << e << " " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
}

}  // namespace romforge::fem
