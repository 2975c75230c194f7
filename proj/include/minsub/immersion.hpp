#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "minsub/metric.hpp"

namespace minsub {

enum class Topology { ClosedCurve, OpenCurve, GridPatch };

const char* topology_name(Topology t);

struct GridShape {
  int nu = 0, nv = 0;
  bool periodic_u = false, periodic_v = false;
};

// Vertices in ambient chart coordinates. Open curves keep their two
// endpoints as boundary; grid patches keep the nodes on non-periodic sides.
class DiscreteImmersion {
 public:
  DiscreteImmersion() = default;
  static DiscreteImmersion closed_curve(std::vector<Vec> vertices);
  static DiscreteImmersion open_curve(std::vector<Vec> vertices);
  // Vertex (i, j) is stored at index j * nu + i.
  static DiscreteImmersion grid_patch(std::vector<Vec> vertices, GridShape shape);

  Topology topology() const { return topology_; }
  const GridShape& grid() const { return grid_; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const Vec& vertex(int i) const { return vertices_[i]; }
  int size() const { return static_cast<int>(vertices_.size()); }
  int ambient_dim() const { return vertices_.empty() ? 0 : static_cast<int>(vertices_[0].size()); }
  // Intrinsic dimension: 1 for curves, 2 for patches.
  int intrinsic_dim() const { return topology_ == Topology::GridPatch ? 2 : 1; }
  const std::vector<int>& boundary_ids() const { return boundary_; }
  const std::vector<char>& is_boundary() const { return is_boundary_; }

  // Same connectivity, new positions.
  DiscreteImmersion with_vertices(std::vector<Vec> vertices) const;

  // Neighbouring vertices (curve neighbours, or the 4-neighbourhood on grids).
  std::vector<int> neighbours(int i) const;
  // Edges (a, b) of a curve in order.
  std::vector<std::pair<int, int>> edges() const;

  void write(std::ostream& os) const;
  static DiscreteImmersion read(std::istream& is);
  void save(const std::string& path) const;
  static DiscreteImmersion load(const std::string& path);

 private:
  void finish();

  Topology topology_ = Topology::ClosedCurve;
  GridShape grid_;
  std::vector<Vec> vertices_;
  std::vector<int> boundary_;
  std::vector<char> is_boundary_;
};

}  // namespace minsub
