#include "minsub/immersion.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "minsub/errors.hpp"

namespace minsub {

const char* topology_name(Topology t) {
  switch (t) {
    case Topology::ClosedCurve: return "closed_curve";
    case Topology::OpenCurve: return "open_curve";
    case Topology::GridPatch: return "grid_patch";
  }
  return "?";
}

namespace {

void check_vertices(const std::vector<Vec>& v) {
  if (v.empty()) fail(ErrorCode::InvalidParams, "immersion has no vertices");
  const auto d = v[0].size();
  if (d < 2 || d > kMaxDim) fail(ErrorCode::InvalidParams, "ambient dimension must be 2 to 4");
  for (const auto& p : v) {
    if (p.size() != d) fail(ErrorCode::InvalidParams, "vertices differ in dimension");
    if (!p.allFinite()) fail(ErrorCode::InvalidParams, "vertex with non-finite coordinate");
  }
}

void check_distinct(const Vec& a, const Vec& b, int i) {
  if ((a - b).cwiseAbs().maxCoeff() == 0.0)
    fail(ErrorCode::DegenerateElement, "consecutive vertices coincide at index " + std::to_string(i));
}

}  // namespace

DiscreteImmersion DiscreteImmersion::closed_curve(std::vector<Vec> vertices) {
  check_vertices(vertices);
  if (vertices.size() < 8) fail(ErrorCode::InvalidParams, "closed curve needs at least 8 vertices");
  DiscreteImmersion im;
  im.topology_ = Topology::ClosedCurve;
  im.vertices_ = std::move(vertices);
  for (int i = 0; i < im.size(); ++i) check_distinct(im.vertices_[i], im.vertices_[(i + 1) % im.size()], i);
  im.finish();
  return im;
}

DiscreteImmersion DiscreteImmersion::open_curve(std::vector<Vec> vertices) {
  check_vertices(vertices);
  if (vertices.size() < 3) fail(ErrorCode::InvalidParams, "open curve needs at least 3 vertices");
  DiscreteImmersion im;
  im.topology_ = Topology::OpenCurve;
  im.vertices_ = std::move(vertices);
  for (int i = 0; i + 1 < im.size(); ++i) check_distinct(im.vertices_[i], im.vertices_[i + 1], i);
  im.finish();
  return im;
}

DiscreteImmersion DiscreteImmersion::grid_patch(std::vector<Vec> vertices, GridShape shape) {
  check_vertices(vertices);
  if (shape.nu < 4 || shape.nv < 4) fail(ErrorCode::InvalidParams, "grid patch needs at least 4x4 nodes");
  if (static_cast<long>(vertices.size()) != static_cast<long>(shape.nu) * shape.nv)
    fail(ErrorCode::InvalidParams, "grid patch vertex count does not match its shape");
  DiscreteImmersion im;
  im.topology_ = Topology::GridPatch;
  im.grid_ = shape;
  im.vertices_ = std::move(vertices);
  for (int j = 0; j < shape.nv; ++j)
    for (int i = 0; i + 1 < shape.nu; ++i)
      check_distinct(im.vertices_[j * shape.nu + i], im.vertices_[j * shape.nu + i + 1], j * shape.nu + i);
  for (int j = 0; j + 1 < shape.nv; ++j)
    for (int i = 0; i < shape.nu; ++i)
      check_distinct(im.vertices_[j * shape.nu + i], im.vertices_[(j + 1) * shape.nu + i], j * shape.nu + i);
  im.finish();
  return im;
}

void DiscreteImmersion::finish() {
  boundary_.clear();
  is_boundary_.assign(vertices_.size(), 0);
  if (topology_ == Topology::OpenCurve) {
    boundary_ = {0, size() - 1};
  } else if (topology_ == Topology::GridPatch) {
    for (int j = 0; j < grid_.nv; ++j)
      for (int i = 0; i < grid_.nu; ++i) {
        const bool edge_u = !grid_.periodic_u && (i == 0 || i == grid_.nu - 1);
        const bool edge_v = !grid_.periodic_v && (j == 0 || j == grid_.nv - 1);
        if (edge_u || edge_v) boundary_.push_back(j * grid_.nu + i);
      }
  }
  for (int b : boundary_) is_boundary_[b] = 1;
}

DiscreteImmersion DiscreteImmersion::with_vertices(std::vector<Vec> vertices) const {
  switch (topology_) {
    case Topology::ClosedCurve: return closed_curve(std::move(vertices));
    case Topology::OpenCurve: return open_curve(std::move(vertices));
    case Topology::GridPatch: return grid_patch(std::move(vertices), grid_);
  }
  return {};
}

std::vector<int> DiscreteImmersion::neighbours(int i) const {
  std::vector<int> out;
  const int n = size();
  if (topology_ == Topology::ClosedCurve) {
    out = {(i + n - 1) % n, (i + 1) % n};
  } else if (topology_ == Topology::OpenCurve) {
    if (i > 0) out.push_back(i - 1);
    if (i + 1 < n) out.push_back(i + 1);
  } else {
    const int nu = grid_.nu, nv = grid_.nv;
    const int a = i % nu, b = i / nu;
    auto add = [&](int u, int v) {
      if (grid_.periodic_u) u = (u + nu) % nu;
      if (grid_.periodic_v) v = (v + nv) % nv;
      if (u >= 0 && u < nu && v >= 0 && v < nv && !(u == a && v == b)) out.push_back(v * nu + u);
    };
    add(a - 1, b);
    add(a + 1, b);
    add(a, b - 1);
    add(a, b + 1);
  }
  return out;
}

std::vector<std::pair<int, int>> DiscreteImmersion::edges() const {
  std::vector<std::pair<int, int>> out;
  const int n = size();
  const int m = topology_ == Topology::ClosedCurve ? n : n - 1;
  for (int i = 0; i < m; ++i) out.emplace_back(i, (i + 1) % n);
  return out;
}

void DiscreteImmersion::write(std::ostream& os) const {
  os << "immersion " << topology_name(topology_) << ' ' << ambient_dim() << ' ' << size();
  if (topology_ == Topology::GridPatch)
    os << ' ' << grid_.nu << ' ' << grid_.nv << ' ' << int(grid_.periodic_u) << ' '
       << int(grid_.periodic_v);
  os << '\n';
  char buf[40];
  for (const Vec& v : vertices_) {
    for (int k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", v[k]);
      os << (k ? " " : "") << buf;
    }
    os << '\n';
  }
}

DiscreteImmersion DiscreteImmersion::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::IoError, "empty immersion stream");
  std::istringstream head(line);
  std::string magic, topo;
  int dim = 0, count = 0;
  head >> magic >> topo >> dim >> count;
  if (!head || magic != "immersion") fail(ErrorCode::IoError, "bad immersion header: " + line);
  if (dim < 2 || dim > kMaxDim || count < 1) fail(ErrorCode::IoError, "bad immersion sizes: " + line);
  GridShape shape;
  if (topo == "grid_patch") {
    int pu = 0, pv = 0;
    head >> shape.nu >> shape.nv >> pu >> pv;
    if (!head) fail(ErrorCode::IoError, "grid patch header needs nu nv pu pv");
    shape.periodic_u = pu != 0;
    shape.periodic_v = pv != 0;
  } else if (topo != "closed_curve" && topo != "open_curve") {
    fail(ErrorCode::IoError, "unknown topology '" + topo + "'");
  }
  std::vector<Vec> verts;
  verts.reserve(count);
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line)) fail(ErrorCode::IoError, "immersion stream ended early");
    const char* s = line.c_str();
    Vec v(dim);
    for (int k = 0; k < dim; ++k) {
      char* end = nullptr;
      v[k] = std::strtod(s, &end);
      if (end == s) fail(ErrorCode::IoError, "bad vertex line " + std::to_string(i + 2));
      s = end;
    }
    verts.push_back(v);
  }
  if (topo == "closed_curve") return closed_curve(std::move(verts));
  if (topo == "open_curve") return open_curve(std::move(verts));
  return grid_patch(std::move(verts), shape);
}

void DiscreteImmersion::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path);
  write(os);
  if (!os) fail(ErrorCode::IoError, "write failed for " + path);
}

DiscreteImmersion DiscreteImmersion::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read(is);
}

}  // namespace minsub
