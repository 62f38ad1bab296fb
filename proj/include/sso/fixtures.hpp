#pragma once

// Procedural benchmark structures. Node ids are 0-based grid indices; element
// ids continue after the last node-independent counter starting at 1.

#include "sso/core.hpp"
#include "sso/model.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace sso::fixtures {

/// A generated model plus named reference nodes (e.g. "center").
struct Fixture {
  StructuralModel model;
  std::map<std::string, int> marks;
};

inline constexpr Mask6 kPinned{true, true, true, false, false, false};
inline constexpr Mask6 kFixed{true, true, true, true, true, true};
/// Pin that also restrains the out-of-plane rotations of an arch in the X-Z plane.
inline constexpr Mask6 kPlanarPin{true, true, true, true, false, true};

// ---------------------------------------------------------------------------

struct Arch2dOptions {
  int elements = 100;
  double span = 10.0, rise = 5.0;
  double E = 1.99e8, nu = 0.3;
  double Iy = 6.6e-5, Iz = 3.3e-6, A = 4.3e-3;
  double load = 500.0;  ///< downward, on every interior node
};

/// Parabolic arch in the X-Z plane, pinned at both ends.
inline Fixture arch2d(const Arch2dOptions& o = {}) {
  if (o.elements < 2) throw Error("arch2d: need at least 2 elements");
  ModelBuilder b;
  const int n = o.elements;
  for (int i = 0; i <= n; ++i) {
    const double x = o.span * i / n;
    const double s = 2.0 * x / o.span - 1.0;
    b.add_node(i, x, 0.0, o.rise * (1.0 - s * s));
  }
  const double G = o.E / (2.0 * (1.0 + o.nu));
  for (int i = 0; i < n; ++i) b.add_beamcol({i + 1, i, i + 1, o.E, G, o.Iy, o.Iz, o.Iy + o.Iz, o.A});
  b.add_support(0, kPlanarPin).add_support(n, kPlanarPin);
  for (int i = 1; i < n; ++i) b.add_nodal_load(i, {0, 0, -o.load, 0, 0, 0});
  Fixture f{b.finalize(), {}};
  if (n % 2 == 0) f.marks["center"] = n / 2;
  return f;
}

// ---------------------------------------------------------------------------

struct BarrelOptions {
  int nx = 20, ny = 20;
  double lx = 19.0, ly = 19.0, rise = 4.5;
  double E = 1.99e8, nu = 0.2, t = 0.25;
  double load = 500.0;  ///< downward, on every node
};

/// Parabolic barrel vault curved along X, pinned along the ground lines
/// x = 0 and x = lx.
inline Fixture barrel(const BarrelOptions& o = {}) {
  ModelBuilder b;
  auto id = [&](int i, int j) { return j * (o.nx + 1) + i; };
  for (int j = 0; j <= o.ny; ++j)
    for (int i = 0; i <= o.nx; ++i) {
      const double x = o.lx * i / o.nx, y = o.ly * j / o.ny;
      const double s = 2.0 * x / o.lx - 1.0;
      b.add_node(id(i, j), x, y, o.rise * (1.0 - s * s));
    }
  int e = 1;
  for (int j = 0; j < o.ny; ++j)
    for (int i = 0; i < o.nx; ++i)
      b.add_quad({e++, {id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)}, o.t, o.E, o.nu, 1.0, 1.0});
  for (int j = 0; j <= o.ny; ++j) {
    b.add_support(id(0, j), kPinned);
    b.add_support(id(o.nx, j), kPinned);
  }
  for (int j = 0; j <= o.ny; ++j)
    for (int i = 0; i <= o.nx; ++i) b.add_nodal_load(id(i, j), {0, 0, -o.load, 0, 0, 0});
  Fixture f{b.finalize(), {}};
  f.marks["center"] = id(o.nx / 2, o.ny / 2);
  return f;
}

// ---------------------------------------------------------------------------

struct DomeOptions {
  int n = 16;
  double span = 6.0, rise = 1.8;
  double E = 2.0e7, nu = 0.3, t = 0.15;
  double load = 500.0;
  std::string supports = "corners";  ///< "corners" | "edge_mid"
  std::string loads = "center";      ///< "center" | "corners" | "corners+center" | "all"
};

/// Square dome z = rise (1 − ξ²)(1 − η²) over ξ, η ∈ [−1, 1], n × n quads.
inline Fixture dome(const DomeOptions& o = {}) {
  if (o.n < 2 || o.n % 2) throw Error("dome: n must be an even number >= 2");
  ModelBuilder b;
  const int n = o.n;
  auto id = [&](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double xi = 2.0 * i / n - 1.0, eta = 2.0 * j / n - 1.0;
      b.add_node(id(i, j), o.span * i / n, o.span * j / n, o.rise * (1.0 - xi * xi) * (1.0 - eta * eta));
    }
  int e = 1;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      b.add_quad({e++, {id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)}, o.t, o.E, o.nu, 1.0, 1.0});
  const std::vector<int> corners{id(0, 0), id(n, 0), id(n, n), id(0, n)};
  const std::vector<int> mids{id(n / 2, 0), id(n, n / 2), id(n / 2, n), id(0, n / 2)};
  if (o.supports == "corners") {
    for (int c : corners) b.add_support(c, kPinned);
  } else if (o.supports == "edge_mid") {
    for (int c : mids) b.add_support(c, kPinned);
  } else {
    throw Error("dome: unknown support layout '" + o.supports + "'");
  }
  const int center = id(n / 2, n / 2);
  if (o.loads == "all") {
    for (int k = 0; k < (n + 1) * (n + 1); ++k) b.add_nodal_load(k, {0, 0, -o.load, 0, 0, 0});
  } else if (o.loads == "center" || o.loads == "corners+center") {
    b.add_nodal_load(center, {0, 0, -o.load, 0, 0, 0});
  }
  if (o.loads == "corners" || o.loads == "corners+center") {
    for (int c : corners) b.add_nodal_load(c, {0, 0, -o.load, 0, 0, 0});
  } else if (o.loads != "center" && o.loads != "all") {
    throw Error("dome: unknown load layout '" + o.loads + "'");
  }
  Fixture f{b.finalize(), {}};
  f.marks["center"] = center;
  return f;
}

// ---------------------------------------------------------------------------

struct GridshellOptions {
  int nx = 20, ny = 10;  ///< nodes per direction
  double lx = 19.0, ly = 9.0;
  double amplitude = 0.3;  ///< initial saddle-plus-bump height
  double E = 1.0e7, nu = 0.3;
  double depth = 0.2, width = 0.1;  ///< rectangular section
  double load = 1.0;  ///< downward, on every free node
};

/// Triangulated beam grid pinned at its four corners. The initial surface
/// mixes a bump and a saddle so that it has curvature of both signs.
inline Fixture gridshell(const GridshellOptions& o = {}) {
  if (o.nx < 2 || o.ny < 2) throw Error("gridshell: need at least 2 x 2 nodes");
  ModelBuilder b;
  auto id = [&](int i, int j) { return j * o.nx + i; };
  for (int j = 0; j < o.ny; ++j)
    for (int i = 0; i < o.nx; ++i) {
      const double x = o.lx * i / (o.nx - 1), y = o.ly * j / (o.ny - 1);
      const double xi = 2.0 * x / o.lx - 1.0, eta = 2.0 * y / o.ly - 1.0;
      const double z = o.amplitude * (0.5 * (1.0 - xi * xi) * (1.0 - eta * eta) + 0.5 * xi * eta);
      b.add_node(id(i, j), x, y, z);
    }
  const double A = o.depth * o.width;
  const double Iy = o.width * std::pow(o.depth, 3) / 12.0;  // strong axis, bending in the vertical plane
  const double Iz = o.depth * std::pow(o.width, 3) / 12.0;
  const double a = std::max(o.depth, o.width), bb = std::min(o.depth, o.width);
  const double J = a * std::pow(bb, 3) * (1.0 / 3.0 - 0.21 * bb / a * (1.0 - std::pow(bb / a, 4) / 12.0));
  const double G = o.E / (2.0 * (1.0 + o.nu));
  int e = 1;
  auto beam = [&](int p, int q) { b.add_beamcol({e++, p, q, o.E, G, Iy, Iz, J, A}); };
  for (int j = 0; j < o.ny; ++j)
    for (int i = 0; i < o.nx; ++i) {
      if (i + 1 < o.nx) beam(id(i, j), id(i + 1, j));
      if (j + 1 < o.ny) beam(id(i, j), id(i, j + 1));
      if (i + 1 < o.nx && j + 1 < o.ny) beam(id(i, j), id(i + 1, j + 1));
    }
  const std::vector<int> corners{id(0, 0), id(o.nx - 1, 0), id(o.nx - 1, o.ny - 1), id(0, o.ny - 1)};
  for (int c : corners) b.add_support(c, kPinned);
  for (int j = 0; j < o.ny; ++j)
    for (int i = 0; i < o.nx; ++i) {
      const int k = id(i, j);
      if (std::find(corners.begin(), corners.end(), k) == corners.end()) b.add_nodal_load(k, {0, 0, -o.load, 0, 0, 0});
    }
  Fixture f{b.finalize(), {}};
  f.marks["center"] = id(o.nx / 2, o.ny / 2);
  return f;
}

// ---------------------------------------------------------------------------

struct MultispanOptions {
  int spans = 100;
  int elements_per_span = 2;
  double span = 30.0, rise = 10.0;
  double E = 2.0e8, nu = 0.3;
  double Iy = 1.0e-2, Iz = 5.0e-3, A = 0.1;
  double load = 10.0;  ///< downward, on every node between piers
};

/// Chain of parabolic arches sharing pier nodes; DOF = 6 (spans·n + 1).
inline Fixture multispan_arch(const MultispanOptions& o = {}) {
  if (o.spans < 1 || o.elements_per_span < 2) throw Error("multispan arch: need >= 1 span and >= 2 elements per span");
  ModelBuilder b;
  const int n = o.elements_per_span;
  const int total = o.spans * n;
  for (int k = 0; k <= total; ++k) {
    const int local = k % n;
    const double s = 2.0 * local / n - 1.0;
    b.add_node(k, o.span * k / n, 0.0, o.rise * (1.0 - s * s));
  }
  const double G = o.E / (2.0 * (1.0 + o.nu));
  for (int k = 0; k < total; ++k) b.add_beamcol({k + 1, k, k + 1, o.E, G, o.Iy, o.Iz, o.Iy + o.Iz, o.A});
  for (int k = 0; k <= total; k += n) b.add_support(k, kPlanarPin);
  for (int k = 0; k <= total; ++k)
    if (k % n) b.add_nodal_load(k, {0, 0, -o.load, 0, 0, 0});
  return {b.finalize(), {}};
}

// ---------------------------------------------------------------------------

struct PlateOptions {
  int n = 32;
  double a = 1.0, t = 0.01;
  double E = 1.0e7, nu = 0.3;
  double load = 1.0;  ///< central point load, downward
};

/// Flat square plate, simply supported (UZ, with in-plane translations held)
/// on all four edges, point load at the center.
inline Fixture ss_plate(const PlateOptions& o = {}) {
  if (o.n < 2 || o.n % 2) throw Error("plate: n must be an even number >= 2");
  ModelBuilder b;
  const int n = o.n;
  auto id = [&](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) b.add_node(id(i, j), o.a * i / n, o.a * j / n, 0.0);
  int e = 1;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      b.add_quad({e++, {id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)}, o.t, o.E, o.nu, 1.0, 1.0});
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      if (i == 0 || j == 0 || i == n || j == n) b.add_support(id(i, j), kPinned);
  const int center = id(n / 2, n / 2);
  b.add_nodal_load(center, {0, 0, -o.load, 0, 0, 0});
  Fixture f{b.finalize(), {}};
  f.marks["center"] = center;
  return f;
}

}  // namespace sso::fixtures
