#pragma once

#include "sedctrl/errors.hpp"

namespace sedctrl {

// Uniform vertex grid on [0,1]: vertices l = 0..intervals at l * dx.
struct Grid {
  int intervals = 0;  // L
  double dx = 0.0;    // 1 / L

  static Grid with_intervals(int L) {
    if (L < 3) throw ValidationError("grid: need at least 3 intervals");
    Grid g;
    g.intervals = L;
    g.dx = 1.0 / L;
    return g;
  }
  static Grid with_vertices(int n) { return with_intervals(n - 1); }

  int vertex_count() const { return intervals + 1; }
  double vertex(int l) const { return static_cast<double>(l) / intervals; }
};

// Vertex-centred control volumes over the same vertices: cell l surrounds
// vertex l; the two boundary cells are half-width, so the cell sizes sum to 1.
struct CellGrid {
  int intervals = 0;  // L; cells 0..L
  double dx = 0.0;

  static CellGrid with_intervals(int L) {
    if (L < 3) throw ValidationError("cell grid: need at least 3 intervals");
    CellGrid g;
    g.intervals = L;
    g.dx = 1.0 / L;
    return g;
  }
  static CellGrid with_vertices(int n) { return with_intervals(n - 1); }

  int cell_count() const { return intervals + 1; }
  double cell_size(int l) const { return (l == 0 || l == intervals) ? 0.5 * dx : dx; }
  double center(int l) const { return static_cast<double>(l) / intervals; }
  // Interface between cells l and l+1, for l = 0..intervals-1.
  double interface_pos(int l) const { return (l + 0.5) * dx; }

  // Index of the cell that contains x, with the larger index winning when x
  // sits exactly on a shared interface (a small relative slack absorbs
  // floating-point representation of midpoints).
  int containing_cell(double x) const {
    int l = static_cast<int>(x * intervals + 0.5 + 1e-9);
    if (l < 0) l = 0;
    if (l > intervals) l = intervals;
    return l;
  }
};

}  // namespace sedctrl
