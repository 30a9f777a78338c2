#include "sedctrl/weno.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "sedctrl/errors.hpp"

namespace sedctrl {

namespace {
constexpr double kEps = 1e-6;  // regularisation in the adaptive weights
}

double weno_cell_interpolate(double vm1, double v0, double v1, double v2, double theta) {
  // Quadratic through vertices j-1, j, j+1 evaluated at theta (node offsets -1, 0, 1).
  const double qm = vm1 * 0.5 * theta * (theta - 1.0) + v0 * (1.0 - theta * theta) +
                    v1 * 0.5 * theta * (theta + 1.0);
  // Quadratic through vertices j, j+1, j+2 (node offsets 0, 1, 2).
  const double qp = v0 * 0.5 * (theta - 1.0) * (theta - 2.0) - v1 * theta * (theta - 2.0) +
                    v2 * 0.5 * theta * (theta - 1.0);
  // Ideal weights recover the four-point cubic on smooth data.
  const double cm = (2.0 - theta) / 3.0;
  const double cp = (1.0 + theta) / 3.0;
  const double bm = (vm1 - 2.0 * v0 + v1) * (vm1 - 2.0 * v0 + v1);
  const double bp = (v0 - 2.0 * v1 + v2) * (v0 - 2.0 * v1 + v2);
  const double am = cm / ((kEps + bm) * (kEps + bm));
  const double ap = cp / ((kEps + bp) * (kEps + bp));
  return (am * qm + ap * qp) / (am + ap);
}

double weno_interpolate(const Grid& grid, const std::vector<double>& values, double y) {
  const int L = grid.intervals;
  if (values.size() != static_cast<std::size_t>(grid.vertex_count())) {
    throw ValidationError("weno_interpolate: value count " + std::to_string(values.size()) +
                          " does not match grid with " + std::to_string(grid.vertex_count()) +
                          " vertices");
  }
  if (!(y >= -1e-12) || !(y <= 1.0 + 1e-12)) {
    throw ValidationError("weno_interpolate: query point " + std::to_string(y) +
                          " outside [0,1]");
  }
  if (y <= 0.0) return values.front();
  if (y >= 1.0) return values.back();

  int j = static_cast<int>(y * L);
  if (j > L - 1) j = L - 1;
  const double theta = y * L - j;
  if (j == 0 || j == L - 1) {
    // Four-point stencil would leave the grid; linear interpolation is enough
    // this close to the boundary.
    return (1.0 - theta) * values[j] + theta * values[j + 1];
  }
  return weno_cell_interpolate(values[j - 1], values[j], values[j + 1], values[j + 2], theta);
}

double weno_left_edge(double am1, double a0, double ap1) {
  const double qm = 0.5 * (am1 + a0);         // from averages of cells j-1, j
  const double qp = 0.5 * (3.0 * a0 - ap1);   // from averages of cells j, j+1
  const double bm = (a0 - am1) * (a0 - am1);
  const double bp = (ap1 - a0) * (ap1 - a0);
  const double wm = (2.0 / 3.0) / ((kEps + bm) * (kEps + bm));
  const double wp = (1.0 / 3.0) / ((kEps + bp) * (kEps + bp));
  return (wm * qm + wp * qp) / (wm + wp);
}

}  // namespace sedctrl
