#pragma once

#include <vector>

#include "sedctrl/grid.hpp"

namespace sedctrl {

// Non-oscillatory third-order interpolation of point values at x_j + theta*dx,
// theta in [0,1], from the four values at vertices j-1, j, j+1, j+2.  Two
// quadratic candidates are blended with smoothness-adapted weights so that a
// discontinuity in the data does not produce overshoot.
double weno_cell_interpolate(double vm1, double v0, double v1, double v2, double theta);

// Interpolate a vertex-sampled function anywhere in [0,1].  Falls back to
// linear interpolation in the first and last interval where the four-point
// stencil would leave the grid.  Throws ValidationError if y is outside the
// domain (beyond a tiny round-off slack) or the value count does not match.
double weno_interpolate(const Grid& grid, const std::vector<double>& values, double y);

// Non-oscillatory reconstruction of the left-edge value of a cell from the
// cell averages (am1, a0, ap1) of itself and its two neighbours.  Third-order
// accurate on smooth data.
double weno_left_edge(double am1, double a0, double ap1);

}  // namespace sedctrl
