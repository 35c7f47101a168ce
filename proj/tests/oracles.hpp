// Independent reference implementations used to check the library. These
// deliberately avoid the library's own code paths: cross products are
// expanded componentwise, rotations come from angle-sum recursions, motor
// responses from the closed-form geometric recursion, and the QP solutions
// from brute-force grid refinement.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::Vector3d cross3(const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
  return {a.y() * b.z() - a.z() * b.y(),
          a.z() * b.x() - a.x() * b.z(),
          a.x() * b.y() - a.y() * b.x()};
}

/// Discrete forward-Euler first-order response after n steps:
/// u_n = target + (u_0 - target) * (1 - dt/tau)^n.
inline double geometric_response(double u_start, double target, double dt,
                                 double tau, int n_steps) {
  return target + (u_start - target) * std::pow(1.0 - dt / tau, n_steps);
}

/// Steps of the geometric recursion needed to close 95% of the gap.
inline int steps_to_fraction(double dt, double tau, double fraction) {
  int n = 0;
  double remaining = 1.0;
  const double decay = 1.0 - dt / tau;
  while (remaining > 1.0 - fraction) {
    remaining *= decay;
    ++n;
  }
  return n;
}

/// Rotation about a fixed axis by a given angle, built from the explicit
/// Rodrigues formula with the componentwise cross product above.
inline Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis,
                                     double angle) {
  const Eigen::Vector3d n = axis.normalized();
  Eigen::Matrix3d K;
  K << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K +
         (1.0 - std::cos(angle)) * K * K;
}

/// Brute-force 2-D minimization over a box-constrained feasible set by
/// coarse-to-fine grid refinement. `objective` is evaluated only at points
/// where `feasible` holds; returns the best objective found (+inf if no
/// feasible point was seen). Each level shrinks the search window around
/// the incumbent by roughly 10x.
struct GridResult {
  Eigen::Vector2d x;
  double objective;
};

inline GridResult grid_minimize(
    const std::function<double(const Eigen::Vector2d&)>& objective,
    const std::function<bool(const Eigen::Vector2d&)>& feasible,
    const Eigen::Vector2d& center, double half_range,
    double resolution = 1e-7, int points_per_axis = 41) {
  Eigen::Vector2d best_x = center;
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::Vector2d c = center;
  double r = half_range;
  // Refine until the grid cell is below `resolution`. When the incumbent
  // moves a long way within one level (a thin feasible wedge whose vertex
  // sits many cells from the previous center), keep the window wide enough
  // to cover continued progress instead of shrinking past the minimizer.
  for (int level = 0; level < 200 && r > resolution; ++level) {
    const double step = 2.0 * r / (points_per_axis - 1);
    for (int i = 0; i < points_per_axis; ++i) {
      for (int j = 0; j < points_per_axis; ++j) {
        const Eigen::Vector2d x(c.x() - r + i * step, c.y() - r + j * step);
        if (!feasible(x)) continue;
        const double f = objective(x);
        if (f < best_f) {
          best_f = f;
          best_x = x;
        }
      }
    }
    if (std::isfinite(best_f)) {
      const double moved = (best_x - c).norm();
      c = best_x;
      r = std::max(3.0 * step, 4.0 * moved);
    } else {
      r = 3.0 * step;
    }
  }
  return {best_x, best_f};
}

}  // namespace oracle
