#pragma once

#include <array>
#include <stdexcept>

#include "omni/dynamics.hpp"

namespace omni {

using Mat68 = Eigen::Matrix<double, 6, 8>;
using Mat38 = Eigen::Matrix<double, 3, 8>;
using Mat83 = Eigen::Matrix<double, 8, 3>;
using Mat82 = Eigen::Matrix<double, 8, 2>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Rotor {
  Vec3 position;    // mounting point, body frame [m]
  Vec3 direction;   // unit thrust direction, body frame
  double kappa;     // thrust-to-torque coefficient [m], signed by spin
  double f_max;     // maximum thrust [N]
};

struct RotorGeometry {
  std::array<Rotor, 8> rotors;

  /// Throws std::invalid_argument on non-unit directions or f_max <= 0.
  void validate() const;
  Vec8 thrust_limits() const;
};

/// Eight rotors at the vertices of a cube (half-edge 0.2 m), thrust along
/// the outward cube diagonal tilted azimuthally by an alternating-handed
/// amount so the wrench map has full rank and unidirectional thrusts span
/// every attitude of the hover wrench. kappa alternates sign with the
/// propeller handedness.
RotorGeometry default_geometry();

struct AllocationMatrix {
  Mat68 A;             // rows 0-2 force map, rows 3-5 moment map
  Mat82 nullspace;     // orthonormal columns, A * nullspace == 0
  Mat83 force_pinv;    // pseudoinverse of A.topRows(3)
  Mat83 moment_pinv;   // pseudoinverse of A.bottomRows(3)
  Vec8 u_max;          // per-rotor thrust limits

  Mat38 force_map() const { return A.topRows<3>(); }
  Mat38 moment_map() const { return A.bottomRows<3>(); }
};

class GeometryRankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// MBNO instance has no X satisfying the box constraints. Carries the
/// least-max-violation point as a diagnostic.
class InfeasibleAllocation : public std::runtime_error {
 public:
  InfeasibleAllocation(Vec2 best, double violation)
      : std::runtime_error("mbno_solve: constraint set is infeasible"),
        best_x(best),
        max_violation(violation) {}
  Vec2 best_x;
  double max_violation;
};

/// Builds the 6x8 wrench map with columns [u_i; r_i x u_i + kappa_i u_i],
/// its SVD nullspace basis (sign-normalized so the first nonzero entry of
/// each column is positive), and the split pseudoinverses.
/// Throws GeometryRankError unless rank(A) == 6.
AllocationMatrix build_allocation(const RotorGeometry& geom);

/// Split-pseudoinverse nominal allocation:
///   u_0 = pinv(A_f) f_b_star + pinv(A_m) tau_b_star.
Vec8 nominal_allocation(const AllocationMatrix& alloc, const Vec3& f_b_star,
                        const Vec3& tau_b_star);

/// Alternative single-pseudoinverse mode over the stacked 6-vector wrench.
Vec8 nominal_allocation_full(const AllocationMatrix& alloc,
                             const Vec6& wrench);

inline Vec8 apply_nullspace(const Vec8& u_0, const AllocationMatrix& alloc,
                            const Vec2& x) {
  return u_0 + alloc.nullspace * x;
}

/// Exact active-set enumeration for
///   min 1/2 X'X + (u_0' n_A) X   s.t.  u_min <= u_0 + n_A X <= u_max.
/// With 2 variables and 16 half-plane constraints the optimum is among the
/// unconstrained stationary point and all single/pair active-set KKT
/// candidates; the feasible candidate with least objective is returned.
/// Throws InfeasibleAllocation when no candidate is feasible.
Vec2 mbno_solve(const Vec8& u_0, const AllocationMatrix& alloc,
                const Vec8& u_min, const Vec8& u_max);

}  // namespace omni
