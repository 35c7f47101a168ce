#pragma once

#include <Eigen/Dense>
#include <utility>

namespace omni {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

/// Rigid-body state: position/velocity in world frame, body-to-world
/// rotation, angular velocity in body frame.
struct VehicleState {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Mat3 R{Mat3::Identity()};
  Vec3 w{Vec3::Zero()};
};

struct VehicleParams {
  double mass{1.0};
  Mat3 inertia{Vec3(0.02, 0.02, 0.03).asDiagonal()};
  double gravity{9.81};

  /// Throws std::invalid_argument if mass <= 0, inertia is not symmetric
  /// positive definite, or entries are non-finite.
  void validate() const;
};

/// Skew-symmetric (cross-product) matrix: hat(v) * u == v x u.
Mat3 hat(const Vec3& v);

/// Inverse of hat. Throws std::invalid_argument if ||M + M^T||_F > 1e-9.
Vec3 vee(const Mat3& M);

/// Rodrigues closed-form exponential map so(3) -> SO(3).
Mat3 exp_so3(const Vec3& phi);

/// Rotation vector of R (principal logarithm). Angle in [0, pi].
Vec3 log_so3(const Mat3& R);

/// Body-frame translational and rotational accelerations:
///   v_dot = (1/m) * ([0,0,-m g] + R f_B)
///   w_dot = J^-1 * (-w x (J w) + tau_B)
std::pair<Vec3, Vec3> accelerations(const VehicleState& state, const Vec3& f_B,
                                    const Vec3& tau_B,
                                    const VehicleParams& params);

/// One fixed step of the semi-implicit integrator. Velocity and angular
/// velocity advance by Euler, position by the trapezoid of old/new velocity
/// (exact for constant acceleration), and the rotation by the exponential
/// map of the updated angular velocity, so R stays on SO(3) by construction.
VehicleState integrate(const VehicleState& state, const Vec3& f_B,
                       const Vec3& tau_B, const VehicleParams& params,
                       double dt);

}  // namespace omni
