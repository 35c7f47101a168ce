#pragma once

#include <array>

#include "omni/dynamics.hpp"

namespace omni {

/// Rest-to-rest point-to-point maneuver with an optional axis-angle
/// rotation, both time-scaled by the same septic polynomial.
struct TrajectorySpec {
  Vec3 p_start{Vec3::Zero()};
  Vec3 p_end{Vec3::Zero()};
  Vec3 rot_axis{0.0, 1.0, 0.0};
  double rot_angle{0.0};  // total rotation [rad]
  double duration{1.0};   // [s]

  void validate() const;
};

struct ReferencePoint {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};
  Mat3 R{Mat3::Identity()};
  Vec3 w{Vec3::Zero()};      // body frame
  Vec3 w_dot{Vec3::Zero()};
};

struct ControllerGains {
  Vec3 kp_p{Vec3::Zero()};  // diagonals of the position gain matrices
  Vec3 kd_p{Vec3::Zero()};
  Vec3 ki_p{Vec3::Zero()};
  Mat3 kp_R{Mat3::Zero()};
  Mat3 kd_R{Mat3::Zero()};
  double e_p_max{0.5};   // [m]
  double e_v_max{1.0};   // [m/s]

  void validate() const;
};

/// Well-damped defaults scaled by vehicle mass. Not taken from any
/// published platform; tuned once at this model's scale.
ControllerGains default_gains(double mass);

struct ControllerState {
  Vec3 e_p_I{Vec3::Zero()};  // integral of saturated position error [m s]
};

/// Degree-7 polynomial coefficients (ascending powers) with s(0)=x0,
/// s(T)=xT and zero velocity/acceleration/jerk at both endpoints.
std::array<double, 8> septic_coeffs(double x0, double xT, double T);

double polyval(const std::array<double, 8>& c, double t);

/// Rest-to-rest septic time scaling on [0,1] and its derivatives:
/// sigma(s) = 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7.
double septic_sigma(double s);
double septic_sigma_d1(double s);
double septic_sigma_d2(double s);

/// Reference at time t (clamped to [0, duration]). Orientation follows
/// R_r(t) = exp(hat(rot_axis) * theta(t)) with the same septic scaling.
ReferencePoint reference_at(const TrajectorySpec& spec, double t);

Vec3 saturate(const Vec3& x, double bound);

/// PID position loop with gravity/acceleration feedforward. Updates the
/// integral state in place and returns the desired world-frame force.
Vec3 position_control(const ReferencePoint& ref, const VehicleState& state,
                      const ControllerGains& gains, ControllerState& ctrl,
                      double dt, const VehicleParams& params);

/// SO(3) attitude error 1/2 (R_ref' R_hat - R_hat' R_ref)^vee. Points from
/// the reference toward the estimate; the controller negates it.
Vec3 attitude_error(const Mat3& R_ref, const Mat3& R_hat);

/// Attitude loop: tau = Kp_R (-e_R) + Kd_R (w_ref - w) + hat(J w) w.
/// The proportional term uses the negated attitude error; the published
/// sign convention is destabilizing under these conventions (see the
/// bundled config notes).
Vec3 attitude_control(const ReferencePoint& ref, const VehicleState& state,
                      const ControllerGains& gains,
                      const VehicleParams& params);

}  // namespace omni
