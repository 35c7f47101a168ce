#include "omni/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omni {

void TrajectorySpec::validate() const {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("TrajectorySpec: duration must be positive");
  }
  if (std::abs(rot_axis.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("TrajectorySpec: rot_axis must be unit");
  }
  if (!p_start.allFinite() || !p_end.allFinite() ||
      !std::isfinite(rot_angle)) {
    throw std::invalid_argument("TrajectorySpec: non-finite entries");
  }
}

void ControllerGains::validate() const {
  if ((kp_p.array() < 0.0).any() || (kd_p.array() < 0.0).any() ||
      (ki_p.array() < 0.0).any()) {
    throw std::invalid_argument("ControllerGains: negative position gain");
  }
  for (const Mat3* m : {&kp_R, &kd_R}) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (*m + m->transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument(
          "ControllerGains: attitude gains must be positive definite");
    }
  }
  if (!(e_p_max > 0.0) || !(e_v_max > 0.0)) {
    throw std::invalid_argument("ControllerGains: saturation bounds <= 0");
  }
}

ControllerGains default_gains(double mass) {
  ControllerGains g;
  g.kp_p = Vec3::Constant(16.0 * mass);
  g.kd_p = Vec3::Constant(8.0 * mass);
  g.ki_p = Vec3::Constant(1.0 * mass);
  g.kp_R = 30.0 * Mat3::Identity();
  g.kd_R = 8.0 * Mat3::Identity();
  g.e_p_max = 0.5;
  g.e_v_max = 1.0;
  return g;
}

std::array<double, 8> septic_coeffs(double x0, double xT, double T) {
  if (!(T > 0.0)) {
    throw std::invalid_argument("septic_coeffs: T must be positive");
  }
  const double d = xT - x0;
  const double T4 = T * T * T * T;
  return {x0,
          0.0,
          0.0,
          0.0,
          35.0 * d / T4,
          -84.0 * d / (T4 * T),
          70.0 * d / (T4 * T * T),
          -20.0 * d / (T4 * T * T * T)};
}

double polyval(const std::array<double, 8>& c, double t) {
  double acc = 0.0;
  for (int i = 7; i >= 0; --i) acc = acc * t + c[i];
  return acc;
}

double septic_sigma(double s) {
  return ((((-20.0 * s + 70.0) * s - 84.0) * s + 35.0) * s) * s * s * s;
}

double septic_sigma_d1(double s) {
  return (((-140.0 * s + 420.0) * s - 420.0) * s + 140.0) * s * s * s;
}

double septic_sigma_d2(double s) {
  return (((-840.0 * s + 2100.0) * s - 1680.0) * s + 420.0) * s * s;
}

ReferencePoint reference_at(const TrajectorySpec& spec, double t) {
  spec.validate();
  const double T = spec.duration;
  const double s = std::clamp(t / T, 0.0, 1.0);
  const double sig = septic_sigma(s);
  const double sig1 = septic_sigma_d1(s) / T;
  const double sig2 = septic_sigma_d2(s) / (T * T);

  ReferencePoint ref;
  const Vec3 d = spec.p_end - spec.p_start;
  ref.p = spec.p_start + sig * d;
  ref.v = sig1 * d;
  ref.a = sig2 * d;
  ref.R = exp_so3(spec.rot_axis * (spec.rot_angle * sig));
  ref.w = spec.rot_axis * (spec.rot_angle * sig1);
  ref.w_dot = spec.rot_axis * (spec.rot_angle * sig2);
  return ref;
}

Vec3 saturate(const Vec3& x, double bound) {
  return x.cwiseMax(-bound).cwiseMin(bound);
}

Vec3 position_control(const ReferencePoint& ref, const VehicleState& state,
                      const ControllerGains& gains, ControllerState& ctrl,
                      double dt, const VehicleParams& params) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("position_control: dt must be positive");
  }
  const Vec3 e_p = saturate(ref.p - state.p, gains.e_p_max);
  const Vec3 e_v = saturate(ref.v - state.v, gains.e_v_max);
  ctrl.e_p_I += e_p * dt;
  return params.mass * (ref.a + params.gravity * Vec3::UnitZ()) +
         gains.kp_p.cwiseProduct(e_p) + gains.kd_p.cwiseProduct(e_v) +
         gains.ki_p.cwiseProduct(ctrl.e_p_I);
}

Vec3 attitude_error(const Mat3& R_ref, const Mat3& R_hat) {
  const Mat3 E = R_ref.transpose() * R_hat;
  const Mat3 skew = 0.5 * (E - E.transpose());
  return Vec3(skew(2, 1), skew(0, 2), skew(1, 0));
}

Vec3 attitude_control(const ReferencePoint& ref, const VehicleState& state,
                      const ControllerGains& gains,
                      const VehicleParams& params) {
  const Vec3 e_R = attitude_error(ref.R, state.R);
  const Vec3 e_w = ref.w - state.w;
  return gains.kp_R * (-e_R) + gains.kd_R * e_w +
         hat(params.inertia * state.w) * state.w;
}

}  // namespace omni
