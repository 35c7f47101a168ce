#include "omni/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace omni {

void VehicleParams::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::invalid_argument("VehicleParams: mass must be positive");
  }
  if (!inertia.allFinite() || !std::isfinite(gravity)) {
    throw std::invalid_argument("VehicleParams: non-finite entries");
  }
  if ((inertia - inertia.transpose()).norm() > 1e-12) {
    throw std::invalid_argument("VehicleParams: inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument(
        "VehicleParams: inertia must be positive definite");
  }
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& M) {
  if ((M + M.transpose()).norm() > 1e-9) {
    throw std::invalid_argument("vee: input is not skew-symmetric");
  }
  // Average the two off-diagonal copies of each component.
  return 0.5 * Vec3(M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1));
}

Mat3 exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  if (theta < 1e-8) {
    // Second-order series; error O(theta^3) is below double rounding here.
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * K + b * K * K;
}

Vec3 log_so3(const Mat3& R) {
  const double cos_theta =
      std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-8) {
    // R ~ I + hat(phi); antisymmetric part recovers phi to first order.
    return 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the antisymmetric part degenerates; use the symmetric part.
    // R = I + 2*hat(a)^2 for unit axis a at exactly pi.
    Mat3 S = 0.5 * (R + Mat3::Identity());
    Vec3 axis;
    int k;
    S.diagonal().maxCoeff(&k);
    axis = S.col(k) / std::sqrt(std::max(S(k, k), 1e-16));
    axis.normalize();
    // Fix the sign using the antisymmetric part when it is not exactly zero.
    Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (axis.dot(w) < 0.0) axis = -axis;
    return theta * axis;
  }
  const double scale = theta / (2.0 * std::sin(theta));
  return scale * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
}

std::pair<Vec3, Vec3> accelerations(const VehicleState& state, const Vec3& f_B,
                                    const Vec3& tau_B,
                                    const VehicleParams& params) {
  const Vec3 gravity_force(0.0, 0.0, -params.mass * params.gravity);
  const Vec3 v_dot = (gravity_force + state.R * f_B) / params.mass;
  const Vec3 w_dot = params.inertia.ldlt().solve(
      -state.w.cross(params.inertia * state.w) + tau_B);
  return {v_dot, w_dot};
}

VehicleState integrate(const VehicleState& state, const Vec3& f_B,
                       const Vec3& tau_B, const VehicleParams& params,
                       double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("integrate: dt must be positive");
  }
  const auto [v_dot, w_dot] = accelerations(state, f_B, tau_B, params);
  VehicleState next;
  next.v = state.v + v_dot * dt;
  next.p = state.p + 0.5 * (state.v + next.v) * dt;
  next.w = state.w + w_dot * dt;
  next.R = state.R * exp_so3(next.w * dt);
  return next;
}

}  // namespace omni
