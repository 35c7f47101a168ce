#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "omni/controller.hpp"
#include "oracles.hpp"

using namespace omni;

namespace {

TrajectorySpec bundled_maneuver(double duration = 60.0) {
  TrajectorySpec spec;
  spec.p_start = Vec3(0, 0, 3);
  spec.p_end = Vec3(1, 1, 2);
  spec.rot_axis = Vec3(0, 1, 0);
  spec.rot_angle = 2.0 * M_PI;
  spec.duration = duration;
  return spec;
}

}  // namespace

TEST_CASE("septic polynomial meets all eight boundary conditions") {
  const double x0 = -1.5, xT = 4.0, T = 3.0;
  const auto c = septic_coeffs(x0, xT, T);

  const auto deriv = [](std::array<double, 8> p) {
    std::array<double, 8> d{};
    for (int i = 1; i < 8; ++i) d[i - 1] = i * p[i];
    return d;
  };
  const auto d1 = deriv(c), d2 = deriv(d1), d3 = deriv(d2);

  CHECK(std::abs(polyval(c, 0.0) - x0) <= 1e-12);
  CHECK(std::abs(polyval(c, T) - xT) <= 1e-9);
  for (double t : {0.0, T}) {
    CHECK(std::abs(polyval(d1, t)) <= 1e-9);
    CHECK(std::abs(polyval(d2, t)) <= 1e-9);
    CHECK(std::abs(polyval(d3, t)) <= 1e-9);
  }
  // Midpoint symmetry sigma(1/2) = 1/2.
  CHECK(std::abs(polyval(c, T / 2) - 0.5 * (x0 + xT)) <= 1e-9);
  CHECK(std::abs(septic_sigma(0.5) - 0.5) <= 1e-15);
  // sigma(s) + sigma(1-s) = 1.
  for (double s = 0.0; s <= 1.0; s += 0.05) {
    CHECK(std::abs(septic_sigma(s) + septic_sigma(1.0 - s) - 1.0) <= 1e-12);
  }
}

TEST_CASE("reference endpoints and the full-turn midpoint") {
  const TrajectorySpec spec = bundled_maneuver();

  const ReferencePoint r0 = reference_at(spec, 0.0);
  CHECK((r0.p - spec.p_start).norm() <= 1e-12);
  CHECK((r0.R - Mat3::Identity()).norm() <= 1e-12);
  CHECK(r0.v.norm() <= 1e-12);
  CHECK(r0.a.norm() <= 1e-12);
  CHECK(r0.w.norm() <= 1e-12);

  const ReferencePoint rT = reference_at(spec, spec.duration);
  CHECK((rT.p - spec.p_end).norm() <= 1e-12);
  CHECK((rT.R - Mat3::Identity()).norm() <= 1e-9);  // full 2*pi turn

  const ReferencePoint rm = reference_at(spec, 30.0);
  CHECK((rm.p - Vec3(0.5, 0.5, 2.5)).norm() <= 1e-9);
  CHECK((rm.R - oracle::axis_rotation(Vec3(0, 1, 0), M_PI)).norm() <= 1e-9);

  // Clamped outside [0, duration].
  CHECK((reference_at(spec, -1.0).p - spec.p_start).norm() <= 1e-12);
  CHECK((reference_at(spec, 61.0).p - spec.p_end).norm() <= 1e-12);
}

TEST_CASE("reference velocity matches central differences of position") {
  const TrajectorySpec spec = bundled_maneuver();
  const double dt = 0.002;
  double worst = 0.0;
  for (double t = dt; t < spec.duration - dt; t += 0.05) {
    const Vec3 fd =
        (reference_at(spec, t + dt).p - reference_at(spec, t - dt).p) /
        (2 * dt);
    worst = std::max(worst, (fd - reference_at(spec, t).v).norm());
  }
  CHECK(worst < 1e-4);

  // Angular rates follow the same scaling along the fixed axis.
  const ReferencePoint r = reference_at(spec, 20.0);
  CHECK((r.w.normalized() - spec.rot_axis).norm() <= 1e-12);
}

TEST_CASE("position control: hover feedforward, saturation, integral") {
  VehicleParams params;
  params.mass = 0.5;
  const ControllerGains gains = default_gains(params.mass);
  ControllerState ctrl;
  VehicleState state;
  ReferencePoint ref;
  ref.p = state.p;

  SUBCASE("zero error gives the hover force") {
    const Vec3 f = position_control(ref, state, gains, ctrl, 0.002, params);
    CHECK((f - Vec3(0, 0, params.mass * params.gravity)).norm() <= 1e-12);
  }

  SUBCASE("large position error saturates at e_p_max") {
    ref.p = state.p + Vec3(10, 0, 0);
    const Vec3 f = position_control(ref, state, gains, ctrl, 0.002, params);
    const Vec3 expected = Vec3(0, 0, params.mass * params.gravity) +
                          gains.kp_p.asDiagonal() * Vec3(0.5, 0, 0) +
                          gains.ki_p.asDiagonal() * Vec3(0.5 * 0.002, 0, 0);
    CHECK((f - expected).norm() <= 1e-12);
  }

  SUBCASE("integral accumulates exactly") {
    ref.p = state.p + Vec3(0.1, 0, 0);
    for (int k = 0; k < 500; ++k) {
      position_control(ref, state, gains, ctrl, 0.002, params);
    }
    CHECK((ctrl.e_p_I - Vec3(0.1, 0, 0)).norm() <= 1e-12);
  }
}

TEST_CASE("saturation is componentwise and idempotent") {
  const Vec3 x(3.0, -0.2, -7.0);
  const Vec3 s = saturate(x, 0.5);
  CHECK(s == Vec3(0.5, -0.2, -0.5));
  CHECK(saturate(s, 0.5) == s);
}

TEST_CASE("attitude error follows the vee-map definition") {
  CHECK(attitude_error(Mat3::Identity(), Mat3::Identity()).norm() == 0.0);
  for (double theta : {0.1, 0.7, 2.0}) {
    const Mat3 rz = oracle::axis_rotation(Vec3(0, 0, 1), theta);
    const Vec3 e = attitude_error(Mat3::Identity(), rz);
    CHECK((e - Vec3(0, 0, std::sin(theta))).norm() <= 1e-12);
  }
}

TEST_CASE("attitude control: zero error and the Coriolis term") {
  VehicleParams params;
  params.inertia = Vec3(1, 2, 3).asDiagonal();
  ControllerGains gains;
  VehicleState state;
  ReferencePoint ref;

  SUBCASE("perfect tracking at rest gives zero torque") {
    ControllerGains g = default_gains(1.0);
    CHECK(attitude_control(ref, state, g, params).norm() == 0.0);
  }

  SUBCASE("Kp = Kd = 0 isolates hat(Jw) w") {
    state.w = Vec3(1, 1, 1);
    ref.w = state.w;  // silence the damping term regardless of gains
    const Vec3 tau = attitude_control(ref, state, gains, params);
    // (Jw) x w = (1,2,3) x (1,1,1) = (-1, 2, -1)
    CHECK((tau - Vec3(-1, 2, -1)).norm() <= 1e-14);
  }
}

TEST_CASE("attitude loop is stabilizing from a 0.1 rad offset") {
  // Torque-level closed loop: perfect force actuation, attitude dynamics
  // driven by the controller torque alone.
  VehicleParams params;
  params.mass = 0.5;
  params.inertia = Vec3(0.01, 0.01, 0.015).asDiagonal();
  const ControllerGains gains = default_gains(params.mass);
  ReferencePoint ref;

  for (const Vec3 axis :
       {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)}) {
    VehicleState state;
    state.R = exp_so3(0.1 * axis.normalized());
    const Vec3 hover(0, 0, params.mass * params.gravity);
    for (int k = 0; k < 1500; ++k) {  // 3 s at 500 Hz
      const Vec3 tau = attitude_control(ref, state, gains, params);
      state = integrate(state, state.R.transpose() * hover, tau, params,
                        0.002);
    }
    CHECK(attitude_error(ref.R, state.R).norm() < 0.01);
  }
}
