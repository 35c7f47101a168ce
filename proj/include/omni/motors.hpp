#pragma once

#include "omni/dynamics.hpp"

namespace omni {

/// Asymmetric first-order motor response. Rising thrust is slow, falling
/// thrust fast (ESC active braking), so tau_fall < tau_rise on the default.
struct MotorParams {
  double tau_rise{0.15};
  double tau_fall{0.021};

  void validate() const;
};

struct MotorBank {
  Vec8 u_act{Vec8::Zero()};
  MotorParams params;
};

/// Forward-Euler step of the asymmetric model: per motor,
///   e = u_cmd - u_act_prev, tau = tau_rise if e >= 0 else tau_fall,
///   u_act = u_act_prev + (dt / tau) * e.
/// Throws std::invalid_argument when dt > min(tau_rise, tau_fall), which
/// would allow overshoot.
Vec8 motor_step(const Vec8& u_act_prev, const Vec8& u_cmd, double dt,
                const MotorParams& params);

/// Exact exponential discretization of the same model, used by oracle tests:
///   u_act = u_act_prev + (1 - exp(-dt / tau)) * e.
Vec8 motor_step_exact(const Vec8& u_act_prev, const Vec8& u_cmd, double dt,
                      const MotorParams& params);

}  // namespace omni
