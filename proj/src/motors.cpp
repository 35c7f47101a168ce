#include "omni/motors.hpp"

#include <cmath>
#include <stdexcept>

namespace omni {

void MotorParams::validate() const {
  if (!(tau_rise > 0.0) || !(tau_fall > 0.0)) {
    throw std::invalid_argument("MotorParams: time constants must be positive");
  }
}

Vec8 motor_step(const Vec8& u_act_prev, const Vec8& u_cmd, double dt,
                const MotorParams& params) {
  params.validate();
  if (!(dt > 0.0)) {
    throw std::invalid_argument("motor_step: dt must be positive");
  }
  if (dt > std::min(params.tau_rise, params.tau_fall)) {
    throw std::invalid_argument(
        "motor_step: dt exceeds the smallest time constant");
  }
  Vec8 u_act;
  for (int i = 0; i < 8; ++i) {
    const double e = u_cmd(i) - u_act_prev(i);
    const double tau = (e >= 0.0) ? params.tau_rise : params.tau_fall;
    u_act(i) = u_act_prev(i) + (dt / tau) * e;
  }
  return u_act;
}

Vec8 motor_step_exact(const Vec8& u_act_prev, const Vec8& u_cmd, double dt,
                      const MotorParams& params) {
  params.validate();
  if (!(dt > 0.0)) {
    throw std::invalid_argument("motor_step_exact: dt must be positive");
  }
  Vec8 u_act;
  for (int i = 0; i < 8; ++i) {
    const double e = u_cmd(i) - u_act_prev(i);
    const double tau = (e >= 0.0) ? params.tau_rise : params.tau_fall;
    u_act(i) = u_act_prev(i) + (1.0 - std::exp(-dt / tau)) * e;
  }
  return u_act;
}

}  // namespace omni
