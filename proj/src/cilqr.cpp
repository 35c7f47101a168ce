#include "omni/cilqr.hpp"

#include <algorithm>
#include <cmath>

namespace omni {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kRegMax = 1e10;
constexpr int kUactOffset = 12;  // u_act rows within the tangent vector

using MatNN = Eigen::Matrix<double, kTangentDim, kTangentDim>;
using MatN2 = Eigen::Matrix<double, kTangentDim, 2>;
using Mat8N = Eigen::Matrix<double, 8, kTangentDim>;

// Per-step multipliers for c = [u_cmd - u_max; -u_cmd] <= 0.
using Lambda = Eigen::Matrix<double, 16, 1>;

Eigen::Matrix<double, 16, 1> constraint_values(const Vec8& u_cmd,
                                               const Vec8& u_max) {
  Eigen::Matrix<double, 16, 1> c;
  c.head<8>() = u_cmd - u_max;
  c.tail<8>() = -u_cmd;
  return c;
}

double al_penalty(const Eigen::Matrix<double, 16, 1>& c, const Lambda& lambda,
                  double mu) {
  double acc = 0.0;
  for (int j = 0; j < 16; ++j) {
    const double g = std::max(0.0, lambda(j) + mu * c(j));
    acc += (g * g - lambda(j) * lambda(j)) / (2.0 * mu);
  }
  return acc;
}

}  // namespace

void OcpConfig::validate() const {
  if (h <= 0 || h_c <= 0 || h_c > h) {
    throw std::invalid_argument("OcpConfig: need 0 < h_c <= h");
  }
  Eigen::SelfAdjointEigenSolver<Mat8> es(0.5 *
                                         (r_delta_u + r_delta_u.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("OcpConfig: r_delta_u must be positive definite");
  }
  if (!(penalty_scale > 1.0)) {
    throw std::invalid_argument("OcpConfig: penalty_scale must exceed 1");
  }
  if (!(constraint_tol > 0.0) || !(cost_tol > 0.0) || !(penalty_init > 0.0)) {
    throw std::invalid_argument("OcpConfig: tolerances must be positive");
  }
  if (!(dt > 0.0) || max_outer_iters <= 0 || max_inner_iters <= 0) {
    throw std::invalid_argument("OcpConfig: invalid loop parameters");
  }
  if (warm_start_sigma < 0.0) {
    throw std::invalid_argument("OcpConfig: warm_start_sigma must be >= 0");
  }
}

int horizon_from_constants(double tau_rise, double tau_fall, double dt,
                           double multiplier) {
  if (!(tau_rise > 0.0) || !(tau_fall > 0.0) || !(dt > 0.0) ||
      !(multiplier > 0.0)) {
    throw std::invalid_argument("horizon_from_constants: inputs must be > 0");
  }
  const double steps = multiplier * std::max(tau_rise, tau_fall) / dt;
  return static_cast<int>(std::ceil(steps - 1e-9));
}

PredictionState apply_tangent(const PredictionState& s, const TangentVec& d) {
  PredictionState out = s;
  out.vehicle.p += d.segment<3>(0);
  out.vehicle.v += d.segment<3>(3);
  out.vehicle.R = s.vehicle.R * exp_so3(d.segment<3>(6));
  out.vehicle.w += d.segment<3>(9);
  out.u_act += d.segment<8>(kUactOffset);
  out.ctrl.e_p_I += d.segment<3>(20);
  return out;
}

TangentVec state_difference(const PredictionState& a,
                            const PredictionState& b) {
  TangentVec d;
  d.segment<3>(0) = a.vehicle.p - b.vehicle.p;
  d.segment<3>(3) = a.vehicle.v - b.vehicle.v;
  d.segment<3>(6) = log_so3(b.vehicle.R.transpose() * a.vehicle.R);
  d.segment<3>(9) = a.vehicle.w - b.vehicle.w;
  d.segment<8>(kUactOffset) = a.u_act - b.u_act;
  d.segment<3>(20) = a.ctrl.e_p_I - b.ctrl.e_p_I;
  return d;
}

ClosedLoopModel::Wrench ClosedLoopModel::desired_wrench(
    const PredictionState& s, const ReferencePoint& ref) const {
  Wrench w;
  ControllerState ctrl = s.ctrl;
  w.f_w_star = position_control(ref, s.vehicle, gains, ctrl, dt, vehicle);
  w.tau_b_star = attitude_control(ref, s.vehicle, gains, vehicle);
  w.u_0 = nominal_allocation(alloc, s.vehicle.R.transpose() * w.f_w_star,
                             w.tau_b_star);
  w.ctrl_next = ctrl;
  return w;
}

ClosedLoopModel::StepResult ClosedLoopModel::step(const PredictionState& s,
                                                  const ReferencePoint& ref,
                                                  const Vec2& x) const {
  const Wrench w = desired_wrench(s, ref);
  StepResult out;
  out.u_0 = w.u_0;
  out.u_cmd = apply_nullspace(w.u_0, alloc, x);
  out.next.u_act = motor_step(s.u_act, out.u_cmd, dt, motor);
  const Vec6 body_wrench = alloc.A * out.next.u_act;
  out.next.vehicle = integrate(s.vehicle, body_wrench.head<3>(),
                               body_wrench.tail<3>(), vehicle, dt);
  out.next.ctrl = w.ctrl_next;
  return out;
}

ClosedLoopModel::StepResult ClosedLoopModel::step_clamped(
    const PredictionState& s, const ReferencePoint& ref, const Vec2& x) const {
  const Wrench w = desired_wrench(s, ref);
  StepResult out;
  out.u_0 = w.u_0;
  out.u_cmd = apply_nullspace(w.u_0, alloc, x)
                  .cwiseMax(Vec8::Zero())
                  .cwiseMin(alloc.u_max);
  out.next.u_act = motor_step(s.u_act, out.u_cmd, dt, motor);
  const Vec6 body_wrench = alloc.A * out.next.u_act;
  out.next.vehicle = integrate(s.vehicle, body_wrench.head<3>(),
                               body_wrench.tail<3>(), vehicle, dt);
  out.next.ctrl = w.ctrl_next;
  return out;
}

RolloutResult rollout(const ClosedLoopModel& model,
                      const PredictionState& start, std::span<const Vec2> xs,
                      std::span<const ReferencePoint> refs,
                      const Mat8& r_delta_u) {
  if (xs.size() != refs.size()) {
    throw std::invalid_argument("rollout: sequence length mismatch");
  }
  const size_t h = xs.size();
  RolloutResult out;
  out.states.reserve(h + 1);
  out.u_cmd.reserve(h);
  out.u_act.reserve(h);
  out.states.push_back(start);
  for (size_t k = 0; k < h; ++k) {
    const auto sr = model.step(out.states.back(), refs[k], xs[k]);
    const Vec8 delta = sr.next.u_act - out.states.back().u_act;
    out.cost += delta.dot(r_delta_u * delta);
    out.u_cmd.push_back(sr.u_cmd);
    out.u_act.push_back(sr.next.u_act);
    out.states.push_back(sr.next);
  }
  return out;
}

namespace {

// Step with the motor rise/fall regime frozen to the nominal rollout's
// branch, so finite differences do not straddle the switch.
ClosedLoopModel::StepResult step_frozen(const ClosedLoopModel& model,
                                        const PredictionState& s,
                                        const ReferencePoint& ref,
                                        const Vec2& x,
                                        const Eigen::Array<bool, 8, 1>& rise) {
  const auto w = model.desired_wrench(s, ref);
  ClosedLoopModel::StepResult out;
  out.u_0 = w.u_0;
  out.u_cmd = apply_nullspace(w.u_0, model.alloc, x);
  for (int i = 0; i < 8; ++i) {
    const double tau = rise(i) ? model.motor.tau_rise : model.motor.tau_fall;
    out.next.u_act(i) =
        s.u_act(i) + (model.dt / tau) * (out.u_cmd(i) - s.u_act(i));
  }
  const Vec6 body_wrench = model.alloc.A * out.next.u_act;
  out.next.vehicle = integrate(s.vehicle, body_wrench.head<3>(),
                               body_wrench.tail<3>(), model.vehicle, model.dt);
  out.next.ctrl = w.ctrl_next;
  return out;
}

}  // namespace

std::vector<StepJacobians> linearize(const ClosedLoopModel& model,
                                     const RolloutResult& roll,
                                     std::span<const Vec2> xs,
                                     std::span<const ReferencePoint> refs) {
  const size_t h = xs.size();
  if (roll.states.size() != h + 1 || refs.size() != h) {
    throw std::invalid_argument("linearize: inconsistent rollout");
  }
  std::vector<StepJacobians> jacs(h);
  for (size_t k = 0; k < h; ++k) {
    const PredictionState& base = roll.states[k];
    // Nominal motor regimes for this step.
    Eigen::Array<bool, 8, 1> rise;
    for (int i = 0; i < 8; ++i) {
      rise(i) = roll.u_cmd[k](i) - base.u_act(i) >= 0.0;
    }
    auto& J = jacs[k];
    for (int c = 0; c < kTangentDim; ++c) {
      TangentVec d = TangentVec::Zero();
      d(c) = kFdStep;
      const auto plus =
          step_frozen(model, apply_tangent(base, d), refs[k], xs[k], rise);
      d(c) = -kFdStep;
      const auto minus =
          step_frozen(model, apply_tangent(base, d), refs[k], xs[k], rise);
      J.fx.col(c) =
          state_difference(plus.next, minus.next) / (2.0 * kFdStep);
      J.ucmd_x.col(c) = (plus.u_cmd - minus.u_cmd) / (2.0 * kFdStep);
    }
    for (int c = 0; c < 2; ++c) {
      Vec2 dx = Vec2::Zero();
      dx(c) = kFdStep;
      const auto plus = step_frozen(model, base, refs[k], xs[k] + dx, rise);
      const auto minus = step_frozen(model, base, refs[k], xs[k] - dx, rise);
      J.fu.col(c) =
          state_difference(plus.next, minus.next) / (2.0 * kFdStep);
      J.ucmd_u.col(c) = (plus.u_cmd - minus.u_cmd) / (2.0 * kFdStep);
    }
    if (!J.fx.allFinite() || !J.fu.allFinite() || !J.ucmd_x.allFinite() ||
        !J.ucmd_u.allFinite()) {
      throw std::runtime_error("linearize: non-finite Jacobian at step " +
                               std::to_string(k));
    }
  }
  return jacs;
}

namespace {

struct AlState {
  std::vector<Lambda> lambda;  // per step
  double mu;
};

double augmented_cost(const RolloutResult& roll, const AlState& al,
                      const Vec8& u_max) {
  double j = roll.cost;
  for (size_t k = 0; k < roll.u_cmd.size(); ++k) {
    j += al_penalty(constraint_values(roll.u_cmd[k], u_max), al.lambda[k],
                    al.mu);
  }
  return j;
}

double max_bound_violation(const std::vector<Vec8>& u_cmd, const Vec8& u_max) {
  double v = 0.0;
  for (const auto& u : u_cmd) {
    v = std::max(v, (u - u_max).maxCoeff());
    v = std::max(v, (-u).maxCoeff());
  }
  return std::max(v, 0.0);
}

struct Gains2 {
  std::vector<Vec2> kff;
  std::vector<Eigen::Matrix<double, 2, kTangentDim>> K;
  double dv1{0.0};
  double dv2{0.0};
};

// Backward recursion on the AL-quadratized cost. Returns false when the
// regularized Quu fails to be positive definite.
bool backward_pass(const RolloutResult& roll,
                   const std::vector<StepJacobians>& jacs,
                   const Mat8& r_delta_u, const AlState& al, const Vec8& u_max,
                   double reg, Gains2& out) {
  const size_t h = jacs.size();
  out.kff.assign(h, Vec2::Zero());
  out.K.assign(h, Eigen::Matrix<double, 2, kTangentDim>::Zero());
  out.dv1 = 0.0;
  out.dv2 = 0.0;

  TangentVec vx = TangentVec::Zero();
  MatNN vxx = MatNN::Zero();

  for (size_t kk = h; kk-- > 0;) {
    const auto& J = jacs[kk];

    // Smoothness cost through the motor rows of the step map.
    const Vec8 delta_u = roll.u_act[kk] - roll.states[kk].u_act;
    Mat8N jd_x = J.fx.middleRows<8>(kUactOffset);
    jd_x.middleCols<8>(kUactOffset) -= Mat8::Identity();
    const Eigen::Matrix<double, 8, 2> jd_u = J.fu.middleRows<8>(kUactOffset);

    TangentVec lx = 2.0 * jd_x.transpose() * (r_delta_u * delta_u);
    Vec2 lu = 2.0 * jd_u.transpose() * (r_delta_u * delta_u);
    MatNN lxx = 2.0 * jd_x.transpose() * r_delta_u * jd_x;
    Eigen::Matrix2d luu = 2.0 * jd_u.transpose() * r_delta_u * jd_u;
    Eigen::Matrix<double, 2, kTangentDim> lux =
        2.0 * jd_u.transpose() * r_delta_u * jd_x;

    // Augmented-Lagrangian bound terms.
    const auto c = constraint_values(roll.u_cmd[kk], u_max);
    const auto& lam = al.lambda[kk];
    for (int j = 0; j < 16; ++j) {
      const double gj = lam(j) + al.mu * c(j);
      const double sign = (j < 8) ? 1.0 : -1.0;
      const int row = j % 8;
      const auto cx = (sign * J.ucmd_x.row(row)).transpose();
      const Vec2 cu = sign * J.ucmd_u.row(row).transpose();
      if (gj > 0.0) {
        lx += gj * cx;
        lu += gj * cu;
        lxx += al.mu * cx * cx.transpose();
        luu += al.mu * cu * cu.transpose();
        lux += al.mu * cu * cx.transpose();
      }
    }

    const TangentVec qx = lx + J.fx.transpose() * vx;
    const Vec2 qu = lu + J.fu.transpose() * vx;
    const MatNN qxx = lxx + J.fx.transpose() * vxx * J.fx;
    const Eigen::Matrix2d quu = luu + J.fu.transpose() * vxx * J.fu;
    const Eigen::Matrix<double, 2, kTangentDim> qux =
        lux + J.fu.transpose() * vxx * J.fx;

    const Eigen::Matrix2d quu_reg =
        quu + reg * Eigen::Matrix2d::Identity();
    Eigen::LLT<Eigen::Matrix2d> llt(quu_reg);
    if (llt.info() != Eigen::Success) return false;

    out.kff[kk] = -llt.solve(qu);
    out.K[kk] = -llt.solve(qux);

    out.dv1 += out.kff[kk].dot(qu);
    out.dv2 += 0.5 * out.kff[kk].dot(quu * out.kff[kk]);

    vx = qx + out.K[kk].transpose() * quu * out.kff[kk] +
         out.K[kk].transpose() * qu + qux.transpose() * out.kff[kk];
    vxx = qxx + out.K[kk].transpose() * quu * out.K[kk] +
          out.K[kk].transpose() * qux + qux.transpose() * out.K[kk];
    vxx = 0.5 * (vxx + vxx.transpose()).eval();
  }
  return true;
}

}  // namespace

OcpSolution al_ilqr_solve(const ClosedLoopModel& model,
                          const PredictionState& start,
                          std::span<const ReferencePoint> refs,
                          std::span<const Vec2> x_init, const OcpConfig& cfg) {
  cfg.validate();
  const size_t h = refs.size();
  if (x_init.size() != h) {
    throw std::invalid_argument("al_ilqr_solve: x_init length != horizon");
  }

  std::vector<Vec2> xs(x_init.begin(), x_init.end());
  RolloutResult roll = rollout(model, start, xs, refs, cfg.r_delta_u);

  AlState al{std::vector<Lambda>(h, Lambda::Zero()), cfg.penalty_init};

  OcpSolution sol;
  sol.monotone = true;
  int total_inner = 0;
  bool converged = false;

  auto fill_solution = [&]() {
    sol.x_seq = xs;
    sol.u_cmd_seq = roll.u_cmd;
    sol.u_act_seq = roll.u_act;
    sol.cost = roll.cost;
    sol.max_violation = max_bound_violation(roll.u_cmd, cfg.u_max);
    sol.inner_iterations = total_inner;
  };

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    sol.outer_iterations = outer + 1;
    double j_current = augmented_cost(roll, al, cfg.u_max);
    bool inner_converged = false;

    for (int inner = 0; inner < cfg.max_inner_iters; ++inner) {
      ++total_inner;
      const auto jacs = linearize(model, roll, xs, refs);

      double reg = 1e-8;
      bool accepted = false;
      while (true) {
        Gains2 gains;
        if (!backward_pass(roll, jacs, cfg.r_delta_u, al, cfg.u_max, reg,
                           gains)) {
          reg *= 10.0;
          if (reg > kRegMax) {
            fill_solution();
            throw SolverFailure(
                "al_ilqr_solve: backward pass not positive definite at "
                "maximum regularization",
                sol);
          }
          continue;
        }

        // Backtracking on the augmented cost, Armijo on the predicted
        // first-order decrease.
        for (int ls = 0; ls <= 10; ++ls) {
          const double alpha = std::pow(0.5, ls);
          std::vector<Vec2> xs_try(h);
          RolloutResult roll_try;
          roll_try.states.reserve(h + 1);
          roll_try.u_cmd.reserve(h);
          roll_try.u_act.reserve(h);
          roll_try.states.push_back(start);
          for (size_t k = 0; k < h; ++k) {
            const TangentVec dx =
                state_difference(roll_try.states.back(), roll.states[k]);
            xs_try[k] = xs[k] + alpha * gains.kff[k] + gains.K[k] * dx;
            const auto sr =
                model.step(roll_try.states.back(), refs[k], xs_try[k]);
            const Vec8 du = sr.next.u_act - roll_try.states.back().u_act;
            roll_try.cost += du.dot(cfg.r_delta_u * du);
            roll_try.u_cmd.push_back(sr.u_cmd);
            roll_try.u_act.push_back(sr.next.u_act);
            roll_try.states.push_back(sr.next);
          }
          const double j_try = augmented_cost(roll_try, al, cfg.u_max);
          const double expected = -alpha * gains.dv1;
          if (j_try <= j_current - 1e-4 * alpha * std::max(expected, 0.0) &&
              j_try <= j_current) {
            if (j_try > j_current) sol.monotone = false;
            const double rel_decrease =
                (j_current - j_try) / std::max(std::abs(j_current), 1e-12);
            xs = std::move(xs_try);
            roll = std::move(roll_try);
            j_current = j_try;
            accepted = true;
            if (rel_decrease <= cfg.cost_tol) inner_converged = true;
            break;
          }
        }
        if (accepted) break;
        reg *= 10.0;
        if (reg > kRegMax) break;  // stationary under max regularization
      }
      if (!accepted) {
        inner_converged = true;
        break;
      }
      if (inner_converged) break;
    }

    const double violation = max_bound_violation(roll.u_cmd, cfg.u_max);
    if (violation <= cfg.constraint_tol && inner_converged) {
      converged = true;
      break;
    }

    // Multiplier and penalty updates.
    for (size_t k = 0; k < h; ++k) {
      const auto c = constraint_values(roll.u_cmd[k], cfg.u_max);
      al.lambda[k] = (al.lambda[k] + al.mu * c).cwiseMax(0.0);
    }
    al.mu *= cfg.penalty_scale;
  }

  fill_solution();
  sol.converged = converged;
  return sol;
}

RecedingHorizonAllocator::RecedingHorizonAllocator(ClosedLoopModel model,
                                                   TrajectorySpec trajectory,
                                                   OcpConfig cfg)
    : model_(std::move(model)),
      trajectory_(trajectory),
      cfg_(cfg),
      rng_(cfg.rng_seed) {
  cfg_.validate();
  trajectory_.validate();
}

RecedingHorizonAllocator::PlanResult RecedingHorizonAllocator::plan(
    const PredictionState& state, double t) {
  const size_t h = static_cast<size_t>(cfg_.h);
  std::vector<ReferencePoint> refs(h);
  for (size_t k = 0; k < h; ++k) {
    refs[k] = reference_at(trajectory_, t + static_cast<double>(k) * cfg_.dt);
  }

  // Warm start: replicate the previous solution, plus seeded exploration
  // noise.
  std::vector<Vec2> x_init(h, prev_x_);
  if (cfg_.warm_start_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.warm_start_sigma);
    for (auto& x : x_init) {
      x.x() += noise(rng_);
      x.y() += noise(rng_);
    }
  }

  PlanResult out;
  out.solution = al_ilqr_solve(model_, state, refs, x_init, cfg_);
  const size_t hc = static_cast<size_t>(cfg_.h_c);
  out.applied.assign(out.solution.x_seq.begin(),
                     out.solution.x_seq.begin() + hc);
  prev_x_ = out.solution.x_seq[std::min(hc, h - 1)];
  return out;
}

}  // namespace omni
