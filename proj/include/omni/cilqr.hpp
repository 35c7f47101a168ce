#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "omni/allocation.hpp"
#include "omni/controller.hpp"
#include "omni/motors.hpp"

namespace omni {

struct OcpConfig {
  int h{300};     // prediction horizon [steps]
  int h_c{20};    // control horizon [steps]
  Mat8 r_delta_u{Mat8::Identity()};
  Vec8 u_max{Vec8::Constant(6.0)};
  double dt{0.002};
  int max_outer_iters{5};
  int max_inner_iters{50};
  double penalty_init{10.0};
  double penalty_scale{10.0};
  double constraint_tol{1e-6};
  double cost_tol{1e-8};
  double warm_start_sigma{1e-3};
  std::uint64_t rng_seed{0};

  void validate() const;
};

/// h = ceil(multiplier * max(tau_rise, tau_fall) / dt).
int horizon_from_constants(double tau_rise, double tau_fall, double dt,
                           double multiplier = 4.0);

/// Closed-loop state carried through the prediction: rigid body, actual
/// motor thrusts, and the controller integral term.
struct PredictionState {
  VehicleState vehicle;
  Vec8 u_act{Vec8::Zero()};
  ControllerState ctrl;
};

/// Tangent coordinates: p(3) v(3) rot(3) w(3) u_act(8) e_p_I(3).
inline constexpr int kTangentDim = 23;
using TangentVec = Eigen::Matrix<double, kTangentDim, 1>;

PredictionState apply_tangent(const PredictionState& s, const TangentVec& d);
TangentVec state_difference(const PredictionState& a,
                            const PredictionState& b);  // a (-) b

/// The full closed-loop step map used both by the simulation harness and
/// inside the optimizer: controller wrench -> nominal allocation ->
/// nullspace shift -> motor lag -> rigid-body integration.
struct ClosedLoopModel {
  AllocationMatrix alloc;
  VehicleParams vehicle;
  ControllerGains gains;
  MotorParams motor;
  double dt{0.002};

  struct Wrench {
    Vec3 f_w_star;
    Vec3 tau_b_star;
    Vec8 u_0;
    ControllerState ctrl_next;
  };
  /// Controller evaluation and nominal allocation for one step; does not
  /// advance the state.
  Wrench desired_wrench(const PredictionState& s,
                        const ReferencePoint& ref) const;

  struct StepResult {
    PredictionState next;
    Vec8 u_0;
    Vec8 u_cmd;
  };
  StepResult step(const PredictionState& s, const ReferencePoint& ref,
                  const Vec2& x) const;
  /// Same step but with u_cmd clamped elementwise to [0, u_max]; the wrench
  /// is no longer preserved. Fallback path for infeasible allocations.
  StepResult step_clamped(const PredictionState& s, const ReferencePoint& ref,
                          const Vec2& x) const;
};

struct RolloutResult {
  std::vector<PredictionState> states;  // h + 1
  std::vector<Vec8> u_cmd;              // h
  std::vector<Vec8> u_act;              // h
  double cost{0.0};                     // sum of smoothness stage costs
};

RolloutResult rollout(const ClosedLoopModel& model,
                      const PredictionState& start, std::span<const Vec2> xs,
                      std::span<const ReferencePoint> refs,
                      const Mat8& r_delta_u);

struct StepJacobians {
  Eigen::Matrix<double, kTangentDim, kTangentDim> fx;
  Eigen::Matrix<double, kTangentDim, 2> fu;
  Eigen::Matrix<double, 8, kTangentDim> ucmd_x;
  Eigen::Matrix<double, 8, 2> ucmd_u;
};

/// Central finite differences (step 1e-5) of the closed-loop step map along
/// the rollout; rotations are perturbed in exponential-map coordinates.
/// Throws std::runtime_error on a non-finite entry.
std::vector<StepJacobians> linearize(const ClosedLoopModel& model,
                                     const RolloutResult& roll,
                                     std::span<const Vec2> xs,
                                     std::span<const ReferencePoint> refs);

struct OcpSolution {
  std::vector<Vec2> x_seq;
  std::vector<Vec8> u_cmd_seq;
  std::vector<Vec8> u_act_seq;
  double cost{0.0};           // true smoothness cost of the returned rollout
  double max_violation{0.0};  // max bound violation over u_cmd_seq [N]
  int outer_iterations{0};
  int inner_iterations{0};
  bool converged{false};
  bool monotone{true};  // augmented cost non-increasing over accepted iterates
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const char* what, OcpSolution best)
      : std::runtime_error(what), best_so_far(std::move(best)) {}
  OcpSolution best_so_far;
};

/// Augmented-Lagrangian constrained iLQR over the nullspace inputs.
/// Inner loop: regularized backward recursion + backtracking line search on
/// the augmented cost. Outer loop: multiplier update
/// lambda <- max(0, lambda + mu c), then mu <- penalty_scale mu.
OcpSolution al_ilqr_solve(const ClosedLoopModel& model,
                          const PredictionState& start,
                          std::span<const ReferencePoint> refs,
                          std::span<const Vec2> x_init, const OcpConfig& cfg);

/// Receding-horizon driver: warm-starts each cycle from the previous
/// solution (replicated, plus a seeded Gaussian perturbation), solves the
/// OCP, and hands back the first h_c inputs.
class RecedingHorizonAllocator {
 public:
  RecedingHorizonAllocator(ClosedLoopModel model, TrajectorySpec trajectory,
                           OcpConfig cfg);

  struct PlanResult {
    std::vector<Vec2> applied;  // length h_c
    OcpSolution solution;
  };
  /// Plans from the closed-loop state at trajectory time t.
  PlanResult plan(const PredictionState& state, double t);

 private:
  ClosedLoopModel model_;
  TrajectorySpec trajectory_;
  OcpConfig cfg_;
  Vec2 prev_x_{Vec2::Zero()};
  std::mt19937_64 rng_;
};

}  // namespace omni
