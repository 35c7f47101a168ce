#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omni/cilqr.hpp"

namespace omni {

enum class AllocatorKind { kPseudoinverseOnly, kMbno, kRecedingHorizon };

std::string to_string(AllocatorKind kind);
AllocatorKind allocator_from_string(const std::string& name);

struct ExperimentConfig {
  RotorGeometry geometry;
  VehicleParams vehicle;
  MotorParams motor;
  ControllerGains gains;
  TrajectorySpec trajectory;
  OcpConfig ocp;
  AllocatorKind allocator{AllocatorKind::kMbno};
  double dt{0.002};
  double duration{6.0};
  std::string output_dir{"out"};
  std::uint64_t seed{1};
  int fallback_budget{20};  // max tolerated fallback cycles/steps per run
  std::vector<std::string> notes;

  void validate() const;
  int step_count() const;
};

/// The bundled point-to-point scenario: (0,0,3) -> (1,1,2) with a full
/// rotation about y at 500 Hz, on the default cube geometry.
ExperimentConfig default_config(double maneuver_duration = 60.0);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

struct StepLog {
  double t{0.0};
  Vec3 p{Vec3::Zero()};
  Vec3 rot{Vec3::Zero()};  // axis-angle of R
  Vec3 v{Vec3::Zero()};
  Vec3 w{Vec3::Zero()};
  Vec3 e_p{Vec3::Zero()};
  Vec3 e_xi{Vec3::Zero()};  // per-axis orientation error
  Vec8 u_cmd{Vec8::Zero()};
  Vec8 u_act{Vec8::Zero()};
  Vec2 x{Vec2::Zero()};
  double solver_cost{0.0};
  double solver_violation{0.0};
};

struct RunMetrics {
  int steps{0};
  double mean_pos_err{0.0};
  double rms_pos_err{0.0};
  double mean_ori_err{0.0};      // per-axis norm, wrapping-affected
  double rms_ori_err{0.0};
  double mean_ori_err_prewrap{0.0};
  double rms_ori_err_prewrap{0.0};
  double mean_ori_err_geodesic{0.0};
  double rms_ori_err_geodesic{0.0};
  double total_delta_u{0.0};         // sum_k sum_i |du_act| [N]
  double min_motor_thrust{0.0};      // min over run and motors [N]
  Vec8 per_motor_delta_abs{Vec8::Zero()};
  Vec8 per_motor_delta_max{Vec8::Zero()};
  double wrench_audit_max{0.0};      // max ||A u_cmd - A u_0||_inf
  int fallback_count{0};
  int cycles{0};
  int cycles_converged{0};
  double max_cycle_violation{0.0};
  bool solver_monotone{true};
};

struct RunResult {
  RunMetrics metrics;
  std::vector<StepLog> log;
};

/// Per-axis error: extrinsic XYZ Euler angles of R_ref' R_hat, each wrapped
/// to (-pi, pi]. Geodesic error: rotation angle of the same relative
/// rotation, free of wrapping artifacts.
std::pair<Vec3, double> orientation_error(const Mat3& R_ref,
                                          const Mat3& R_hat);

/// Single-rate closed loop: one controller evaluation, one allocation, one
/// motor step, one integration per dt. Throws std::runtime_error on a
/// non-finite state (message carries the step index).
RunResult run_experiment(const ExperimentConfig& cfg);

RunMetrics compute_metrics(const std::vector<StepLog>& log);

struct ComparisonReport {
  RunMetrics base;
  RunMetrics variant;
  AllocatorKind base_kind;
  AllocatorKind variant_kind;
  double delta_u_ratio{0.0};        // variant / base
  double mean_pos_improvement{0.0}; // fractional reduction vs base
};

/// Runs the same configuration under both allocators. The two configs must
/// be identical except for the allocator field.
ComparisonReport compare(const ExperimentConfig& cfg_base,
                         const ExperimentConfig& cfg_variant);

/// Writes timeseries.csv (fixed column order, >= 12 significant digits) and
/// metrics.json to output_dir; optional SVG line plots.
void emit_outputs(const std::vector<StepLog>& log, const RunMetrics& metrics,
                  const std::string& output_dir, bool plots = false);

std::string metrics_json(const RunMetrics& metrics);
std::string comparison_json(const ComparisonReport& report);

}  // namespace omni
