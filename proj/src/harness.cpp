#include "omni/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>

#include <json.hpp>

namespace omni {

using nlohmann::json;

std::pair<Vec3, double> orientation_error(const Mat3& R_ref,
                                          const Mat3& R_hat) {
  const Mat3 E = R_ref.transpose() * R_hat;
  // Extrinsic XYZ Euler angles: E = Rz(c) Ry(b) Rx(a).
  const double b = std::asin(std::clamp(-E(2, 0), -1.0, 1.0));
  const double a = std::atan2(E(2, 1), E(2, 2));
  const double c = std::atan2(E(1, 0), E(0, 0));
  const double geodesic =
      std::acos(std::clamp(0.5 * (E.trace() - 1.0), -1.0, 1.0));
  return {Vec3(a, b, c), geodesic};
}

namespace {

bool state_finite(const PredictionState& s) {
  return s.vehicle.p.allFinite() && s.vehicle.v.allFinite() &&
         s.vehicle.R.allFinite() && s.vehicle.w.allFinite() &&
         s.u_act.allFinite() && s.ctrl.e_p_I.allFinite();
}

// Feasible hover thrust distribution for the initial motor state; zero if
// even hover is infeasible on this geometry.
Vec8 initial_thrusts(const ClosedLoopModel& model) {
  const Vec3 f_b(0.0, 0.0, model.vehicle.mass * model.vehicle.gravity);
  const Vec8 u_0 = nominal_allocation(model.alloc, f_b, Vec3::Zero());
  try {
    const Vec2 x = mbno_solve(u_0, model.alloc, Vec8::Zero(), model.alloc.u_max);
    return apply_nullspace(u_0, model.alloc, x);
  } catch (const InfeasibleAllocation&) {
    return Vec8::Zero();
  }
}

// Relative rotation reconstructed from its extrinsic XYZ Euler angles.
Mat3 euler_xyz(const Vec3& e) {
  return exp_so3(Vec3::UnitZ() * e.z()) * exp_so3(Vec3::UnitY() * e.y()) *
         exp_so3(Vec3::UnitX() * e.x());
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const AllocationMatrix alloc = build_allocation(cfg.geometry);
  ClosedLoopModel model{alloc, cfg.vehicle, cfg.gains, cfg.motor, cfg.dt};

  PredictionState ps;
  ps.vehicle.p = cfg.trajectory.p_start;
  ps.u_act = initial_thrusts(model);

  std::optional<RecedingHorizonAllocator> rh;
  if (cfg.allocator == AllocatorKind::kRecedingHorizon) {
    OcpConfig ocp = cfg.ocp;
    ocp.rng_seed = cfg.seed;
    rh.emplace(model, cfg.trajectory, ocp);
  }

  const int n_steps = cfg.step_count();
  RunResult result;
  result.log.reserve(static_cast<size_t>(n_steps));
  RunMetrics& m = result.metrics;
  m.min_motor_thrust = std::numeric_limits<double>::infinity();

  std::vector<Vec2> cycle_plan;
  double cycle_cost = 0.0;
  double cycle_violation = 0.0;
  bool cycle_fallback = false;

  for (int k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const ReferencePoint ref = reference_at(cfg.trajectory, t);

    Vec2 x = Vec2::Zero();
    bool clamp_fallback = false;
    bool step_is_fallback = false;

    switch (cfg.allocator) {
      case AllocatorKind::kPseudoinverseOnly:
        break;
      case AllocatorKind::kMbno: {
        const auto w = model.desired_wrench(ps, ref);
        try {
          x = mbno_solve(w.u_0, alloc, Vec8::Zero(), alloc.u_max);
        } catch (const InfeasibleAllocation&) {
          ++m.fallback_count;
          clamp_fallback = true;
        }
        break;
      }
      case AllocatorKind::kRecedingHorizon: {
        if (k % cfg.ocp.h_c == 0) {
          ++m.cycles;
          try {
            auto plan = rh->plan(ps, t);
            cycle_plan = std::move(plan.applied);
            cycle_cost = plan.solution.cost;
            cycle_violation = plan.solution.max_violation;
            cycle_fallback = false;
            if (plan.solution.converged) ++m.cycles_converged;
            if (!plan.solution.monotone) m.solver_monotone = false;
            m.max_cycle_violation =
                std::max(m.max_cycle_violation, plan.solution.max_violation);
          } catch (const SolverFailure&) {
            ++m.fallback_count;
            cycle_fallback = true;
          }
        }
        if (cycle_fallback) {
          step_is_fallback = true;
          const auto w = model.desired_wrench(ps, ref);
          try {
            x = mbno_solve(w.u_0, alloc, Vec8::Zero(), alloc.u_max);
          } catch (const InfeasibleAllocation&) {
            clamp_fallback = true;
          }
        } else {
          x = cycle_plan[static_cast<size_t>(k % cfg.ocp.h_c)];
        }
        break;
      }
    }

    const auto sr = clamp_fallback ? model.step_clamped(ps, ref, Vec2::Zero())
                                   : model.step(ps, ref, x);

    if (!state_finite(sr.next)) {
      throw std::runtime_error("run_experiment: non-finite state at step " +
                               std::to_string(k));
    }
    if (!clamp_fallback) {
      const Vec6 audit = alloc.A * (sr.u_cmd - sr.u_0);
      m.wrench_audit_max =
          std::max(m.wrench_audit_max, audit.lpNorm<Eigen::Infinity>());
    }

    StepLog row;
    row.t = t;
    row.p = ps.vehicle.p;
    row.rot = log_so3(ps.vehicle.R);
    row.v = ps.vehicle.v;
    row.w = ps.vehicle.w;
    row.e_p = ref.p - ps.vehicle.p;
    row.e_xi = orientation_error(ref.R, ps.vehicle.R).first;
    row.u_cmd = sr.u_cmd;
    row.u_act = sr.next.u_act;
    row.x = x;
    if (cfg.allocator == AllocatorKind::kRecedingHorizon &&
        !step_is_fallback) {
      row.solver_cost = cycle_cost;
      row.solver_violation = cycle_violation;
    }
    result.log.push_back(row);

    const Vec8 delta = (sr.next.u_act - ps.u_act).cwiseAbs();
    m.total_delta_u += delta.sum();
    m.per_motor_delta_abs += delta;
    m.per_motor_delta_max = m.per_motor_delta_max.cwiseMax(delta);
    m.min_motor_thrust = std::min(m.min_motor_thrust, sr.next.u_act.minCoeff());

    ps = sr.next;

    if (m.fallback_count > cfg.fallback_budget) {
      throw std::runtime_error("run_experiment: fallback budget exceeded (" +
                               std::to_string(m.fallback_count) +
                               " fallbacks by step " + std::to_string(k) + ")");
    }
  }

  const RunMetrics stats = compute_metrics(result.log);
  m.steps = stats.steps;
  m.mean_pos_err = stats.mean_pos_err;
  m.rms_pos_err = stats.rms_pos_err;
  m.mean_ori_err = stats.mean_ori_err;
  m.rms_ori_err = stats.rms_ori_err;
  m.mean_ori_err_prewrap = stats.mean_ori_err_prewrap;
  m.rms_ori_err_prewrap = stats.rms_ori_err_prewrap;
  m.mean_ori_err_geodesic = stats.mean_ori_err_geodesic;
  m.rms_ori_err_geodesic = stats.rms_ori_err_geodesic;
  return result;
}

RunMetrics compute_metrics(const std::vector<StepLog>& log) {
  RunMetrics m;
  m.steps = static_cast<int>(log.size());
  if (log.empty()) return m;

  // Prewrap window: everything before the first per-axis jump exceeding pi
  // (the Euler-angle wrap event); the whole series if no wrap occurs.
  size_t prewrap_end = log.size();
  for (size_t i = 1; i < log.size(); ++i) {
    if (((log[i].e_xi - log[i - 1].e_xi).cwiseAbs().array() > M_PI).any()) {
      prewrap_end = i;
      break;
    }
  }

  double sum_p = 0.0, sum_p2 = 0.0;
  double sum_o = 0.0, sum_o2 = 0.0;
  double sum_g = 0.0, sum_g2 = 0.0;
  double sum_ow = 0.0, sum_ow2 = 0.0;
  for (size_t i = 0; i < log.size(); ++i) {
    const double ep = log[i].e_p.norm();
    const double eo = log[i].e_xi.norm();
    sum_p += ep;
    sum_p2 += ep * ep;
    sum_o += eo;
    sum_o2 += eo * eo;
    if (i < prewrap_end) {
      sum_ow += eo;
      sum_ow2 += eo * eo;
    }
    const Mat3 E = euler_xyz(log[i].e_xi);
    const double g =
        std::acos(std::clamp(0.5 * (E.trace() - 1.0), -1.0, 1.0));
    sum_g += g;
    sum_g2 += g * g;
  }
  const double n = static_cast<double>(log.size());
  const double nw = static_cast<double>(prewrap_end);
  m.mean_pos_err = sum_p / n;
  m.rms_pos_err = std::sqrt(sum_p2 / n);
  m.mean_ori_err = sum_o / n;
  m.rms_ori_err = std::sqrt(sum_o2 / n);
  m.mean_ori_err_prewrap = sum_ow / nw;
  m.rms_ori_err_prewrap = std::sqrt(sum_ow2 / nw);
  m.mean_ori_err_geodesic = sum_g / n;
  m.rms_ori_err_geodesic = std::sqrt(sum_g2 / n);
  return m;
}

namespace {

template <typename A, typename B>
bool same(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return (a.array() == b.array()).all();
}

// Everything that shapes a run except the allocator choice and where the
// outputs land.
bool comparable(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (int i = 0; i < 8; ++i) {
    const Rotor& ra = a.geometry.rotors[static_cast<size_t>(i)];
    const Rotor& rb = b.geometry.rotors[static_cast<size_t>(i)];
    if (!same(ra.position, rb.position) || !same(ra.direction, rb.direction) ||
        ra.kappa != rb.kappa || ra.f_max != rb.f_max) {
      return false;
    }
  }
  return a.vehicle.mass == b.vehicle.mass &&
         a.vehicle.gravity == b.vehicle.gravity &&
         same(a.vehicle.inertia, b.vehicle.inertia) &&
         a.motor.tau_rise == b.motor.tau_rise &&
         a.motor.tau_fall == b.motor.tau_fall &&
         same(a.gains.kp_p, b.gains.kp_p) &&
         same(a.gains.kd_p, b.gains.kd_p) &&
         same(a.gains.ki_p, b.gains.ki_p) &&
         same(a.gains.kp_R, b.gains.kp_R) &&
         same(a.gains.kd_R, b.gains.kd_R) &&
         a.gains.e_p_max == b.gains.e_p_max &&
         a.gains.e_v_max == b.gains.e_v_max &&
         same(a.trajectory.p_start, b.trajectory.p_start) &&
         same(a.trajectory.p_end, b.trajectory.p_end) &&
         same(a.trajectory.rot_axis, b.trajectory.rot_axis) &&
         a.trajectory.rot_angle == b.trajectory.rot_angle &&
         a.trajectory.duration == b.trajectory.duration &&
         a.ocp.h == b.ocp.h && a.ocp.h_c == b.ocp.h_c &&
         same(a.ocp.r_delta_u, b.ocp.r_delta_u) &&
         same(a.ocp.u_max, b.ocp.u_max) && a.ocp.dt == b.ocp.dt &&
         a.ocp.max_outer_iters == b.ocp.max_outer_iters &&
         a.ocp.max_inner_iters == b.ocp.max_inner_iters &&
         a.ocp.penalty_init == b.ocp.penalty_init &&
         a.ocp.penalty_scale == b.ocp.penalty_scale &&
         a.ocp.constraint_tol == b.ocp.constraint_tol &&
         a.ocp.cost_tol == b.ocp.cost_tol &&
         a.ocp.warm_start_sigma == b.ocp.warm_start_sigma &&
         a.dt == b.dt && a.duration == b.duration && a.seed == b.seed &&
         a.fallback_budget == b.fallback_budget;
}

void metrics_to_json(json& j, const RunMetrics& m) {
  j["steps"] = m.steps;
  j["mean_pos_err"] = m.mean_pos_err;
  j["rms_pos_err"] = m.rms_pos_err;
  j["mean_ori_err"] = m.mean_ori_err;
  j["rms_ori_err"] = m.rms_ori_err;
  j["mean_ori_err_prewrap"] = m.mean_ori_err_prewrap;
  j["rms_ori_err_prewrap"] = m.rms_ori_err_prewrap;
  j["mean_ori_err_geodesic"] = m.mean_ori_err_geodesic;
  j["rms_ori_err_geodesic"] = m.rms_ori_err_geodesic;
  j["total_delta_u"] = m.total_delta_u;
  j["min_motor_thrust"] = m.min_motor_thrust;
  j["per_motor_delta_abs"] =
      std::vector<double>(m.per_motor_delta_abs.data(),
                          m.per_motor_delta_abs.data() + 8);
  j["per_motor_delta_max"] =
      std::vector<double>(m.per_motor_delta_max.data(),
                          m.per_motor_delta_max.data() + 8);
  j["wrench_audit_max"] = m.wrench_audit_max;
  j["fallback_count"] = m.fallback_count;
  j["cycles"] = m.cycles;
  j["cycles_converged"] = m.cycles_converged;
  j["max_cycle_violation"] = m.max_cycle_violation;
  j["solver_monotone"] = m.solver_monotone;
}

// One polyline chart per emitted SVG; minimal hand-rolled markup.
void write_svg(const std::string& path, const std::string& title,
               const std::vector<double>& t,
               const std::vector<std::vector<double>>& series) {
  const int w = 900, h = 420, pad = 50;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (double v : s) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(ymin) || ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double tmax = t.empty() ? 1.0 : std::max(t.back(), 1e-12);
  auto px = [&](double tv) {
    return pad + (w - 2 * pad) * tv / tmax;
  };
  auto py = [&](double yv) {
    return h - pad - (h - 2 * pad) * (yv - ymin) / (ymax - ymin);
  };
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", ymin);
  out << "<text x=\"4\" y=\"" << h - pad
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << buf
      << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", ymax);
  out << "<text x=\"4\" y=\"" << pad
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << buf
      << "</text>\n";
  // Subsample long runs so the SVG stays small.
  const size_t stride = std::max<size_t>(1, t.size() / 2000);
  for (size_t si = 0; si < series.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << kColors[si % 8]
        << "\" stroke-width=\"1\" points=\"";
    for (size_t i = 0; i < t.size(); i += stride) {
      out << px(t[i]) << ',' << py(series[si][i]) << ' ';
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace

ComparisonReport compare(const ExperimentConfig& cfg_base,
                         const ExperimentConfig& cfg_variant) {
  if (!comparable(cfg_base, cfg_variant)) {
    throw std::invalid_argument(
        "compare: configs must be identical except for the allocator");
  }
  ComparisonReport rep;
  rep.base_kind = cfg_base.allocator;
  rep.variant_kind = cfg_variant.allocator;
  rep.base = run_experiment(cfg_base).metrics;
  rep.variant = run_experiment(cfg_variant).metrics;
  rep.delta_u_ratio = rep.base.total_delta_u > 0.0
                          ? rep.variant.total_delta_u / rep.base.total_delta_u
                          : 0.0;
  rep.mean_pos_improvement =
      rep.base.mean_pos_err > 0.0
          ? 1.0 - rep.variant.mean_pos_err / rep.base.mean_pos_err
          : 0.0;
  return rep;
}

std::string metrics_json(const RunMetrics& metrics) {
  json j;
  metrics_to_json(j, metrics);
  return j.dump(2) + "\n";
}

std::string comparison_json(const ComparisonReport& report) {
  json j;
  j["base_allocator"] = to_string(report.base_kind);
  j["variant_allocator"] = to_string(report.variant_kind);
  metrics_to_json(j["base"], report.base);
  metrics_to_json(j["variant"], report.variant);
  j["delta_u_ratio"] = report.delta_u_ratio;
  j["mean_pos_improvement"] = report.mean_pos_improvement;
  return j.dump(2) + "\n";
}

void emit_outputs(const std::vector<StepLog>& log, const RunMetrics& metrics,
                  const std::string& output_dir, bool plots) {
  namespace fs = std::filesystem;
  fs::create_directories(output_dir);

  {
    std::ofstream csv(fs::path(output_dir) / "timeseries.csv");
    csv << "t,p_x,p_y,p_z,rot_x,rot_y,rot_z,v_x,v_y,v_z,w_x,w_y,w_z,"
           "e_p_x,e_p_y,e_p_z,e_xi_x,e_xi_y,e_xi_z";
    for (int i = 0; i < 8; ++i) csv << ",u_cmd_" << i;
    for (int i = 0; i < 8; ++i) csv << ",u_act_" << i;
    csv << ",x_0,x_1,solver_cost,solver_violation\n";
    char buf[32];
    auto put = [&](double v, bool last = false) {
      std::snprintf(buf, sizeof(buf), "%.15g", v);
      csv << buf << (last ? '\n' : ',');
    };
    for (const auto& r : log) {
      put(r.t);
      for (int i = 0; i < 3; ++i) put(r.p(i));
      for (int i = 0; i < 3; ++i) put(r.rot(i));
      for (int i = 0; i < 3; ++i) put(r.v(i));
      for (int i = 0; i < 3; ++i) put(r.w(i));
      for (int i = 0; i < 3; ++i) put(r.e_p(i));
      for (int i = 0; i < 3; ++i) put(r.e_xi(i));
      for (int i = 0; i < 8; ++i) put(r.u_cmd(i));
      for (int i = 0; i < 8; ++i) put(r.u_act(i));
      put(r.x(0));
      put(r.x(1));
      put(r.solver_cost);
      put(r.solver_violation, true);
    }
  }

  {
    std::ofstream out(fs::path(output_dir) / "metrics.json");
    out << metrics_json(metrics);
  }

  if (plots && !log.empty()) {
    std::vector<double> t(log.size());
    std::vector<std::vector<double>> uact(8, std::vector<double>(log.size()));
    std::vector<std::vector<double>> du(8, std::vector<double>(log.size()));
    std::vector<std::vector<double>> errs(2, std::vector<double>(log.size()));
    for (size_t i = 0; i < log.size(); ++i) {
      t[i] = log[i].t;
      for (int j = 0; j < 8; ++j) {
        uact[static_cast<size_t>(j)][i] = log[i].u_act(j);
        const double prev = i > 0 ? log[i - 1].u_act(j) : log[i].u_act(j);
        du[static_cast<size_t>(j)][i] = log[i].u_act(j) - prev;
      }
      errs[0][i] = log[i].e_p.norm();
      errs[1][i] = log[i].e_xi.norm();
    }
    const fs::path dir(output_dir);
    write_svg((dir / "u_act.svg").string(), "Motor thrusts [N]", t, uact);
    write_svg((dir / "delta_u.svg").string(), "Thrust increments [N]", t, du);
    write_svg((dir / "errors.svg").string(),
              "Tracking error norms (position [m], orientation [rad])", t,
              errs);
  }
}

}  // namespace omni
