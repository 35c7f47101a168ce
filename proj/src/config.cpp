#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "omni/harness.hpp"

namespace omni {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("config: expected a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string to_string(AllocatorKind kind) {
  switch (kind) {
    case AllocatorKind::kPseudoinverseOnly:
      return "pseudoinverse_only";
    case AllocatorKind::kMbno:
      return "mbno";
    case AllocatorKind::kRecedingHorizon:
      return "receding_horizon";
  }
  return "unknown";
}

AllocatorKind allocator_from_string(const std::string& name) {
  if (name == "pseudoinverse_only") return AllocatorKind::kPseudoinverseOnly;
  if (name == "mbno") return AllocatorKind::kMbno;
  if (name == "receding_horizon") return AllocatorKind::kRecedingHorizon;
  throw std::invalid_argument("config: unknown allocator '" + name + "'");
}

void ExperimentConfig::validate() const {
  geometry.validate();
  vehicle.validate();
  motor.validate();
  gains.validate();
  trajectory.validate();
  ocp.validate();
  if (!(dt > 0.0) || !(duration > 0.0)) {
    throw std::invalid_argument("config: dt and duration must be positive");
  }
  const double steps = duration / dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) {
    throw std::invalid_argument(
        "config: duration must be an integer multiple of dt");
  }
  if (std::abs(ocp.dt - dt) > 0.0) {
    throw std::invalid_argument(
        "config: single-rate loop requires ocp.dt == dt");
  }
  if (fallback_budget < 0) {
    throw std::invalid_argument("config: fallback_budget must be >= 0");
  }
}

int ExperimentConfig::step_count() const {
  return static_cast<int>(std::llround(duration / dt));
}

ExperimentConfig default_config(double maneuver_duration) {
  ExperimentConfig cfg;
  cfg.geometry = default_geometry();
  cfg.vehicle.mass = 0.5;
  cfg.vehicle.inertia = Vec3(0.01, 0.01, 0.015).asDiagonal();
  cfg.vehicle.gravity = 9.81;
  cfg.motor = MotorParams{0.15, 0.021};
  cfg.gains = default_gains(cfg.vehicle.mass);
  cfg.trajectory.p_start = Vec3(0.0, 0.0, 3.0);
  cfg.trajectory.p_end = Vec3(1.0, 1.0, 2.0);
  cfg.trajectory.rot_axis = Vec3(0.0, 1.0, 0.0);
  cfg.trajectory.rot_angle = 2.0 * M_PI;
  cfg.trajectory.duration = maneuver_duration;
  cfg.dt = 0.002;
  cfg.duration = maneuver_duration;
  cfg.ocp = OcpConfig{};
  cfg.ocp.h =
      horizon_from_constants(cfg.motor.tau_rise, cfg.motor.tau_fall, cfg.dt);
  cfg.ocp.h_c = 20;
  cfg.ocp.dt = cfg.dt;
  cfg.ocp.u_max = cfg.geometry.thrust_limits();
  cfg.ocp.rng_seed = cfg.seed;
  cfg.allocator = AllocatorKind::kMbno;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open '" + path + "'");
  }
  json j = json::parse(in);

  ExperimentConfig cfg = default_config();

  cfg.dt = j.value("dt", cfg.dt);
  cfg.duration = j.value("duration", cfg.duration);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.fallback_budget = j.value("fallback_budget", cfg.fallback_budget);
  if (j.contains("allocator")) {
    cfg.allocator = allocator_from_string(j["allocator"].get<std::string>());
  }
  if (j.contains("notes")) {
    cfg.notes = j["notes"].get<std::vector<std::string>>();
  }

  if (j.contains("vehicle")) {
    const auto& jv = j["vehicle"];
    cfg.vehicle.mass = jv.value("mass", cfg.vehicle.mass);
    cfg.vehicle.gravity = jv.value("gravity", cfg.vehicle.gravity);
    if (jv.contains("inertia_diag")) {
      cfg.vehicle.inertia = vec3_from(jv["inertia_diag"]).asDiagonal();
    }
  }
  if (j.contains("motor")) {
    cfg.motor.tau_rise = j["motor"].value("tau_rise", cfg.motor.tau_rise);
    cfg.motor.tau_fall = j["motor"].value("tau_fall", cfg.motor.tau_fall);
  }
  if (j.contains("geometry") && !j["geometry"].is_string()) {
    const auto& rotors = j["geometry"].at("rotors");
    if (rotors.size() != 8) {
      throw std::invalid_argument("config: geometry requires 8 rotors");
    }
    for (int i = 0; i < 8; ++i) {
      const auto& jr = rotors[i];
      Rotor r;
      r.position = vec3_from(jr.at("position"));
      r.direction = vec3_from(jr.at("direction")).normalized();
      r.kappa = jr.at("kappa").get<double>();
      r.f_max = jr.at("f_max").get<double>();
      cfg.geometry.rotors[i] = r;
    }
  }
  if (j.contains("gains")) {
    const auto& jg = j["gains"];
    if (jg.contains("kp_p")) cfg.gains.kp_p = vec3_from(jg["kp_p"]);
    if (jg.contains("kd_p")) cfg.gains.kd_p = vec3_from(jg["kd_p"]);
    if (jg.contains("ki_p")) cfg.gains.ki_p = vec3_from(jg["ki_p"]);
    if (jg.contains("kp_R_diag")) {
      cfg.gains.kp_R = vec3_from(jg["kp_R_diag"]).asDiagonal();
    }
    if (jg.contains("kd_R_diag")) {
      cfg.gains.kd_R = vec3_from(jg["kd_R_diag"]).asDiagonal();
    }
    cfg.gains.e_p_max = jg.value("e_p_max", cfg.gains.e_p_max);
    cfg.gains.e_v_max = jg.value("e_v_max", cfg.gains.e_v_max);
  }
  if (j.contains("trajectory")) {
    const auto& jt = j["trajectory"];
    if (jt.contains("p_start")) cfg.trajectory.p_start = vec3_from(jt["p_start"]);
    if (jt.contains("p_end")) cfg.trajectory.p_end = vec3_from(jt["p_end"]);
    if (jt.contains("rot_axis")) {
      cfg.trajectory.rot_axis = vec3_from(jt["rot_axis"]).normalized();
    }
    cfg.trajectory.rot_angle = jt.value("rot_angle", cfg.trajectory.rot_angle);
    cfg.trajectory.duration = jt.value("duration", cfg.trajectory.duration);
  }
  if (j.contains("ocp")) {
    const auto& jo = j["ocp"];
    cfg.ocp.h = jo.value("h", cfg.ocp.h);
    cfg.ocp.h_c = jo.value("h_c", cfg.ocp.h_c);
    if (jo.contains("r_delta_u_scale")) {
      cfg.ocp.r_delta_u =
          jo["r_delta_u_scale"].get<double>() * Mat8::Identity();
    }
    cfg.ocp.max_outer_iters = jo.value("max_outer_iters", cfg.ocp.max_outer_iters);
    cfg.ocp.max_inner_iters = jo.value("max_inner_iters", cfg.ocp.max_inner_iters);
    cfg.ocp.penalty_init = jo.value("penalty_init", cfg.ocp.penalty_init);
    cfg.ocp.penalty_scale = jo.value("penalty_scale", cfg.ocp.penalty_scale);
    cfg.ocp.constraint_tol = jo.value("constraint_tol", cfg.ocp.constraint_tol);
    cfg.ocp.cost_tol = jo.value("cost_tol", cfg.ocp.cost_tol);
    cfg.ocp.warm_start_sigma =
        jo.value("warm_start_sigma", cfg.ocp.warm_start_sigma);
  }

  // Derived single-rate fields.
  cfg.ocp.dt = cfg.dt;
  cfg.ocp.u_max = cfg.geometry.thrust_limits();
  cfg.ocp.rng_seed = cfg.seed;

  cfg.validate();
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  json j;
  j["dt"] = cfg.dt;
  j["duration"] = cfg.duration;
  j["seed"] = cfg.seed;
  j["allocator"] = to_string(cfg.allocator);
  j["output_dir"] = cfg.output_dir;
  j["fallback_budget"] = cfg.fallback_budget;
  j["notes"] = cfg.notes;
  j["vehicle"] = {{"mass", cfg.vehicle.mass},
                  {"gravity", cfg.vehicle.gravity},
                  {"inertia_diag", to_json(cfg.vehicle.inertia.diagonal())}};
  j["motor"] = {{"tau_rise", cfg.motor.tau_rise},
                {"tau_fall", cfg.motor.tau_fall}};
  json rotors = json::array();
  for (const auto& r : cfg.geometry.rotors) {
    rotors.push_back({{"position", to_json(r.position)},
                      {"direction", to_json(r.direction)},
                      {"kappa", r.kappa},
                      {"f_max", r.f_max}});
  }
  j["geometry"] = {{"rotors", rotors}};
  j["gains"] = {{"kp_p", to_json(cfg.gains.kp_p)},
                {"kd_p", to_json(cfg.gains.kd_p)},
                {"ki_p", to_json(cfg.gains.ki_p)},
                {"kp_R_diag", to_json(cfg.gains.kp_R.diagonal())},
                {"kd_R_diag", to_json(cfg.gains.kd_R.diagonal())},
                {"e_p_max", cfg.gains.e_p_max},
                {"e_v_max", cfg.gains.e_v_max}};
  j["trajectory"] = {{"p_start", to_json(cfg.trajectory.p_start)},
                     {"p_end", to_json(cfg.trajectory.p_end)},
                     {"rot_axis", to_json(cfg.trajectory.rot_axis)},
                     {"rot_angle", cfg.trajectory.rot_angle},
                     {"duration", cfg.trajectory.duration}};
  j["ocp"] = {{"h", cfg.ocp.h},
              {"h_c", cfg.ocp.h_c},
              {"r_delta_u_scale", cfg.ocp.r_delta_u(0, 0)},
              {"max_outer_iters", cfg.ocp.max_outer_iters},
              {"max_inner_iters", cfg.ocp.max_inner_iters},
              {"penalty_init", cfg.ocp.penalty_init},
              {"penalty_scale", cfg.ocp.penalty_scale},
              {"constraint_tol", cfg.ocp.constraint_tol},
              {"cost_tol", cfg.ocp.cost_tol},
              {"warm_start_sigma", cfg.ocp.warm_start_sigma}};

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("config: cannot write '" + path + "'");
  }
  out << j.dump(2) << "\n";
}

}  // namespace omni
