#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "fesarm/arm_model.hpp"
#include "fesarm/errors.hpp"

namespace fesarm {

using Json = nlohmann::ordered_json;

inline Json vec_to_json(const Vec3d& v) { return Json::array({v.x, v.y, v.z}); }
inline Vec3d vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ModelConfigError("expected a 3-element array, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const MuscleParams& p) {
  return {{"name", p.name},       {"f_max", p.f_max},     {"l_opt", p.l_opt},         {"l_slack", p.l_slack},
          {"v_max", p.v_max},     {"tau_act", p.tau_act}, {"tau_deact", p.tau_deact}};
}

inline MuscleParams muscle_from_json(const Json& j) {
  MuscleParams p;
  p.name = j.at("name").get<std::string>();
  p.f_max = j.at("f_max").get<double>();
  p.l_opt = j.at("l_opt").get<double>();
  p.l_slack = j.at("l_slack").get<double>();
  p.v_max = j.value("v_max", p.v_max);
  p.tau_act = j.value("tau_act", p.tau_act);
  p.tau_deact = j.value("tau_deact", p.tau_deact);
  return p;
}

inline Json to_json(const Segment& s) {
  return {{"length", s.length},         {"mass", s.mass},
          {"inertia", s.inertia},       {"com_offset", s.com_offset},
          {"axial_inertia", s.axial_inertia}};
}

inline Segment segment_from_json(const Json& j) {
  Segment s;
  s.length = j.at("length").get<double>();
  s.mass = j.at("mass").get<double>();
  s.inertia = j.at("inertia").get<double>();
  s.com_offset = j.at("com_offset").get<double>();
  s.axial_inertia = j.value("axial_inertia", s.axial_inertia);
  return s;
}

inline Json to_json(const ArmModel& m) {
  Json j;
  j["model_format_version"] = m.model_format_version;
  j["variant"] = to_string(m.variant);
  j["calibrated"] = m.calibrated;
  j["gravity_on"] = m.gravity_on;
  j["gravity"] = m.gravity;
  j["long_axis"] = vec_to_json(m.long_axis);
  j["segments"] = {{"upperarm", to_json(m.upper_arm)}, {"forearm", to_json(m.forearm)}};
  j["curves"] = {{"fl_width", m.curves.fl_width},
                 {"fp_shape", m.curves.fp_shape},
                 {"fp_strain", m.curves.fp_strain},
                 {"fv_curvature", m.curves.fv_curvature},
                 {"fv_eccentric_max", m.curves.fv_eccentric_max}};
  Json dofs = Json::array();
  for (const Dof& d : m.dofs)
    dofs.push_back({{"name", d.name},
                    {"axis", vec_to_json(d.axis)},
                    {"offset", vec_to_json(d.offset)},
                    {"damping", d.damping},
                    {"limit",
                     {{"lower", d.limit.lower},
                      {"upper", d.limit.upper},
                      {"stiffness", d.limit.stiffness},
                      {"scale", d.limit.scale},
                      {"damping", d.limit.damping}}}});
  j["dofs"] = dofs;
  Json wraps = Json::array();
  for (const WrapSurface& w : m.wraps)
    wraps.push_back({{"name", w.name},
                     {"shape", w.shape == WrapShape::Cylinder ? "cylinder" : "sphere"},
                     {"body", to_string(w.body)},
                     {"center", vec_to_json(w.center)},
                     {"axis", vec_to_json(w.axis)},
                     {"radius", w.radius},
                     {"active_side", w.active_side}});
  j["wraps"] = wraps;
  Json muscles = Json::array();
  for (const MusclePath& p : m.muscles) {
    Json pts = Json::array();
    for (const ViaPoint& v : p.points) {
      Json pt = {{"body", to_string(v.body)}, {"position", vec_to_json(v.position)}};
      if (v.wrap) pt["wrap"] = m.wraps.at(*v.wrap).name;
      pts.push_back(pt);
    }
    Json mj = to_json(p.muscle);
    mj["spans"] = p.spans;
    mj["path"] = pts;
    muscles.push_back(mj);
  }
  j["muscles"] = muscles;
  return j;
}

inline ArmModel model_from_json(const Json& j) {
  ArmModel m;
  try {
    m.model_format_version = j.at("model_format_version").get<int>();
    if (m.model_format_version != kModelFormatVersion)
      throw ModelConfigError("unsupported model_format_version " + std::to_string(m.model_format_version));
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.calibrated = j.value("calibrated", false);
    m.gravity_on = j.at("gravity_on").get<bool>();
    m.gravity = j.value("gravity", m.gravity);
    m.long_axis = vec_from_json(j.at("long_axis"));
    m.upper_arm = segment_from_json(j.at("segments").at("upperarm"));
    m.forearm = segment_from_json(j.at("segments").at("forearm"));
    if (j.contains("curves")) {
      const Json& c = j["curves"];
      m.curves.fl_width = c.value("fl_width", m.curves.fl_width);
      m.curves.fp_shape = c.value("fp_shape", m.curves.fp_shape);
      m.curves.fp_strain = c.value("fp_strain", m.curves.fp_strain);
      m.curves.fv_curvature = c.value("fv_curvature", m.curves.fv_curvature);
      m.curves.fv_eccentric_max = c.value("fv_eccentric_max", m.curves.fv_eccentric_max);
    }
    for (const Json& d : j.at("dofs")) {
      Dof dof;
      dof.name = d.at("name").get<std::string>();
      dof.axis = vec_from_json(d.at("axis"));
      dof.offset = vec_from_json(d.at("offset"));
      dof.damping = d.value("damping", dof.damping);
      const Json& l = d.at("limit");
      dof.limit.lower = l.at("lower").get<double>();
      dof.limit.upper = l.at("upper").get<double>();
      dof.limit.stiffness = l.value("stiffness", dof.limit.stiffness);
      dof.limit.scale = l.value("scale", dof.limit.scale);
      dof.limit.damping = l.value("damping", dof.limit.damping);
      m.dofs.push_back(dof);
    }
    for (const Json& w : j.value("wraps", Json::array())) {
      WrapSurface s;
      s.name = w.at("name").get<std::string>();
      const std::string shape = w.value("shape", "cylinder");
      if (shape != "cylinder" && shape != "sphere") throw ModelConfigError("unknown wrap shape '" + shape + "'");
      s.shape = shape == "cylinder" ? WrapShape::Cylinder : WrapShape::Sphere;
      s.body = body_from_string(w.at("body").get<std::string>());
      s.center = vec_from_json(w.at("center"));
      s.axis = vec_from_json(w.value("axis", Json::array({0.0, 0.0, 1.0})));
      s.radius = w.at("radius").get<double>();
      s.active_side = w.value("active_side", 1);
      m.wraps.push_back(s);
    }
    const auto wrap_index = [&](const std::string& name) {
      for (std::size_t i = 0; i < m.wraps.size(); ++i)
        if (m.wraps[i].name == name) return static_cast<int>(i);
      throw ModelConfigError("unknown wrap surface '" + name + "'");
    };
    for (const Json& mj : j.at("muscles")) {
      MusclePath p;
      p.muscle = muscle_from_json(mj);
      p.spans = mj.at("spans").get<std::vector<int>>();
      for (const Json& pt : mj.at("path")) {
        ViaPoint v;
        v.body = body_from_string(pt.at("body").get<std::string>());
        v.position = vec_from_json(pt.at("position"));
        if (pt.contains("wrap")) v.wrap = wrap_index(pt["wrap"].get<std::string>());
        p.points.push_back(v);
      }
      m.muscles.push_back(p);
    }
  } catch (const Json::exception& e) {
    throw ModelConfigError(std::string("malformed model file: ") + e.what());
  }
  validate(m);
  return m;
}

inline ArmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelConfigError("cannot open model file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ModelConfigError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const ArmModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write model file '" + path + "'");
  out << to_json(m).dump(2) << '\n';
}

}  // namespace fesarm
