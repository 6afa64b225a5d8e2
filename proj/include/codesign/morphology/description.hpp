#pragma once

// Agent description files: a JSON document whose field names mirror BodyPart
// and Joint. This is the authoring format; MJCF is produced from it.
//
//   {
//     "format": "codesign-agent/1",
//     "root": "B0",
//     "parts": [ {"id": "B0", "class": "B", "length": 0.4, "radius": 0.1,
//                 "density": 5.0, "attach_pos": 0.0, "init_dir": [0, 1, 0]}, ... ],
//     "joints": [ {"parent": "B0", "child": "RL0_0", "axis": [1, 0, 0],
//                  "range": [-0.7, 0.7], "stiffness": 5.0, "damping": 2.0,
//                  "max_effort": 5.0, "friction": 1.0}, ... ]
//   }

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "codesign/morphology/agent.hpp"

namespace codesign {

inline constexpr const char* kAgentFormat = "codesign-agent/1";

namespace detail {

inline Eigen::Vector3d read_vec3(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw Error(ErrorCode::ParseError, std::string(key) + " must be a 3-array");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline nlohmann::json vec3_json(const Eigen::Vector3d& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

}  // namespace detail

inline AgentGraph agent_from_json(const nlohmann::json& doc) {
  try {
    std::vector<BodyPart> parts;
    for (const auto& jp : doc.at("parts")) {
      BodyPart p;
      p.id = jp.at("id").get<std::string>();
      p.part_class = parse_part_class(jp.value("class", std::string("B")));
      p.leg_index = jp.value("leg", 0);
      p.length = jp.at("length").get<double>();
      p.radius = jp.at("radius").get<double>();
      p.density = jp.at("density").get<double>();
      p.attach_pos = jp.value("attach_pos", 0.0);
      p.init_dir = detail::read_vec3(jp, "init_dir");
      parts.push_back(std::move(p));
    }
    std::vector<Joint> joints;
    if (doc.contains("joints")) {
      for (const auto& jj : doc.at("joints")) {
        Joint j;
        j.parent = jj.at("parent").get<std::string>();
        j.child = jj.at("child").get<std::string>();
        j.axis = detail::read_vec3(jj, "axis");
        const auto& r = jj.at("range");
        if (!r.is_array() || r.size() != 2) throw Error(ErrorCode::ParseError, "range must be [lo, hi]");
        j.range_lo = r[0].get<double>();
        j.range_hi = r[1].get<double>();
        j.stiffness = jj.value("stiffness", 0.0);
        j.damping = jj.value("damping", 0.0);
        j.max_effort = jj.at("max_effort").get<double>();
        j.friction = jj.value("friction", 1.0);
        joints.push_back(std::move(j));
      }
    }
    std::string root = doc.contains("root") ? doc.at("root").get<std::string>()
                                            : (parts.empty() ? std::string() : parts.front().id);
    return AgentGraph::create(std::move(parts), std::move(joints), std::move(root));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline AgentGraph build_graph(std::string_view description) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(description);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return agent_from_json(doc);
}

inline nlohmann::json agent_to_json(const AgentGraph& g) {
  nlohmann::json doc;
  doc["format"] = kAgentFormat;
  doc["root"] = g.root();
  auto parts = nlohmann::json::array();
  for (const auto& p : g.parts()) {
    nlohmann::json jp;
    jp["id"] = p.id;
    jp["class"] = std::string(part_class_name(p.part_class));
    if (p.part_class != PartClass::Body) jp["leg"] = p.leg_index;
    jp["length"] = p.length;
    jp["radius"] = p.radius;
    jp["density"] = p.density;
    jp["attach_pos"] = p.attach_pos;
    jp["init_dir"] = detail::vec3_json(p.init_dir);
    parts.push_back(std::move(jp));
  }
  doc["parts"] = std::move(parts);
  auto joints = nlohmann::json::array();
  for (const auto& j : g.joints()) {
    nlohmann::json jj;
    jj["parent"] = j.parent;
    jj["child"] = j.child;
    jj["axis"] = detail::vec3_json(j.axis);
    jj["range"] = {j.range_lo, j.range_hi};
    jj["stiffness"] = j.stiffness;
    jj["damping"] = j.damping;
    jj["max_effort"] = j.max_effort;
    jj["friction"] = j.friction;
    joints.push_back(std::move(jj));
  }
  doc["joints"] = std::move(joints);
  return doc;
}

inline std::string write_description(const AgentGraph& g) { return agent_to_json(g).dump(2) + "\n"; }

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

inline AgentGraph load_agent(const std::filesystem::path& path) {
  return build_graph(read_text_file(path));
}

}  // namespace codesign
