#pragma once

// MJCF-subset export and the matching reader.
//
// Every number is printed in shortest round-trip form, and the authoring
// attributes that MJCF cannot carry directly (length, attach_pos, init_dir,
// part class) ride along in the standard `user` arrays. Parsing an exported
// document therefore reproduces the graph bit-exactly, and re-exporting it
// reproduces the text byte-for-byte.

#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "codesign/morphology/agent.hpp"

namespace codesign {

namespace mjcf_detail {

inline std::string num(double v) {
  if (v == 0.0) return "0";  // collapse -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string vec(const Eigen::Vector3d& v) {
  return num(v.x()) + " " + num(v.y()) + " " + num(v.z());
}

// Position of a part's body frame inside its parent's body frame.
inline Eigen::Vector3d attach_offset(const BodyPart& parent, bool parent_is_root, double attach_pos) {
  const double along = parent_is_root ? attach_pos - 0.5 : attach_pos;
  return along * parent.length * parent.init_dir;
}

inline int class_code(PartClass c) { return static_cast<int>(c); }

struct Element {
  std::string name;
  std::map<std::string, std::string> attrs;
  std::vector<std::unique_ptr<Element>> children;

  const std::string& attr(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) throw Error(ErrorCode::ParseError, "<" + name + "> missing '" + key + "'");
    return it->second;
  }
  const Element* child(const std::string& n) const {
    for (const auto& c : children)
      if (c->name == n) return c.get();
    return nullptr;
  }
};

class XmlReader {
 public:
  explicit XmlReader(std::string_view text) : s_(text) {}

  std::unique_ptr<Element> parse_document() {
    skip_misc();
    auto root = parse_element();
    skip_misc();
    if (pos_ != s_.size()) fail("trailing content");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "MJCF: " + what + " at offset " + std::to_string(pos_));
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<?")) {
        auto e = s_.find("?>", pos_);
        if (e == std::string_view::npos) fail("unterminated declaration");
        pos_ = e + 2;
      } else if (starts_with("<!--")) {
        auto e = s_.find("-->", pos_);
        if (e == std::string_view::npos) fail("unterminated comment");
        pos_ = e + 3;
      } else {
        return;
      }
    }
  }
  std::string parse_name() {
    size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-' ||
            s_[pos_] == ':' || s_[pos_] == '.'))
      ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }
  std::unique_ptr<Element> parse_element() {
    if (!starts_with("<")) fail("expected '<'");
    ++pos_;
    auto el = std::make_unique<Element>();
    el->name = parse_name();
    for (;;) {
      skip_ws();
      if (starts_with("/>")) {
        pos_ += 2;
        return el;
      }
      if (starts_with(">")) {
        ++pos_;
        break;
      }
      std::string key = parse_name();
      skip_ws();
      if (!starts_with("=")) fail("expected '='");
      ++pos_;
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quote");
      char q = s_[pos_++];
      auto e = s_.find(q, pos_);
      if (e == std::string_view::npos) fail("unterminated attribute");
      el->attrs[key] = std::string(s_.substr(pos_, e - pos_));
      pos_ = e + 1;
    }
    for (;;) {
      skip_misc();
      if (starts_with("</")) {
        pos_ += 2;
        std::string closing = parse_name();
        if (closing != el->name) fail("mismatched </" + closing + ">");
        skip_ws();
        if (!starts_with(">")) fail("expected '>'");
        ++pos_;
        return el;
      }
      if (starts_with("<")) {
        el->children.push_back(parse_element());
      } else if (pos_ >= s_.size()) {
        fail("unexpected end of document");
      } else {
        ++pos_;  // character data is ignored
      }
    }
  }

  std::string_view s_;
  size_t pos_ = 0;
};

inline std::vector<double> numbers(const std::string& text) {
  std::vector<double> out;
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p >= end) break;
    double v = 0.0;
    auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc()) throw Error(ErrorCode::ParseError, "bad number list '" + text + "'");
    out.push_back(v);
    p = res.ptr;
  }
  return out;
}

inline Eigen::Vector3d vec3(const std::string& text) {
  auto v = numbers(text);
  if (v.size() != 3) throw Error(ErrorCode::ParseError, "expected 3 numbers in '" + text + "'");
  return {v[0], v[1], v[2]};
}

}  // namespace mjcf_detail

inline std::string export_mjcf(const AgentGraph& g) {
  using namespace mjcf_detail;
  std::ostringstream out;
  const auto& parts = g.parts();
  out << "<mujoco model=\"codesign-agent\">\n";
  out << "  <compiler angle=\"radian\"/>\n";
  out << "  <worldbody>\n";

  std::vector<std::string> actuators;
  auto emit = [&](auto&& self, int idx, int depth) -> void {
    const BodyPart& p = parts[idx];
    const std::string ind(2 * depth, ' ');
    const int pj = g.parent_joint(idx);
    Eigen::Vector3d pos = Eigen::Vector3d::Zero();
    if (pj >= 0) {
      const int parent = g.part_index(g.joints()[pj].parent);
      pos = attach_offset(parts[parent], parent == g.root_index(), p.attach_pos);
    }
    out << ind << "<body name=\"" << p.id << "\" pos=\"" << vec(pos) << "\" user=\""
        << class_code(p.part_class) << " " << p.leg_index << "\">\n";
    if (pj < 0) {
      out << ind << "  <freejoint name=\"root\"/>\n";
    } else {
      const Joint& j = g.joints()[pj];
      out << ind << "  <joint name=\"" << p.id << "_joint\" type=\"hinge\" pos=\"0 0 0\" axis=\""
          << vec(j.axis) << "\" range=\"" << num(j.range_lo) << " " << num(j.range_hi)
          << "\" damping=\"" << num(j.damping) << "\"/>\n";
      actuators.push_back("    <position name=\"" + p.id + "_act\" joint=\"" + p.id + "_joint\" kp=\"" +
                          num(j.stiffness) + "\" forcelimited=\"true\" forcerange=\"" +
                          num(-j.max_effort) + " " + num(j.max_effort) + "\" user=\"" +
                          num(j.friction) + "\"/>");
    }
    const bool is_root = pj < 0;
    const Eigen::Vector3d from = is_root ? Eigen::Vector3d(-0.5 * p.length * p.init_dir)
                                         : Eigen::Vector3d::Zero();
    const Eigen::Vector3d to = from + p.length * p.init_dir;
    const double mu = pj < 0 ? 1.0 : g.joints()[pj].friction;
    out << ind << "  <geom name=\"" << p.id << "_geom\" type=\"capsule\" fromto=\"" << vec(from) << " "
        << vec(to) << "\" size=\"" << num(p.radius) << "\" density=\"" << num(p.density)
        << "\" friction=\"" << num(mu) << " 0.005 0.0001\" user=\"" << num(p.length) << " "
        << num(p.attach_pos) << " " << vec(p.init_dir) << "\"/>\n";
    for (int jidx : g.child_joints(idx)) self(self, g.part_index(g.joints()[jidx].child), depth + 1);
    out << ind << "</body>\n";
  };
  emit(emit, g.root_index(), 2);
  out << "  </worldbody>\n";
  out << "  <actuator>\n";
  for (const auto& a : actuators) out << a << "\n";
  out << "  </actuator>\n";
  out << "</mujoco>\n";
  return out.str();
}

/// Reads documents produced by export_mjcf.
inline AgentGraph parse_mjcf(std::string_view text) {
  using namespace mjcf_detail;
  XmlReader reader(text);
  auto doc = reader.parse_document();
  if (doc->name != "mujoco") throw Error(ErrorCode::ParseError, "root element is not <mujoco>");
  const Element* world = doc->child("worldbody");
  if (!world) throw Error(ErrorCode::ParseError, "missing <worldbody>");

  std::map<std::string, const Element*> actuator_for_joint;
  if (const Element* acts = doc->child("actuator")) {
    for (const auto& a : acts->children) actuator_for_joint[a->attr("joint")] = a.get();
  }

  std::vector<BodyPart> parts;
  std::vector<Joint> joints;
  std::string root;
  auto visit = [&](auto&& self, const Element& body, const std::string& parent) -> void {
    BodyPart p;
    p.id = body.attr("name");
    auto cls = numbers(body.attr("user"));
    if (cls.size() != 2) throw Error(ErrorCode::ParseError, "body user must hold class and leg");
    p.part_class = static_cast<PartClass>(static_cast<int>(cls[0]));
    p.leg_index = static_cast<int>(cls[1]);
    const Element* geom = body.child("geom");
    if (!geom) throw Error(ErrorCode::ParseError, "body '" + p.id + "' has no geom");
    auto extra = numbers(geom->attr("user"));
    if (extra.size() != 5) throw Error(ErrorCode::ParseError, "geom user must hold 5 numbers");
    p.length = extra[0];
    p.attach_pos = extra[1];
    p.init_dir = {extra[2], extra[3], extra[4]};
    p.radius = numbers(geom->attr("size")).at(0);
    p.density = numbers(geom->attr("density")).at(0);
    parts.push_back(p);

    if (parent.empty()) {
      root = p.id;
    } else {
      const Element* je = body.child("joint");
      if (!je) throw Error(ErrorCode::ParseError, "body '" + p.id + "' has no hinge joint");
      Joint j;
      j.parent = parent;
      j.child = p.id;
      j.axis = vec3(je->attr("axis"));
      auto range = numbers(je->attr("range"));
      if (range.size() != 2) throw Error(ErrorCode::ParseError, "joint range");
      j.range_lo = range[0];
      j.range_hi = range[1];
      j.damping = numbers(je->attr("damping")).at(0);
      auto it = actuator_for_joint.find(je->attr("name"));
      if (it == actuator_for_joint.end()) throw Error(ErrorCode::ParseError, "joint without actuator");
      j.stiffness = numbers(it->second->attr("kp")).at(0);
      auto fr = numbers(it->second->attr("forcerange"));
      if (fr.size() != 2) throw Error(ErrorCode::ParseError, "forcerange");
      j.max_effort = fr[1];
      j.friction = numbers(it->second->attr("user")).at(0);
      joints.push_back(j);
    }
    for (const auto& c : body.children) {
      if (c->name == "body") self(self, *c, p.id);
    }
  };
  int bodies = 0;
  for (const auto& c : world->children) {
    if (c->name == "body") {
      ++bodies;
      visit(visit, *c, "");
    }
  }
  if (bodies != 1) throw Error(ErrorCode::ParseError, "expected exactly one root body");
  return AgentGraph::create(std::move(parts), std::move(joints), root);
}

}  // namespace codesign
