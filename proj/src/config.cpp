#include "subt_beacon/config.hpp"

#include "subt_beacon/csv.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace subt_beacon::config {

using csv::ParseError;
using nlohmann::json;

namespace {

class TomlParser {
 public:
  TomlParser(const std::string& text, const std::string& name)
      : text_(text), name_(name) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (skip_blank(), pos_ < text_.size()) {
      if (peek() == '[') {
        table = parse_table_header(root);
      } else {
        parse_key_value(*table);
      }
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(name_ + ":" + std::to_string(line_) + ": " + msg);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  /// Skips whitespace, newlines, and comments.
  void skip_blank() {
    while (pos_ < text_.size()) {
      const char c = peek();
      if (c == '#') {
        while (pos_ < text_.size() && peek() != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  /// Whitespace and comments only; newlines stay significant.
  void skip_inline() {
    while (pos_ < text_.size()) {
      const char c = peek();
      if (c == '#') {
        while (pos_ < text_.size() && peek() != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string parse_bare_key() {
    std::string key;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        key += advance();
      } else {
        break;
      }
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_path() {
    std::vector<std::string> parts{parse_bare_key()};
    while (peek() == '.') {
      advance();
      parts.push_back(parse_bare_key());
    }
    return parts;
  }

  json* parse_table_header(json& root) {
    advance();  // '['
    const bool array_of_tables = peek() == '[';
    if (array_of_tables) advance();
    skip_inline();
    const auto path = parse_dotted_path();
    skip_inline();
    if (peek() != ']') fail("expected ']' in table header");
    advance();
    if (array_of_tables) {
      if (peek() != ']') fail("expected ']]' in array-of-tables header");
      advance();
    }
    json* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& child = (*node)[path[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array()) {
        if (child.empty()) fail("empty table array '" + path[i] + "'");
        node = &child.back();
        continue;
      }
      if (!child.is_object()) fail("'" + path[i] + "' is not a table");
      node = &child;
    }
    json& leaf = (*node)[path.back()];
    if (array_of_tables) {
      if (leaf.is_null()) leaf = json::array();
      if (!leaf.is_array()) fail("'" + path.back() + "' is not a table array");
      leaf.push_back(json::object());
      return &leaf.back();
    }
    if (leaf.is_null()) leaf = json::object();
    if (!leaf.is_object()) fail("'" + path.back() + "' is not a table");
    return &leaf;
  }

  void parse_key_value(json& table) {
    const auto path = parse_dotted_path();
    skip_inline();
    if (peek() != '=') fail("expected '=' after key");
    advance();
    skip_inline();
    json value = parse_value();
    json* node = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& child = (*node)[path[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) fail("'" + path[i] + "' is not a table");
      node = &child;
    }
    if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*node)[path.back()] = std::move(value);
    skip_inline();
    if (pos_ < text_.size() && peek() != '\n') fail("trailing characters after value");
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  json parse_string() {
    advance();  // opening quote
    std::string s;
    while (pos_ < text_.size()) {
      char c = advance();
      if (c == '"') return s;
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("unterminated escape");
        const char e = advance();
        switch (e) {
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          default: fail("unsupported escape sequence");
        }
      } else {
        s += c;
      }
    }
    fail("unterminated string");
  }

  json parse_array() {
    advance();  // '['
    json arr = json::array();
    while (true) {
      skip_blank();  // arrays may span lines
      if (peek() == ']') {
        advance();
        return arr;
      }
      arr.push_back(parse_value());
      skip_blank();
      if (peek() == ',') {
        advance();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_scalar() {
    std::string token;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ']' ||
          c == '#') {
        break;
      }
      token += advance();
    }
    if (token.empty()) fail("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                          token == "inf" || token == "-inf" || token == "nan";
    if (is_float) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) fail("bad number '" + token + "'");
      return v;
    }
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(token.c_str(), &end, 10);
    if (errno != 0 || end != token.c_str() + token.size()) {
      fail("bad number '" + token + "'");
    }
    return static_cast<std::int64_t>(v);
  }

  const std::string& text_;
  std::string name_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string format_value(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += '"';
    return out;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += format_value(v[i]);
    }
    out += "]";
    return out;
  }
  throw std::runtime_error("dump_toml: unsupported value type");
}

bool is_table_array(const json& v) {
  return v.is_array() && !v.empty() && v.front().is_object();
}

void dump_table(const json& table, const std::string& prefix,
                std::ostringstream& out) {
  for (const auto& [key, value] : table.items()) {
    if (value.is_object() || is_table_array(value)) continue;
    out << key << " = " << format_value(value) << "\n";
  }
  for (const auto& [key, value] : table.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      out << "\n[" << path << "]\n";
      dump_table(value, path, out);
    } else if (is_table_array(value)) {
      for (const auto& element : value) {
        out << "\n[[" << path << "]]\n";
        dump_table(element, path, out);
      }
    }
  }
}

}  // namespace

json parse_toml(const std::string& text, const std::string& name) {
  return TomlParser(text, name).parse();
}

std::string dump_toml(const json& tree) {
  std::ostringstream out;
  dump_table(tree, "", out);
  return out.str();
}

json merge(json base, const json& over) {
  if (!base.is_object() || !over.is_object()) return over;
  for (const auto& [key, value] : over.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      base[key] = merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
  return base;
}

namespace {

/// Tracks which keys were consumed so typos are rejected with their path.
class Walker {
 public:
  Walker(const json& node, std::string path)
      : node_(&node), path_(std::move(path)) {
    if (!node.is_object()) {
      throw ParseError(path_ + ": expected a table");
    }
  }

  ~Walker() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_->contains(key);
  }

  const json& at(const std::string& key) { return (*node_)[key]; }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw ParseError(path_ + "." + key + ": expected a number");
    out = v.get<double>();
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw ParseError(path_ + "." + key + ": expected an integer");
    }
    out = v.get<int>();
  }

  void integer64(const std::string& key, std::int64_t& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw ParseError(path_ + "." + key + ": expected an integer");
    }
    out = v.get<std::int64_t>();
  }

  void uinteger64(const std::string& key, std::uint64_t& out) {
    std::int64_t tmp = static_cast<std::int64_t>(out);
    integer64(key, tmp);
    out = static_cast<std::uint64_t>(tmp);
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_boolean()) throw ParseError(path_ + "." + key + ": expected a boolean");
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) throw ParseError(path_ + "." + key + ": expected a string");
    out = v.get<std::string>();
  }

  void number_list(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) throw ParseError(path_ + "." + key + ": expected an array");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ParseError(path_ + "." + key + ": expected numbers");
      out.push_back(e.get<double>());
    }
  }

  void finish() const {
    for (const auto& [key, value] : node_->items()) {
      (void)value;
      if (!seen_.count(key)) {
        throw ParseError(path_ + ": unknown key '" + key + "'");
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

Eigen::Vector2d vec2(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParseError(path + ": expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

Eigen::Vector3d vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ParseError(path + ": expected [x, y, z]");
  for (const auto& e : v) {
    if (!e.is_number()) throw ParseError(path + ": expected numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

void apply_world(sim::World& world, const json& tree, const std::string& path) {
  Walker w(tree, path);
  w.number("wall_height", world.wall_height);
  if (w.has("walls")) {
    const json& walls = w.at("walls");
    if (!walls.is_array()) throw ParseError(path + ".walls: expected an array");
    world.walls.clear();
    for (const auto& seg : walls) {
      if (!seg.is_array() || seg.size() != 4) {
        throw ParseError(path + ".walls: expected [x1, y1, x2, y2] entries");
      }
      world.walls.push_back({{seg[0].get<double>(), seg[1].get<double>()},
                             {seg[2].get<double>(), seg[3].get<double>()}});
    }
  }
  if (w.has("marker")) {
    const json& markers = w.at("marker");
    if (!markers.is_array()) throw ParseError(path + ".marker: expected table array");
    world.markers.clear();
    for (std::size_t i = 0; i < markers.size(); ++i) {
      const std::string mp = path + ".marker[" + std::to_string(i) + "]";
      Walker mw(markers[i], mp);
      sim::MarkerRect rect;
      if (mw.has("center")) rect.center = vec3(mw.at("center"), mp + ".center");
      mw.number("width", rect.width);
      mw.number("height", rect.height);
      mw.number("normal_yaw", rect.normal_yaw);
      mw.finish();
      world.markers.push_back(rect);
    }
  }
  w.finish();
}

}  // namespace

void apply_tree(ScenarioSpec& spec, const json& tree,
                const std::filesystem::path& base_dir) {
  Walker root(tree, "scenario");
  root.text("name", spec.name);
  root.number("duration_s", spec.duration_s);
  if (root.has("seeds")) {
    const json& seeds = root.at("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      throw ParseError("scenario.seeds: expected a nonempty array");
    }
    spec.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_integer() && !s.is_number_unsigned()) {
        throw ParseError("scenario.seeds: expected integers");
      }
      spec.seeds.push_back(s.get<std::uint64_t>());
    }
  }

  if (root.has("world")) {
    const json& world_tree = root.at("world");
    Walker w(world_tree, "world");
    std::string file;
    w.text("file", file);
    if (!file.empty()) {
      const auto world_path = base_dir / file;
      std::ifstream in(world_path);
      if (!in) {
        throw ParseError("world file not found: " + world_path.string());
      }
      std::stringstream buffer;
      buffer << in.rdbuf();
      const json ext = parse_toml(buffer.str(), world_path.string());
      if (!ext.contains("world")) {
        throw ParseError(world_path.string() + ": missing [world] table");
      }
      apply_world(spec.world, ext["world"], "world");
    }
    // Inline keys override whatever the referenced file set.
    json inline_world = world_tree;
    inline_world.erase("file");
    apply_world(spec.world, inline_world, "world");
  }

  if (root.has("target")) {
    Walker t(root.at("target"), "target");
    t.boolean("present", spec.target.present);
    t.number("speed", spec.target.speed_mps);
    t.boolean("loop", spec.target.loop);
    t.number_list("stripe_heights", spec.target.stripe_heights);
    t.number("stripe_width", spec.target.stripe_width_m);
    t.number("body_radius", spec.target.body_radius_m);
    t.number("body_height", spec.target.body_height_m);
    if (t.has("waypoints")) {
      const json& wps = t.at("waypoints");
      if (!wps.is_array() || wps.empty()) {
        throw ParseError("target.waypoints: expected a nonempty array");
      }
      spec.target.waypoints.clear();
      for (std::size_t i = 0; i < wps.size(); ++i) {
        spec.target.waypoints.push_back(
            vec2(wps[i], "target.waypoints[" + std::to_string(i) + "]"));
      }
    }
    t.finish();
  }

  if (root.has("lidar")) {
    auto& lid = spec.sensors.lidar;
    Walker l(root.at("lidar"), "lidar");
    l.integer("rings", lid.rings);
    l.integer("azimuth_bins", lid.azimuth_bins);
    l.number("rate_hz", lid.rate_hz);
    l.number("max_range", lid.max_range_m);
    l.number("range_sigma", lid.range_sigma_m);
    l.number("vfov_deg", lid.vfov_deg);
    l.number("mount_height", lid.mount_height_m);
    l.number("marker_intensity_mean", lid.marker_intensity_mean);
    l.number("marker_intensity_sigma", lid.marker_intensity_sigma);
    l.number("wall_intensity_mean", lid.wall_intensity_mean);
    l.number("wall_intensity_sigma", lid.wall_intensity_sigma);
    l.finish();
  }

  if (root.has("camera")) {
    Walker c(root.at("camera"), "camera");
    int width = spec.sensors.camera.width;
    int height = spec.sensors.camera.height;
    c.integer("width", width);
    c.integer("height", height);
    c.number("hfov_deg", spec.camera_hfov_deg);
    c.number("drop_below_lidar", spec.camera_drop_m);
    spec.sensors.camera = core::intrinsics_from_fov(
        width, height, spec.camera_hfov_deg * core::kPi / 180.0);
    c.finish();
  }

  if (root.has("events")) {
    auto& ev = spec.sensors.events;
    Walker e(root.at("events"), "events");
    e.number("background_rate_hz_per_px", ev.background_rate_hz_per_px);
    e.integer64("pulse_width_us", ev.pulse_width_us);
    e.number("spot_radius_px", ev.spot_radius_px);
    e.integer64("refractory_us", ev.refractory_us);
    if (e.has("lamp")) {
      Walker lamp(e.at("lamp"), "events.lamp");
      lamp.boolean("enabled", ev.lamp.enabled);
      lamp.number("center_u", ev.lamp.center_u);
      lamp.number("center_v", ev.lamp.center_v);
      lamp.number("radius_px", ev.lamp.radius_px);
      lamp.number("rate_hz", ev.lamp.rate_hz);
      lamp.boolean("periodic", ev.lamp.periodic);
      lamp.number("per_pixel_hz", ev.lamp.per_pixel_hz);
      lamp.finish();
    }
    if (e.has("blinker")) {
      const json& blinkers = e.at("blinker");
      if (!blinkers.is_array()) {
        throw ParseError("events.blinker: expected table array");
      }
      ev.blinkers.clear();
      for (std::size_t i = 0; i < blinkers.size(); ++i) {
        const std::string bp = "events.blinker[" + std::to_string(i) + "]";
        Walker bw(blinkers[i], bp);
        sim::BlinkerRect rect;
        bw.integer("x0", rect.x0);
        bw.integer("y0", rect.y0);
        bw.integer("x1", rect.x1);
        bw.integer("y1", rect.y1);
        bw.number("freq_hz", rect.freq_hz);
        bw.finish();
        ev.blinkers.push_back(rect);
      }
    }
    e.finish();
  }

  if (root.has("pipeline")) {
    auto& det = spec.detection;
    Walker p(root.at("pipeline"), "pipeline");
    p.number("band_lo_hz", det.events.band_lo_hz);
    p.number("band_hi_hz", det.events.band_hi_hz);
    p.number("eps_f_hz", det.events.eps_f_hz);
    p.number("staleness_factor", det.events.staleness_factor);
    p.integer("min_cluster_px", det.events.min_cluster_px);
    p.number("freq_ema_alpha", det.events.freq_ema_alpha);
    p.number("tau_intensity", det.tau_intensity);
    p.integer("min_cluster_pts", det.kmeans.min_cluster_pts);
    p.number("kmeans_tol", det.kmeans.tol_m);
    p.integer("kmeans_max_iters", det.kmeans.max_iters);
    p.number("theta_gate", det.theta_gate_rad);
    p.uinteger64("kmeans_seed_base", det.kmeans_seed_base);
    p.finish();
  }

  if (root.has("tracker")) {
    auto& nm = spec.nmpc;
    Walker t(root.at("tracker"), "tracker");
    t.integer("horizon", nm.horizon);
    t.number("dt", nm.dt);
    t.number("v_min", nm.v_min);
    t.number("v_max", nm.v_max);
    t.number("psi_min", nm.psi_min);
    t.number("psi_max", nm.psi_max);
    t.number("q_p", nm.q_p);
    t.number("q_yaw", nm.q_yaw);
    t.number("r_v", nm.r_v);
    t.number("r_psi", nm.r_psi);
    t.number("q_terminal", nm.q_terminal);
    t.number("w_c", nm.w_c);
    t.number("d_safe", nm.d_safe);
    t.number("r_nom", nm.r_nom);
    t.integer("max_iters", nm.max_iters);
    t.number("grad_tol", nm.grad_tol);
    t.finish();
  }

  if (root.has("robot")) {
    Walker r(root.at("robot"), "robot");
    if (r.has("start")) {
      const json& start = r.at("start");
      if (!start.is_array() || start.size() != 3) {
        throw ParseError("robot.start: expected [x, y, yaw]");
      }
      spec.robot_start = {start[0].get<double>(), start[1].get<double>(),
                          start[2].get<double>()};
    }
    r.number("radius", spec.robot_radius_m);
    r.number("odom_sigma_xy", spec.odom_sigma_xy_m);
    r.number("odom_sigma_yaw", spec.odom_sigma_yaw_rad);
    r.finish();
  }
  root.finish();

  spec.sensors.extrinsics = core::default_extrinsics(
      spec.sensors.lidar.mount_height_m, spec.camera_drop_m);
}

void ScenarioSpec::validate() const {
  if (seeds.empty()) throw ParseError("scenario: seed list is empty");
  if (!(duration_s > 0)) throw ParseError("scenario: duration_s <= 0");
  sensors.camera.validate();
  sensors.extrinsics.validate();
  detection.validate();
  nmpc.validate();
  if (sensors.lidar.rings < 1 || sensors.lidar.azimuth_bins < 1) {
    throw ParseError("lidar: rings and azimuth_bins must be >= 1");
  }
  if (!(sensors.lidar.rate_hz > 0)) throw ParseError("lidar: rate_hz <= 0");
  if (target.present) {
    if (target.waypoints.empty()) throw ParseError("target: no waypoints");
    if (target.speed_mps < 0) throw ParseError("target: negative speed");
    for (double h : target.stripe_heights) {
      if (h - target.stripe_width_m / 2 < 0 ||
          h + target.stripe_width_m / 2 > target.body_height_m) {
        throw ParseError("target: stripe outside the body height envelope");
      }
    }
  }
  // Control and detection share the scan cadence.
  if (std::abs(nmpc.dt - 1.0 / sensors.lidar.rate_hz) > 1e-9) {
    throw ParseError("tracker.dt must equal the LiDAR scan period");
  }
}

namespace {

json walls_json(const std::vector<sim::WallSegment>& walls) {
  json arr = json::array();
  for (const auto& w : walls) {
    arr.push_back(json::array({w.a.x(), w.a.y(), w.b.x(), w.b.y()}));
  }
  return arr;
}

}  // namespace

json to_tree(const ScenarioSpec& spec) {
  json t;
  t["name"] = spec.name;
  t["duration_s"] = spec.duration_s;
  t["seeds"] = spec.seeds;

  json& world = t["world"];
  world["wall_height"] = spec.world.wall_height;
  world["walls"] = walls_json(spec.world.walls);
  if (!spec.world.markers.empty()) {
    json markers = json::array();
    for (const auto& m : spec.world.markers) {
      json mj;
      mj["center"] = json::array({m.center.x(), m.center.y(), m.center.z()});
      mj["width"] = m.width;
      mj["height"] = m.height;
      mj["normal_yaw"] = m.normal_yaw;
      markers.push_back(mj);
    }
    world["marker"] = markers;
  }

  json& target = t["target"];
  target["present"] = spec.target.present;
  target["speed"] = spec.target.speed_mps;
  target["loop"] = spec.target.loop;
  json wps = json::array();
  for (const auto& p : spec.target.waypoints) {
    wps.push_back(json::array({p.x(), p.y()}));
  }
  target["waypoints"] = wps;
  target["stripe_heights"] = spec.target.stripe_heights;
  target["stripe_width"] = spec.target.stripe_width_m;
  target["body_radius"] = spec.target.body_radius_m;
  target["body_height"] = spec.target.body_height_m;

  json& lid = t["lidar"];
  lid["rings"] = spec.sensors.lidar.rings;
  lid["azimuth_bins"] = spec.sensors.lidar.azimuth_bins;
  lid["rate_hz"] = spec.sensors.lidar.rate_hz;
  lid["max_range"] = spec.sensors.lidar.max_range_m;
  lid["range_sigma"] = spec.sensors.lidar.range_sigma_m;
  lid["vfov_deg"] = spec.sensors.lidar.vfov_deg;
  lid["mount_height"] = spec.sensors.lidar.mount_height_m;
  lid["marker_intensity_mean"] = spec.sensors.lidar.marker_intensity_mean;
  lid["marker_intensity_sigma"] = spec.sensors.lidar.marker_intensity_sigma;
  lid["wall_intensity_mean"] = spec.sensors.lidar.wall_intensity_mean;
  lid["wall_intensity_sigma"] = spec.sensors.lidar.wall_intensity_sigma;

  json& cam = t["camera"];
  cam["width"] = spec.sensors.camera.width;
  cam["height"] = spec.sensors.camera.height;
  cam["hfov_deg"] = spec.camera_hfov_deg;
  cam["drop_below_lidar"] = spec.camera_drop_m;

  json& ev = t["events"];
  ev["background_rate_hz_per_px"] = spec.sensors.events.background_rate_hz_per_px;
  ev["pulse_width_us"] = spec.sensors.events.pulse_width_us;
  ev["spot_radius_px"] = spec.sensors.events.spot_radius_px;
  ev["refractory_us"] = spec.sensors.events.refractory_us;
  json& lamp = ev["lamp"];
  lamp["enabled"] = spec.sensors.events.lamp.enabled;
  lamp["center_u"] = spec.sensors.events.lamp.center_u;
  lamp["center_v"] = spec.sensors.events.lamp.center_v;
  lamp["radius_px"] = spec.sensors.events.lamp.radius_px;
  lamp["rate_hz"] = spec.sensors.events.lamp.rate_hz;
  lamp["periodic"] = spec.sensors.events.lamp.periodic;
  lamp["per_pixel_hz"] = spec.sensors.events.lamp.per_pixel_hz;
  if (!spec.sensors.events.blinkers.empty()) {
    json blinkers = json::array();
    for (const auto& b : spec.sensors.events.blinkers) {
      json bj;
      bj["x0"] = b.x0;
      bj["y0"] = b.y0;
      bj["x1"] = b.x1;
      bj["y1"] = b.y1;
      bj["freq_hz"] = b.freq_hz;
      blinkers.push_back(bj);
    }
    ev["blinker"] = blinkers;
  }

  json& pipe = t["pipeline"];
  pipe["band_lo_hz"] = spec.detection.events.band_lo_hz;
  pipe["band_hi_hz"] = spec.detection.events.band_hi_hz;
  pipe["eps_f_hz"] = spec.detection.events.eps_f_hz;
  pipe["staleness_factor"] = spec.detection.events.staleness_factor;
  pipe["min_cluster_px"] = spec.detection.events.min_cluster_px;
  pipe["freq_ema_alpha"] = spec.detection.events.freq_ema_alpha;
  pipe["tau_intensity"] = spec.detection.tau_intensity;
  pipe["min_cluster_pts"] = spec.detection.kmeans.min_cluster_pts;
  pipe["kmeans_tol"] = spec.detection.kmeans.tol_m;
  pipe["kmeans_max_iters"] = spec.detection.kmeans.max_iters;
  pipe["theta_gate"] = spec.detection.theta_gate_rad;
  pipe["kmeans_seed_base"] =
      static_cast<std::int64_t>(spec.detection.kmeans_seed_base);

  json& track = t["tracker"];
  track["horizon"] = spec.nmpc.horizon;
  track["dt"] = spec.nmpc.dt;
  track["v_min"] = spec.nmpc.v_min;
  track["v_max"] = spec.nmpc.v_max;
  track["psi_min"] = spec.nmpc.psi_min;
  track["psi_max"] = spec.nmpc.psi_max;
  track["q_p"] = spec.nmpc.q_p;
  track["q_yaw"] = spec.nmpc.q_yaw;
  track["r_v"] = spec.nmpc.r_v;
  track["r_psi"] = spec.nmpc.r_psi;
  track["q_terminal"] = spec.nmpc.q_terminal;
  track["w_c"] = spec.nmpc.w_c;
  track["d_safe"] = spec.nmpc.d_safe;
  track["r_nom"] = spec.nmpc.r_nom;
  track["max_iters"] = spec.nmpc.max_iters;
  track["grad_tol"] = spec.nmpc.grad_tol;

  json& robot = t["robot"];
  robot["start"] =
      json::array({spec.robot_start.x, spec.robot_start.y, spec.robot_start.yaw});
  robot["radius"] = spec.robot_radius_m;
  robot["odom_sigma_xy"] = spec.odom_sigma_xy_m;
  robot["odom_sigma_yaw"] = spec.odom_sigma_yaw_rad;
  return t;
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  return dump_toml(to_tree(spec));
}

ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json tree = parse_toml(buffer.str(), path.string());

  const auto dir = path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path(".");
  const auto defaults_path = dir / "defaults.toml";
  if (std::filesystem::exists(defaults_path) &&
      std::filesystem::weakly_canonical(defaults_path) !=
          std::filesystem::weakly_canonical(path)) {
    std::ifstream din(defaults_path);
    std::stringstream dbuf;
    dbuf << din.rdbuf();
    const json defaults = parse_toml(dbuf.str(), defaults_path.string());
    tree = merge(defaults, tree);
  }

  ScenarioSpec spec;
  apply_tree(spec, tree, dir);
  spec.validate();
  return spec;
}

}  // namespace subt_beacon::config
