#include "bev/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bev {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError("config key " + key + ": bad number '" + value + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError("config key " + key + ": bad integer '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError("config key " + key + ": bad integer '" + value + "'");
  }
  return out;
}

const std::array<std::string, kNumAgeClasses> kAgeKeys = {"adult", "teen", "child",
                                                          "infant"};

}  // namespace

void RunConfig::validate() const {
  CameraIntrinsics::make(camera.width, camera.height, camera.fov_deg);
  grid.validate();
  if (maps.sigma <= 0.0) throw Error("config: maps.sigma must be positive");
  if (maps.parse_threshold <= 0.0 || maps.parse_threshold >= 1.0) {
    throw Error("config: maps.parse_threshold must lie in (0, 1)");
  }
  if (maps.max_people < 1) throw Error("config: maps.max_people must be >= 1");
  if (maps.encoding_dim < 2 || maps.encoding_dim % 2 != 0) {
    throw Error("config: maps.encoding_dim must be even and >= 2");
  }
  if (body.t_alpha <= 0.0 || body.t_alpha >= 1.0) {
    throw Error("config: body.t_alpha must lie in (0, 1)");
  }
  if (body.toy_vertices < 8) throw Error("config: body.toy_vertices must be >= 8");
  if (loss.gamma <= 0.0) throw Error("config: loss.gamma must be positive");
  if (loss.focal_a <= 0.0 || loss.focal_b <= 0.0) {
    throw Error("config: focal exponents must be positive");
  }
  loss.weights.validate();
  loss.age_ranges.validate();
  if (metrics.match_threshold_frac <= 0.0) {
    throw Error("config: metrics.match_threshold_frac must be positive");
  }
  if (metrics.eq_depth_threshold <= 0.0) {
    throw Error("config: metrics.eq_depth_threshold must be positive");
  }
  if (metrics.pck.head_factor <= 0.0) {
    throw Error("config: metrics.pck_head_factor must be positive");
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "camera.width") camera.width = parse_int(key, value);
  else if (key == "camera.height") camera.height = parse_int(key, value);
  else if (key == "camera.fov_deg") camera.fov_deg = parse_double(key, value);
  else if (key == "grid.depth_bins") grid.depth_bins = parse_int(key, value);
  else if (key == "grid.map_height") grid.map_height = parse_int(key, value);
  else if (key == "grid.map_width") grid.map_width = parse_int(key, value);
  else if (key == "grid.d_min") grid.d_min = parse_double(key, value);
  else if (key == "grid.d_max") grid.d_max = parse_double(key, value);
  else if (key == "grid.spacing") grid.spacing = depth_spacing_from_string(value);
  else if (key == "maps.sigma") maps.sigma = parse_double(key, value);
  else if (key == "maps.parse_threshold") maps.parse_threshold = parse_double(key, value);
  else if (key == "maps.max_people") maps.max_people = parse_int(key, value);
  else if (key == "maps.encoding_dim") maps.encoding_dim = parse_int(key, value);
  else if (key == "body.t_alpha") body.t_alpha = parse_double(key, value);
  else if (key == "body.toy_vertices") body.toy_vertices = parse_int(key, value);
  else if (key == "body.toy_seed") body.toy_seed = parse_u64(key, value);
  else if (key == "loss.gamma") loss.gamma = parse_double(key, value);
  else if (key == "loss.focal_a") loss.focal_a = parse_double(key, value);
  else if (key == "loss.focal_b") loss.focal_b = parse_double(key, value);
  else if (key == "loss.w.cm") loss.weights.cm = parse_double(key, value);
  else if (key == "loss.w.cm3d") loss.weights.cm3d = parse_double(key, value);
  else if (key == "loss.w.theta") loss.weights.theta = parse_double(key, value);
  else if (key == "loss.w.beta") loss.weights.beta = parse_double(key, value);
  else if (key == "loss.w.prior") loss.weights.prior = parse_double(key, value);
  else if (key == "loss.w.mpj") loss.weights.mpj = parse_double(key, value);
  else if (key == "loss.w.pmpj") loss.weights.pmpj = parse_double(key, value);
  else if (key == "loss.w.pj2d") loss.weights.pj2d = parse_double(key, value);
  else if (key == "loss.w.depth") loss.weights.depth = parse_double(key, value);
  else if (key == "loss.w.age") loss.weights.age = parse_double(key, value);
  else if (key == "metrics.match_threshold_frac") {
    metrics.match_threshold_frac = parse_double(key, value);
  } else if (key == "metrics.eq_depth_threshold") {
    metrics.eq_depth_threshold = parse_double(key, value);
  } else if (key == "metrics.pck_head_factor") {
    metrics.pck.head_factor = parse_double(key, value);
  } else if (key == "metrics.pck_head_top_index") {
    metrics.pck.head_top_index = parse_int(key, value);
  } else if (key == "metrics.pck_neck_index") {
    metrics.pck.neck_index = parse_int(key, value);
  } else if (key == "paths.assets") {
    paths.assets = value;
  } else if (key == "paths.prior") {
    paths.prior = value;
  } else if (key == "paths.encoder_table") {
    paths.encoder_table = value;
  } else {
    bool handled = false;
    for (int c = 0; c < kNumAgeClasses && !handled; ++c) {
      const std::string base = "loss.age." + kAgeKeys[c] + ".";
      AgeRange& r = loss.age_ranges.ranges[c];
      if (key == base + "lower") {
        r.lower = parse_double(key, value);
        handled = true;
      } else if (key == base + "mid") {
        r.mid = parse_double(key, value);
        handled = true;
      } else if (key == base + "upper") {
        r.upper = parse_double(key, value);
        handled = true;
      }
    }
    if (!handled) throw SchemaViolation("unknown config key: " + key);
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  auto put = [&os](const std::string& key, const std::string& value) {
    os << key << " = " << value << "\n";
  };
  auto putd = [&put](const std::string& key, double v) { put(key, format_double(v)); };
  auto puti = [&put](const std::string& key, long long v) { put(key, std::to_string(v)); };

  puti("camera.width", camera.width);
  puti("camera.height", camera.height);
  putd("camera.fov_deg", camera.fov_deg);
  puti("grid.depth_bins", grid.depth_bins);
  puti("grid.map_height", grid.map_height);
  puti("grid.map_width", grid.map_width);
  putd("grid.d_min", grid.d_min);
  putd("grid.d_max", grid.d_max);
  put("grid.spacing", to_string(grid.spacing));
  putd("maps.sigma", maps.sigma);
  putd("maps.parse_threshold", maps.parse_threshold);
  puti("maps.max_people", maps.max_people);
  puti("maps.encoding_dim", maps.encoding_dim);
  putd("body.t_alpha", body.t_alpha);
  puti("body.toy_vertices", body.toy_vertices);
  puti("body.toy_seed", static_cast<long long>(body.toy_seed));
  putd("loss.gamma", loss.gamma);
  putd("loss.focal_a", loss.focal_a);
  putd("loss.focal_b", loss.focal_b);
  putd("loss.w.cm", loss.weights.cm);
  putd("loss.w.cm3d", loss.weights.cm3d);
  putd("loss.w.theta", loss.weights.theta);
  putd("loss.w.beta", loss.weights.beta);
  putd("loss.w.prior", loss.weights.prior);
  putd("loss.w.mpj", loss.weights.mpj);
  putd("loss.w.pmpj", loss.weights.pmpj);
  putd("loss.w.pj2d", loss.weights.pj2d);
  putd("loss.w.depth", loss.weights.depth);
  putd("loss.w.age", loss.weights.age);
  for (int c = 0; c < kNumAgeClasses; ++c) {
    const std::string base = "loss.age." + kAgeKeys[c] + ".";
    putd(base + "lower", loss.age_ranges.ranges[c].lower);
    putd(base + "mid", loss.age_ranges.ranges[c].mid);
    putd(base + "upper", loss.age_ranges.ranges[c].upper);
  }
  putd("metrics.match_threshold_frac", metrics.match_threshold_frac);
  putd("metrics.eq_depth_threshold", metrics.eq_depth_threshold);
  putd("metrics.pck_head_factor", metrics.pck.head_factor);
  puti("metrics.pck_head_top_index", metrics.pck.head_top_index);
  puti("metrics.pck_neck_index", metrics.pck.neck_index);
  put("paths.assets", paths.assets);
  put("paths.prior", paths.prior);
  put("paths.encoder_table", paths.encoder_table);
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    try {
      cfg.set(key, value);
    } catch (const SchemaViolation& e) {
      throw SchemaViolation(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

std::string default_config_path() {
  const char* env = std::getenv("BEV_CONFIG");
  return env ? std::string(env) : std::string();
}

}  // namespace bev
