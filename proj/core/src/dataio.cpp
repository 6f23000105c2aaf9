#include "bev/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

namespace bev {

static_assert(std::endian::native == std::endian::little,
              "array container assumes a little-endian host");

std::string to_string(AgeClass c) {
  switch (c) {
    case AgeClass::Adult: return "adult";
    case AgeClass::Teen: return "teen";
    case AgeClass::Child: return "child";
    case AgeClass::Infant: return "infant";
  }
  throw UnknownClass("invalid age class value");
}

AgeClass age_class_from_string(const std::string& s) {
  if (s == "adult") return AgeClass::Adult;
  if (s == "teen") return AgeClass::Teen;
  if (s == "child") return AgeClass::Child;
  if (s == "infant") return AgeClass::Infant;
  throw UnknownClass("unknown age class '" + s + "'");
}

namespace {

struct LineReader {
  std::istream& in;
  std::string path;
  int line_no = 0;
  std::string line;

  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
  }
};

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

double parse_num(const LineReader& r, const std::string& t) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    r.fail("expected a number, got '" + t + "'");
  }
}

int parse_int(const LineReader& r, const std::string& t) {
  const double v = parse_num(r, t);
  if (v != std::floor(v)) r.fail("expected an integer, got '" + t + "'");
  return static_cast<int>(v);
}

/// "key=value" token split; fails when the key does not match.
std::string expect_kv(const LineReader& r, const std::string& tok, const std::string& key) {
  const auto eq = tok.find('=');
  if (eq == std::string::npos || tok.substr(0, eq) != key) {
    r.fail("expected '" + key + "=<value>', got '" + tok + "'");
  }
  return tok.substr(eq + 1);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

void write_params(std::ostream& out, const BodyParams& p) {
  out << "params";
  for (int i = 0; i < p.theta.size(); ++i) out << ' ' << format_double(p.theta(i));
  for (int i = 0; i < p.beta.size(); ++i) out << ' ' << format_double(p.beta(i));
  out << ' ' << format_double(p.alpha) << '\n';
}

BodyParams read_params(const LineReader& r, const std::vector<std::string>& toks) {
  const int n = BodyParams::kThetaDim + BodyParams::kBetaDim + 1;
  if (static_cast<int>(toks.size()) != n + 1) {
    r.fail("params line must carry " + std::to_string(n) + " values");
  }
  Eigen::VectorXd theta(BodyParams::kThetaDim), beta(BodyParams::kBetaDim);
  for (int i = 0; i < BodyParams::kThetaDim; ++i) theta(i) = parse_num(r, toks[1 + i]);
  for (int i = 0; i < BodyParams::kBetaDim; ++i) {
    beta(i) = parse_num(r, toks[1 + BodyParams::kThetaDim + i]);
  }
  const double alpha = parse_num(r, toks[n]);
  return BodyParams(std::move(theta), std::move(beta), alpha);
}

}  // namespace

std::vector<SceneAnnotation> load_annotations(const std::string& path) {
  auto in = open_in(path);
  LineReader r{in, path};
  if (!r.next() || r.line != "bev-annotations v1") {
    r.fail("expected header 'bev-annotations v1'");
  }

  std::vector<SceneAnnotation> scenes;
  std::vector<std::string> violations;
  SceneAnnotation* scene = nullptr;
  PersonAnnotation* person = nullptr;
  std::vector<Eigen::Vector3d> kps;

  auto flush_person = [&]() {
    if (!person) return;
    person->keypoints.resize(static_cast<int>(kps.size()), 3);
    for (std::size_t i = 0; i < kps.size(); ++i) {
      person->keypoints.row(static_cast<int>(i)) = kps[i].transpose();
    }
    kps.clear();
    person = nullptr;
  };

  while (r.next()) {
    const auto toks = tokens(r.line);
    if (toks.empty()) continue;
    if (toks[0] == "scene") {
      flush_person();
      if (toks.size() != 5) r.fail("scene line needs id, width, height, people");
      scenes.emplace_back();
      scene = &scenes.back();
      scene->id = expect_kv(r, toks[1], "id");
      scene->width = parse_int(r, expect_kv(r, toks[2], "width"));
      scene->height = parse_int(r, expect_kv(r, toks[3], "height"));
      scene->people.reserve(parse_int(r, expect_kv(r, toks[4], "people")));
    } else if (toks[0] == "person") {
      if (!scene) r.fail("person outside a scene");
      flush_person();
      if (toks.size() != 3) r.fail("person line needs layer and age");
      scene->people.emplace_back();
      person = &scene->people.back();
      person->depth_layer = parse_int(r, expect_kv(r, toks[1], "layer"));
      const std::string age = expect_kv(r, toks[2], "age");
      try {
        person->age_class = age_class_from_string(age);
      } catch (const UnknownClass&) {
        violations.push_back(path + ":" + std::to_string(r.line_no) +
                             ": age class '" + age + "' is not in the closed enum");
      }
      if (person->depth_layer < 0) {
        violations.push_back(path + ":" + std::to_string(r.line_no) +
                             ": negative depth layer");
      }
    } else if (toks[0] == "depth") {
      if (!person || toks.size() != 2) r.fail("stray depth line");
      person->gt_depth = parse_num(r, toks[1]);
    } else if (toks[0] == "trans") {
      if (!person || toks.size() != 4) r.fail("trans line needs 3 values");
      person->gt_translation =
          Eigen::Vector3d(parse_num(r, toks[1]), parse_num(r, toks[2]), parse_num(r, toks[3]));
    } else if (toks[0] == "params") {
      if (!person) r.fail("stray params line");
      person->gt_params = read_params(r, toks);
    } else if (toks[0] == "kp") {
      if (!person || toks.size() != 4) r.fail("kp line needs u, v, visibility");
      const double vis = parse_num(r, toks[3]);
      if (vis != 0.0 && vis != 1.0) {
        violations.push_back(path + ":" + std::to_string(r.line_no) +
                             ": visibility must be 0 or 1");
      }
      kps.emplace_back(parse_num(r, toks[1]), parse_num(r, toks[2]), vis);
    } else {
      r.fail("unknown record '" + toks[0] + "'");
    }
  }
  flush_person();

  if (!violations.empty()) {
    std::string msg = "schema violations:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw SchemaViolation(msg);
  }
  return scenes;
}

void save_annotations(const std::vector<SceneAnnotation>& scenes, const std::string& path) {
  auto out = open_out(path);
  out << "bev-annotations v1\n";
  for (const auto& s : scenes) {
    out << "scene id=" << s.id << " width=" << s.width << " height=" << s.height
        << " people=" << s.people.size() << '\n';
    for (const auto& p : s.people) {
      out << "person layer=" << p.depth_layer << " age=" << to_string(p.age_class) << '\n';
      if (p.gt_depth) out << "depth " << format_double(*p.gt_depth) << '\n';
      if (p.gt_translation) {
        out << "trans " << format_double(p.gt_translation->x()) << ' '
            << format_double(p.gt_translation->y()) << ' '
            << format_double(p.gt_translation->z()) << '\n';
      }
      if (p.gt_params) write_params(out, *p.gt_params);
      for (int k = 0; k < p.keypoints.rows(); ++k) {
        out << "kp " << format_double(p.keypoints(k, 0)) << ' '
            << format_double(p.keypoints(k, 1)) << ' '
            << format_double(p.keypoints(k, 2)) << '\n';
      }
    }
  }
}

std::vector<ScenePredictions> load_predictions(const std::string& path) {
  auto in = open_in(path);
  LineReader r{in, path};
  if (!r.next() || r.line != "bev-predictions v1") {
    r.fail("expected header 'bev-predictions v1'");
  }
  std::vector<ScenePredictions> scenes;
  ScenePredictions* scene = nullptr;
  PredictedPerson* person = nullptr;
  std::vector<Eigen::Vector3d> joints;

  auto flush_person = [&]() {
    if (!person) return;
    if (!joints.empty()) {
      Eigen::MatrixXd J(static_cast<int>(joints.size()), 3);
      for (std::size_t i = 0; i < joints.size(); ++i) {
        J.row(static_cast<int>(i)) = joints[i].transpose();
      }
      person->joints = std::move(J);
      joints.clear();
    }
    person = nullptr;
  };

  while (r.next()) {
    const auto toks = tokens(r.line);
    if (toks.empty()) continue;
    if (toks[0] == "scene") {
      flush_person();
      if (toks.size() != 3) r.fail("scene line needs id and people");
      scenes.emplace_back();
      scene = &scenes.back();
      scene->id = expect_kv(r, toks[1], "id");
      scene->people.reserve(parse_int(r, expect_kv(r, toks[2], "people")));
    } else if (toks[0] == "pred") {
      if (!scene || toks.size() != 5) r.fail("pred line needs x, y, d, confidence");
      flush_person();
      scene->people.emplace_back();
      person = &scene->people.back();
      person->translation =
          Eigen::Vector3d(parse_num(r, toks[1]), parse_num(r, toks[2]), parse_num(r, toks[3]));
      person->confidence = parse_num(r, toks[4]);
    } else if (toks[0] == "joint") {
      if (!person || toks.size() != 4) r.fail("joint line needs 3 values");
      joints.emplace_back(parse_num(r, toks[1]), parse_num(r, toks[2]), parse_num(r, toks[3]));
    } else if (toks[0] == "params") {
      if (!person) r.fail("stray params line");
      person->params = read_params(r, toks);
    } else {
      r.fail("unknown record '" + toks[0] + "'");
    }
  }
  flush_person();
  return scenes;
}

void save_predictions(const std::vector<ScenePredictions>& scenes, const std::string& path) {
  auto out = open_out(path);
  out << "bev-predictions v1\n";
  for (const auto& s : scenes) {
    out << "scene id=" << s.id << " people=" << s.people.size() << '\n';
    for (const auto& p : s.people) {
      out << "pred " << format_double(p.translation.x()) << ' '
          << format_double(p.translation.y()) << ' ' << format_double(p.translation.z())
          << ' ' << format_double(p.confidence) << '\n';
      if (p.joints) {
        for (int k = 0; k < p.joints->rows(); ++k) {
          out << "joint " << format_double((*p.joints)(k, 0)) << ' '
              << format_double((*p.joints)(k, 1)) << ' '
              << format_double((*p.joints)(k, 2)) << '\n';
        }
      }
      if (p.params) write_params(out, *p.params);
    }
  }
}

ArrayContainer load_arrays(const std::string& path) {
  auto in = open_in(path);
  LineReader r{in, path};
  if (!r.next() || r.line != "bev-arrays v1") r.fail("expected header 'bev-arrays v1'");

  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<Entry> entries;
  while (r.next()) {
    if (r.line == "end") break;
    const auto toks = tokens(r.line);
    if (toks.size() != 6 || toks[0] != "array") r.fail("expected an array manifest line");
    Entry e;
    e.name = expect_kv(r, toks[1], "name");
    if (expect_kv(r, toks[2], "dtype") != "f64") r.fail("only f64 payloads are supported");
    std::istringstream shape_ss(expect_kv(r, toks[3], "shape"));
    std::string dim;
    std::size_t n = 1;
    while (std::getline(shape_ss, dim, 'x')) {
      const int d = parse_int(r, dim);
      if (d < 0) r.fail("negative dimension");
      e.shape.push_back(static_cast<std::size_t>(d));
      n *= static_cast<std::size_t>(d);
    }
    e.offset = static_cast<std::size_t>(parse_int(r, expect_kv(r, toks[4], "offset")));
    e.count = static_cast<std::size_t>(parse_int(r, expect_kv(r, toks[5], "count")));
    if (e.count != n) r.fail("count does not match shape");
    entries.push_back(std::move(e));
  }

  const std::streampos payload_start = in.tellg();
  ArrayContainer out;
  for (const auto& e : entries) {
    Array a;
    a.shape = e.shape;
    a.data.resize(e.count);
    in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(e.count * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated payload for array '" + e.name + "'");
    out.emplace(e.name, std::move(a));
  }
  return out;
}

void save_arrays(const ArrayContainer& arrays, const std::string& path) {
  auto out = open_out(path);
  out << "bev-arrays v1\n";
  std::size_t offset = 0;
  for (const auto& [name, a] : arrays) {
    if (name.find_first_of(" \t\n=") != std::string::npos) {
      throw Error("array name '" + name + "' contains reserved characters");
    }
    out << "array name=" << name << " dtype=f64 shape=";
    for (std::size_t i = 0; i < a.shape.size(); ++i) {
      if (i) out << 'x';
      out << a.shape[i];
    }
    out << " offset=" << offset << " count=" << a.size() << '\n';
    offset += a.size() * sizeof(double);
  }
  out << "end\n";
  for (const auto& [name, a] : arrays) {
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  }
}

std::vector<int> derive_depth_layers(const std::vector<double>& depths, double gamma) {
  for (double d : depths) {
    if (!std::isfinite(d) || d <= 0.0) {
      throw Error("derive_depth_layers: depths must be finite and positive");
    }
  }
  std::vector<std::size_t> order(depths.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return depths[a] < depths[b]; });

  std::vector<int> layers(depths.size(), 0);
  int layer = 0;
  double layer_anchor = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double d = depths[order[i]];
    if (i == 0) {
      layer_anchor = d;
    } else if (d - layer_anchor >= gamma) {
      ++layer;
      layer_anchor = d;
    }
    layers[order[i]] = layer;
  }
  return layers;
}

std::vector<std::string> validate(const std::vector<SceneAnnotation>& scenes) {
  std::vector<std::string> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto& s = scenes[si];
    const std::string where = "scene " + (s.id.empty() ? std::to_string(si) : s.id);
    if (s.people.empty()) out.push_back(where + ": has no people");
    if (s.width <= 0 || s.height <= 0) out.push_back(where + ": non-positive image size");
    for (std::size_t pi = 0; pi < s.people.size(); ++pi) {
      const auto& p = s.people[pi];
      const std::string who = where + ", person " + std::to_string(pi);
      if (p.depth_layer < 0) out.push_back(who + ": negative depth layer");
      for (int k = 0; k < p.keypoints.rows(); ++k) {
        const double vis = p.keypoints(k, 2);
        if (vis != 0.0 && vis != 1.0) {
          out.push_back(who + ": keypoint " + std::to_string(k) +
                        " visibility is not binary");
        }
        if (!std::isfinite(p.keypoints(k, 0)) || !std::isfinite(p.keypoints(k, 1))) {
          out.push_back(who + ": keypoint " + std::to_string(k) + " is not finite");
        }
      }
      if (p.gt_depth && *p.gt_depth <= 0.0) out.push_back(who + ": non-positive depth");
    }
  }
  return out;
}

AnnotationStats stats(const std::vector<SceneAnnotation>& scenes) {
  AnnotationStats st;
  st.scenes = scenes.size();
  for (const auto& s : scenes) {
    for (const auto& p : s.people) {
      ++st.people;
      ++st.per_age[static_cast<int>(p.age_class)];
      ++st.layer_histogram[p.depth_layer];
    }
  }
  return st;
}

}  // namespace bev
