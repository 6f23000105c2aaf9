#include "bev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "bev/losses.hpp"

namespace bev {

namespace {

/// Potential-based shortest augmenting path; rows <= cols.
std::vector<int> hungarian_rect(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    return std::vector<int>(cost.rows(), -1);
  }
  if (cost.rows() <= cost.cols()) return hungarian_rect(cost);
  const std::vector<int> col_to_row = hungarian_rect(cost.transpose());
  std::vector<int> row_to_col(cost.rows(), -1);
  for (int c = 0; c < static_cast<int>(col_to_row.size()); ++c) {
    if (col_to_row[c] >= 0) row_to_col[col_to_row[c]] = c;
  }
  return row_to_col;
}

namespace {

std::optional<Eigen::Vector2d> gt_center_px(const PersonAnnotation& p,
                                            const CameraIntrinsics& cam) {
  if (p.gt_translation) return project(*p.gt_translation, cam);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  int n = 0;
  for (int k = 0; k < p.keypoints.rows(); ++k) {
    if (p.keypoints(k, 2) == 0.0) continue;
    acc += p.keypoints.row(k).head<2>().transpose();
    ++n;
  }
  if (n == 0) return std::nullopt;
  return acc / n;
}

}  // namespace

std::vector<MatchResult> match_detections(const std::vector<SceneAnnotation>& gt,
                                          const std::vector<ScenePredictions>& pred,
                                          const CameraIntrinsics& cam,
                                          double threshold_px) {
  if (gt.size() != pred.size()) {
    throw SceneCountMismatch("match_detections: " + std::to_string(gt.size()) +
                             " gt scenes vs " + std::to_string(pred.size()) +
                             " prediction scenes");
  }
  std::vector<MatchResult> out(gt.size());
  for (std::size_t s = 0; s < gt.size(); ++s) {
    const auto& people = gt[s].people;
    const auto& dets = pred[s].people;
    MatchResult& res = out[s];

    std::vector<std::optional<Eigen::Vector2d>> centers(people.size());
    for (std::size_t i = 0; i < people.size(); ++i) centers[i] = gt_center_px(people[i], cam);

    Eigen::MatrixXd cost(people.size(), dets.size());
    for (std::size_t i = 0; i < people.size(); ++i) {
      for (std::size_t j = 0; j < dets.size(); ++j) {
        if (!centers[i]) {
          cost(i, j) = 1e12;
          continue;
        }
        cost(i, j) = (*centers[i] - project(dets[j].translation, cam)).norm();
      }
    }

    std::vector<char> gt_used(people.size(), 0), pred_used(dets.size(), 0);
    const std::vector<int> assign = hungarian(cost);
    for (std::size_t i = 0; i < assign.size(); ++i) {
      const int j = assign[i];
      if (j < 0 || cost(i, j) > threshold_px) continue;
      res.pairs.push_back({static_cast<int>(i), j, cost(i, j)});
      gt_used[i] = 1;
      pred_used[j] = 1;
    }
    for (std::size_t i = 0; i < people.size(); ++i) {
      if (!gt_used[i]) res.misses.push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (!pred_used[j]) res.false_alarms.push_back(static_cast<int>(j));
    }
  }
  return out;
}

PcdrResult pcdr(const std::vector<SceneAnnotation>& gt,
                const std::vector<ScenePredictions>& pred,
                const std::vector<MatchResult>& matches, double eq_threshold) {
  if (gt.size() != matches.size() || gt.size() != pred.size()) {
    throw SceneCountMismatch("pcdr: scene count mismatch");
  }
  PcdrResult res;
  std::array<std::size_t, kNumAgeClasses> class_correct{};

  for (std::size_t s = 0; s < gt.size(); ++s) {
    const auto& people = gt[s].people;
    std::vector<std::optional<double>> pred_depth(people.size());
    for (const MatchPair& pr : matches[s].pairs) {
      pred_depth[pr.gt_index] = pred[s].people[pr.pred_index].translation.z();
    }
    for (std::size_t i = 0; i < people.size(); ++i) {
      for (std::size_t j = i + 1; j < people.size(); ++j) {
        bool correct = false;
        if (pred_depth[i] && pred_depth[j]) {
          const int ri = people[i].depth_layer, rj = people[j].depth_layer;
          const double dd = *pred_depth[i] - *pred_depth[j];
          if (ri == rj) {
            correct = std::abs(dd) < eq_threshold;
          } else if (ri < rj) {
            correct = dd < 0.0;
          } else {
            correct = dd > 0.0;
          }
        }
        ++res.pairs_total;
        if (correct) ++res.pairs_correct;
        std::set<int> classes = {static_cast<int>(people[i].age_class),
                                 static_cast<int>(people[j].age_class)};
        for (int c : classes) {
          ++res.per_class_pairs[c];
          if (correct) ++class_correct[c];
        }
      }
    }
  }

  res.overall_pct =
      res.pairs_total ? 100.0 * res.pairs_correct / res.pairs_total : 0.0;
  for (int c = 0; c < kNumAgeClasses; ++c) {
    res.per_class_pct[c] =
        res.per_class_pairs[c] ? 100.0 * class_correct[c] / res.per_class_pairs[c] : 0.0;
  }
  return res;
}

MpckResult mpck_h(const std::vector<SceneAnnotation>& gt,
                  const std::vector<ScenePredictions>& pred,
                  const std::vector<MatchResult>& matches, const CameraIntrinsics& cam,
                  const PckConfig& cfg) {
  if (gt.size() != matches.size() || gt.size() != pred.size()) {
    throw SceneCountMismatch("mpck_h: scene count mismatch");
  }
  double total = 0.0;
  std::size_t counted = 0;
  MpckResult res;

  for (std::size_t s = 0; s < gt.size(); ++s) {
    const auto& people = gt[s].people;
    std::vector<std::optional<int>> match_of(people.size());
    for (const MatchPair& pr : matches[s].pairs) match_of[pr.gt_index] = pr.pred_index;

    for (std::size_t i = 0; i < people.size(); ++i) {
      const auto& person = people[i];
      std::vector<int> visible;
      for (int k = 0; k < person.keypoints.rows(); ++k) {
        if (person.keypoints(k, 2) != 0.0) visible.push_back(k);
      }
      if (visible.empty()) {
        ++res.skipped_people;
        continue;
      }
      if (!match_of[i]) {
        ++counted;  // missed person contributes 0
        continue;
      }

      double head_len = 0.0;
      if (cfg.head_top_index >= 0 && cfg.neck_index >= 0 &&
          cfg.head_top_index < person.keypoints.rows() &&
          cfg.neck_index < person.keypoints.rows() &&
          person.keypoints(cfg.head_top_index, 2) != 0.0 &&
          person.keypoints(cfg.neck_index, 2) != 0.0) {
        head_len = (person.keypoints.row(cfg.head_top_index).head<2>() -
                    person.keypoints.row(cfg.neck_index).head<2>())
                       .norm();
      }
      if (head_len <= 0.0) {
        // bbox-diagonal fallback
        double lo_u = 1e300, lo_v = 1e300, hi_u = -1e300, hi_v = -1e300;
        for (int k : visible) {
          lo_u = std::min(lo_u, person.keypoints(k, 0));
          hi_u = std::max(hi_u, person.keypoints(k, 0));
          lo_v = std::min(lo_v, person.keypoints(k, 1));
          hi_v = std::max(hi_v, person.keypoints(k, 1));
        }
        head_len = 0.25 * std::hypot(hi_u - lo_u, hi_v - lo_v);
      }
      const double threshold = cfg.head_factor * head_len;

      const PredictedPerson& det = pred[s].people[*match_of[i]];
      if (!det.joints || det.joints->rows() != person.keypoints.rows()) {
        ++counted;  // no comparable keypoints; scores 0
        continue;
      }
      int good = 0;
      for (int k : visible) {
        const Eigen::Vector3d p3 = det.joints->row(k).transpose() + det.translation;
        double err = std::numeric_limits<double>::infinity();
        try {
          err = (project(p3, cam) - person.keypoints.row(k).head<2>().transpose()).norm();
        } catch (const BehindCamera&) {
        }
        if (err < threshold) ++good;
      }
      total += static_cast<double>(good) / visible.size();
      ++counted;
    }
  }
  res.mpck = counted ? total / counted : 0.0;
  return res;
}

MeshErrors mesh_errors(const std::vector<Eigen::MatrixXd>& gt_joints,
                       const std::vector<Eigen::MatrixXd>& pred_joints,
                       const std::vector<Eigen::MatrixXd>& gt_vertices,
                       const std::vector<Eigen::MatrixXd>& pred_vertices) {
  if (gt_joints.size() != pred_joints.size() || gt_vertices.size() != pred_vertices.size()) {
    throw TopologyMismatch("mesh_errors: list length mismatch");
  }
  MeshErrors res;
  if (gt_joints.empty()) return res;

  double mpjpe = 0.0, pa = 0.0, mve = 0.0;
  std::size_t vert_people = 0;
  for (std::size_t i = 0; i < gt_joints.size(); ++i) {
    const Eigen::MatrixXd& g = gt_joints[i];
    const Eigen::MatrixXd& p = pred_joints[i];
    if (g.rows() != p.rows() || g.rows() == 0) {
      throw TopologyMismatch("mesh_errors: joint count mismatch at person " +
                             std::to_string(i));
    }
    Eigen::MatrixXd gr = g.rowwise() - g.row(0);
    Eigen::MatrixXd pr = p.rowwise() - p.row(0);
    double acc = 0.0;
    for (int k = 0; k < gr.rows(); ++k) acc += (gr.row(k) - pr.row(k)).norm();
    mpjpe += acc / gr.rows();

    const std::vector<int> all_vis(g.rows(), 1);
    const Eigen::MatrixXd aligned = procrustes_similarity(p, g, all_vis).apply(p);
    acc = 0.0;
    for (int k = 0; k < g.rows(); ++k) acc += (aligned.row(k) - g.row(k)).norm();
    pa += acc / g.rows();

    if (i < gt_vertices.size() && gt_vertices[i].rows() > 0) {
      const Eigen::MatrixXd& gv = gt_vertices[i];
      const Eigen::MatrixXd& pv = pred_vertices[i];
      if (gv.rows() != pv.rows()) {
        throw TopologyMismatch("mesh_errors: vertex count mismatch at person " +
                               std::to_string(i));
      }
      const Eigen::MatrixXd gvr = gv.rowwise() - g.row(0);
      const Eigen::MatrixXd pvr = pv.rowwise() - p.row(0);
      acc = 0.0;
      for (int k = 0; k < gvr.rows(); ++k) acc += (gvr.row(k) - pvr.row(k)).norm();
      mve += acc / gvr.rows();
      ++vert_people;
    }
  }
  const double n = static_cast<double>(gt_joints.size());
  res.mpjpe_mm = 1000.0 * mpjpe / n;
  res.pa_mpjpe_mm = 1000.0 * pa / n;
  if (vert_people) {
    res.mve_mm = 1000.0 * mve / vert_people;
    res.has_vertices = true;
  }
  return res;
}

NormalizedErrors normalized_errors(double mpjpe, double mve, double f1) {
  if (!(f1 > 0.0 && f1 <= 1.0)) {
    throw ZeroF1("normalized_errors: f1 must lie in (0,1], got " + format_double(f1));
  }
  return {mpjpe / f1, mve / f1};
}

MetricsReport evaluate(const std::vector<SceneAnnotation>& gt,
                       const std::vector<ScenePredictions>& pred,
                       const CameraIntrinsics& cam, const MetricsConfig& cfg,
                       const BodyModelAssets* assets, double t_alpha) {
  MetricsReport rep;
  const double threshold_px = cfg.match_threshold_frac * cam.height;
  const std::vector<MatchResult> matches = match_detections(gt, pred, cam, threshold_px);

  for (const auto& s : gt) rep.gt_count += s.people.size();
  for (const auto& m : matches) {
    rep.matched += m.pairs.size();
    rep.missed += m.misses.size();
    rep.false_alarms += m.false_alarms.size();
  }
  rep.precision = (rep.matched + rep.false_alarms)
                      ? static_cast<double>(rep.matched) / (rep.matched + rep.false_alarms)
                      : 0.0;
  rep.recall = rep.gt_count ? static_cast<double>(rep.matched) / rep.gt_count : 0.0;
  rep.f1 = (rep.precision + rep.recall > 0.0)
               ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : 0.0;

  rep.pcdr = pcdr(gt, pred, matches, cfg.eq_depth_threshold);
  rep.mpck = mpck_h(gt, pred, matches, cam, cfg.pck).mpck;

  // Mesh errors over matched people with recoverable gt joints.
  std::vector<Eigen::MatrixXd> gt_j, pred_j;
  if (assets) {
    for (std::size_t s = 0; s < gt.size(); ++s) {
      for (const MatchPair& pr : matches[s].pairs) {
        const PersonAnnotation& person = gt[s].people[pr.gt_index];
        const PredictedPerson& det = pred[s].people[pr.pred_index];
        if (!person.gt_params || !person.gt_translation || !det.joints) continue;
        const BodyMesh mesh = smpl_plus_a(*person.gt_params, *assets, t_alpha);
        Eigen::MatrixXd gj = mesh.joints;
        gj.rowwise() += person.gt_translation->transpose();
        Eigen::MatrixXd pj = *det.joints;
        pj.rowwise() += det.translation.transpose();
        gt_j.push_back(std::move(gj));
        pred_j.push_back(std::move(pj));
      }
    }
  }
  if (!gt_j.empty()) rep.mesh = mesh_errors(gt_j, pred_j);

  if (rep.f1 > 0.0) {
    const NormalizedErrors ne = normalized_errors(rep.mesh.mpjpe_mm, rep.mesh.mve_mm, rep.f1);
    rep.nmje_mm = ne.nmje;
    rep.nmve_mm = ne.nmve;
  }
  return rep;
}

namespace {

const char* kClassNames[kNumAgeClasses] = {"adult", "teen", "child", "infant"};

}  // namespace

std::string render_record(const MetricsReport& r) {
  std::ostringstream out;
  out << "bev-report v1\n";
  out << "pcdr_overall_pct = " << format_double(r.pcdr.overall_pct) << '\n';
  for (int c = 0; c < kNumAgeClasses; ++c) {
    out << "pcdr_" << kClassNames[c] << "_pct = " << format_double(r.pcdr.per_class_pct[c])
        << '\n';
  }
  out << "mpck = " << format_double(r.mpck) << '\n';
  out << "precision = " << format_double(r.precision) << '\n';
  out << "recall = " << format_double(r.recall) << '\n';
  out << "f1 = " << format_double(r.f1) << '\n';
  out << "mpjpe_mm = " << format_double(r.mesh.mpjpe_mm) << '\n';
  out << "mve_mm = " << format_double(r.mesh.mve_mm) << '\n';
  out << "pa_mpjpe_mm = " << format_double(r.mesh.pa_mpjpe_mm) << '\n';
  out << "nmje_mm = " << format_double(r.nmje_mm) << '\n';
  out << "nmve_mm = " << format_double(r.nmve_mm) << '\n';
  out << "gt_count = " << r.gt_count << '\n';
  out << "matched = " << r.matched << '\n';
  out << "missed = " << r.missed << '\n';
  out << "false_alarms = " << r.false_alarms << '\n';
  return out.str();
}

std::string render_report(const MetricsReport& r) {
  std::ostringstream out;
  out << "== evaluation report ==\n";
  out << "detection: precision " << format_double(r.precision) << ", recall "
      << format_double(r.recall) << ", f1 " << format_double(r.f1) << " (" << r.matched
      << " matched, " << r.missed << " missed, " << r.false_alarms
      << " false alarms of " << r.gt_count << " gt)\n";
  out << "pcdr: overall " << format_double(r.pcdr.overall_pct) << "%";
  for (int c = 0; c < kNumAgeClasses; ++c) {
    out << ", " << kClassNames[c] << " " << format_double(r.pcdr.per_class_pct[c]) << "%";
  }
  out << '\n';
  out << "mpck: " << format_double(r.mpck) << '\n';
  out << "mesh: mpjpe " << format_double(r.mesh.mpjpe_mm) << " mm, mve "
      << format_double(r.mesh.mve_mm) << " mm, pa-mpjpe "
      << format_double(r.mesh.pa_mpjpe_mm) << " mm\n";
  out << "normalized: nmje " << format_double(r.nmje_mm) << " mm, nmve "
      << format_double(r.nmve_mm) << " mm\n";
  if (!r.config_echo.empty()) {
    out << "-- config --\n" << r.config_echo;
    if (r.config_echo.back() != '\n') out << '\n';
  }
  return out.str();
}

}  // namespace bev
