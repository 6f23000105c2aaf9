#include "bev/losses.hpp"

#include <cmath>

namespace bev {

AgeRanges AgeRanges::defaults() {
  AgeRanges r;
  r.ranges[static_cast<int>(AgeClass::Adult)] = {-0.05, 0.0, 0.15};
  r.ranges[static_cast<int>(AgeClass::Teen)] = {0.15, 0.3, 0.45};
  r.ranges[static_cast<int>(AgeClass::Child)] = {0.45, 0.6, 0.75};
  r.ranges[static_cast<int>(AgeClass::Infant)] = {0.75, 0.9, 1.0};
  return r;
}

void AgeRanges::validate() const {
  double prev_mid = -std::numeric_limits<double>::infinity();
  for (const AgeRange& r : ranges) {
    if (!(r.lower < r.mid && r.mid < r.upper)) {
      throw Error("age ranges: need lower < mid < upper per class");
    }
    if (r.mid <= prev_mid) throw Error("age ranges: class midpoints must increase");
    prev_mid = r.mid;
  }
}

void LossWeights::validate() const {
  for (double w : {cm, cm3d, theta, beta, prior, mpj, pmpj, pj2d, depth, age}) {
    if (w < 0.0) throw Error("loss weights must be non-negative");
  }
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

DepthLayerLossResult depth_layer_loss(const DepthLayerPair& pair) {
  if (pair.gamma <= 0.0) throw Error("depth_layer_loss: gamma must be positive");
  const double diff = pair.d_i - pair.d_j;
  DepthLayerLossResult out{0.0, 0.0, 0.0};
  if (pair.r_i == pair.r_j) {
    out.loss = diff * diff;
    out.d_di = 2.0 * diff;
    out.d_dj = -2.0 * diff;
  } else if (pair.r_i < pair.r_j) {
    // i annotated nearer: require d_i - d_j <= gamma * (r_i - r_j) < 0
    const double margin = diff - pair.gamma * (pair.r_i - pair.r_j);
    if (margin > 0.0) {
      out.loss = softplus(diff);
      out.d_di = sigmoid(diff);
      out.d_dj = -out.d_di;
    }
  } else {
    const double margin = pair.gamma * (pair.r_i - pair.r_j) - diff;
    if (margin > 0.0) {
      out.loss = softplus(-diff);
      out.d_dj = sigmoid(-diff);
      out.d_di = -out.d_dj;
    }
  }
  return out;
}

SceneDepthLossResult scene_depth_layer_loss(const std::vector<double>& depths,
                                            const std::vector<int>& layers, double gamma) {
  if (depths.size() != layers.size()) {
    throw ShapeMismatch("scene_depth_layer_loss: depths/layers size mismatch");
  }
  const std::size_t n = depths.size();
  SceneDepthLossResult out{0.0, std::vector<double>(n, 0.0)};
  if (n < 2) return out;
  const double npairs = n * (n - 1) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto r = depth_layer_loss({depths[i], depths[j], layers[i], layers[j], gamma});
      out.loss += r.loss / npairs;
      out.grad[i] += r.d_di / npairs;
      out.grad[j] += r.d_dj / npairs;
    }
  }
  return out;
}

AgeLossResult age_loss(double alpha, AgeClass k, const AgeRanges& ranges) {
  ranges.validate();
  const AgeRange& r = ranges.of(k);
  if (alpha > r.lower && alpha <= r.upper) return {0.0, 0.0};
  const double d = alpha - r.mid;
  return {d * d, 2.0 * d};
}

FocalLossResult focal_loss(const Array& pred, const Array& gt, double a, double b) {
  if (!pred.same_shape(gt)) throw ShapeMismatch("focal_loss: shape mismatch");
  constexpr double kEps = 1e-6;
  std::size_t n_pos = 0;
  for (double g : gt.data) {
    if (g == 1.0) ++n_pos;
  }
  const double norm = std::max<std::size_t>(1, n_pos);

  FocalLossResult out;
  out.loss = 0.0;
  out.grad = Array(pred.shape);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred.data[i];
    const double p = std::clamp(raw, kEps, 1.0 - kEps);
    const double g = gt.data[i];
    double term, dterm;
    if (g == 1.0) {
      const double q = std::pow(1.0 - p, a);
      term = -q * std::log(p);
      dterm = a * std::pow(1.0 - p, a - 1.0) * std::log(p) - q / p;
    } else {
      const double red = std::pow(1.0 - g, b);
      term = -red * std::pow(p, a) * std::log(1.0 - p);
      dterm = -red * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) -
                      std::pow(p, a) / (1.0 - p));
    }
    out.loss += term / norm;
    out.grad.data[i] = (raw > kEps && raw < 1.0 - kEps) ? dterm / norm : 0.0;
  }
  return out;
}

FocalLossResult focal_loss_2d(const Array& pred, const Array& gt, double a, double b) {
  if (pred.ndim() != 3 || pred.dim(0) != 1) throw ShapeMismatch("focal_loss_2d: expected 1xHxW");
  return focal_loss(pred, gt, a, b);
}

FocalLossResult focal_loss_3d(const Array& pred, const Array& gt, double a, double b) {
  if (pred.ndim() != 4 || pred.dim(0) != 1) {
    throw ShapeMismatch("focal_loss_3d: expected 1xDxHxW");
  }
  return focal_loss(pred, gt, a, b);
}

Eigen::MatrixXd SimilarityTransform::apply(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = scale * (points * rotation.transpose());
  out.rowwise() += translation.transpose();
  return out;
}

SimilarityTransform procrustes_similarity(const Eigen::MatrixXd& pred,
                                          const Eigen::MatrixXd& gt,
                                          const std::vector<int>& vis) {
  if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3 ||
      static_cast<int>(vis.size()) != pred.rows()) {
    throw ShapeMismatch("procrustes: need matching Kx3 point sets");
  }
  int n = 0;
  Eigen::Vector3d mu_p = Eigen::Vector3d::Zero(), mu_g = Eigen::Vector3d::Zero();
  for (int k = 0; k < pred.rows(); ++k) {
    if (!vis[k]) continue;
    mu_p += pred.row(k).transpose();
    mu_g += gt.row(k).transpose();
    ++n;
  }
  if (n < 3) throw TooFewJoints("procrustes: need at least 3 visible joints");
  mu_p /= n;
  mu_g /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_p = 0.0;
  for (int k = 0; k < pred.rows(); ++k) {
    if (!vis[k]) continue;
    const Eigen::Vector3d x = pred.row(k).transpose() - mu_p;
    const Eigen::Vector3d y = gt.row(k).transpose() - mu_g;
    cov += y * x.transpose();
    var_p += x.squaredNorm();
  }
  cov /= n;
  var_p /= n;
  if (var_p <= 0.0) throw TooFewJoints("procrustes: degenerate (coincident) points");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  t.scale = svd.singularValues().dot(s) / var_p;
  t.translation = mu_g - t.scale * t.rotation * mu_p;
  return t;
}

JointLossResult joint_losses(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                             const std::vector<int>& vis) {
  if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3 ||
      static_cast<int>(vis.size()) != pred.rows()) {
    throw ShapeMismatch("joint_losses: need matching Kx3 point sets");
  }
  const int K = static_cast<int>(pred.rows());
  JointLossResult out;
  out.d_mpj = Eigen::MatrixXd::Zero(K, 3);
  out.d_pmpj = Eigen::MatrixXd::Zero(K, 3);

  int n_vis = 0;
  for (int k = 0; k < K; ++k) {
    if (vis[k]) ++n_vis;
  }
  if (n_vis == 0) return out;

  for (int k = 0; k < K; ++k) {
    if (!vis[k]) continue;
    const Eigen::RowVector3d d = pred.row(k) - gt.row(k);
    out.mpj += d.squaredNorm() / n_vis;
    out.d_mpj.row(k) = 2.0 * d / n_vis;
  }

  if (n_vis >= 3) {
    const SimilarityTransform t = procrustes_similarity(pred, gt, vis);
    const Eigen::MatrixXd aligned = t.apply(pred);
    out.pmpj_valid = true;
    for (int k = 0; k < K; ++k) {
      if (!vis[k]) continue;
      const Eigen::RowVector3d d = aligned.row(k) - gt.row(k);
      out.pmpj += d.squaredNorm() / n_vis;
      // alignment treated as fixed at its optimum
      out.d_pmpj.row(k) = 2.0 * t.scale * d * t.rotation / n_vis;
    }
  }
  return out;
}

ProjectionLossResult projection_loss(const Eigen::MatrixXd& pred_joints,
                                     const Eigen::Vector3d& translation,
                                     const Eigen::MatrixXd& gt_kp2d,
                                     const CameraIntrinsics& cam) {
  if (pred_joints.rows() != gt_kp2d.rows() || pred_joints.cols() != 3 ||
      gt_kp2d.cols() != 3) {
    throw ShapeMismatch("projection_loss: need Kx3 joints and Kx3 keypoints");
  }
  const int K = static_cast<int>(pred_joints.rows());
  ProjectionLossResult out;
  out.d_joints = Eigen::MatrixXd::Zero(K, 3);

  int n_vis = 0;
  for (int k = 0; k < K; ++k) {
    if (gt_kp2d(k, 2) != 0.0) ++n_vis;
  }
  if (n_vis == 0) return out;
  out.any_visible = true;

  const double f = cam.focal();
  const double inv_h = 1.0 / cam.height;
  for (int k = 0; k < K; ++k) {
    if (gt_kp2d(k, 2) == 0.0) continue;
    const Eigen::Vector3d p = pred_joints.row(k).transpose() + translation;
    const Eigen::Vector2d px = project(p, cam);
    const double eu = (px.x() - gt_kp2d(k, 0)) * inv_h;
    const double ev = (px.y() - gt_kp2d(k, 1)) * inv_h;
    out.loss += (eu * eu + ev * ev) / n_vis;

    const double z = p.z();
    Eigen::Vector3d du(f / z, 0.0, -f * p.x() / (z * z));
    Eigen::Vector3d dv(0.0, f / z, -f * p.y() / (z * z));
    const Eigen::Vector3d g = (2.0 / n_vis) * inv_h * (eu * du + ev * dv);
    out.d_joints.row(k) = g.transpose();
    out.d_translation += g;
  }
  return out;
}

MixturePrior MixturePrior::load(const std::string& path) {
  ArrayContainer c;
  try {
    c = load_arrays(path);
  } catch (const Error& e) {
    throw PriorFileCorrupt(std::string("prior file: ") + e.what());
  }
  auto need = [&](const char* name) -> const Array& {
    auto it = c.find(name);
    if (it == c.end()) throw PriorFileCorrupt(std::string("prior file: missing '") + name + "'");
    return it->second;
  };
  const Array& w = need("weights");
  const Array& m = need("means");
  const Array& prec = need("precisions");
  const Array& k = need("constants");
  if (w.ndim() != 1 || m.ndim() != 2 || prec.ndim() != 3 || k.ndim() != 1) {
    throw PriorFileCorrupt("prior file: unexpected array ranks");
  }
  const std::size_t M = w.dim(0), P = m.dim(1);
  if (m.dim(0) != M || k.dim(0) != M || prec.dim(0) != M || prec.dim(1) != P ||
      prec.dim(2) != P) {
    throw PriorFileCorrupt("prior file: inconsistent mixture dimensions");
  }
  MixturePrior out;
  out.weights.resize(M);
  out.constants.resize(M);
  out.means.resize(M, P);
  out.precisions.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    out.weights(i) = w(i);
    out.constants(i) = k(i);
    out.precisions[i].resize(P, P);
    for (std::size_t j = 0; j < P; ++j) out.means(i, j) = m(i, j);
    for (std::size_t r = 0; r < P; ++r) {
      for (std::size_t cidx = 0; cidx < P; ++cidx) {
        out.precisions[i](r, cidx) = prec(i, r, cidx);
      }
    }
  }
  return out;
}

PosePriorResult pose_prior(const BodyParams& params, const MixturePrior* prior) {
  const Eigen::VectorXd x = params.body_axis_angle();
  if (!prior) {
    return {0.5 * x.squaredNorm(), x};
  }
  if (prior->means.cols() != x.size()) {
    throw PriorFileCorrupt("prior dimensionality does not match the body pose (" +
                           std::to_string(x.size()) + ")");
  }
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_grad;
  for (int m = 0; m < prior->means.rows(); ++m) {
    const Eigen::VectorXd diff = x - prior->means.row(m).transpose();
    const Eigen::VectorXd ld = prior->precisions[m] * diff;
    const double v = 0.5 * diff.dot(ld) + prior->constants(m);
    if (v < best) {
      best = v;
      best_grad = ld;
    }
  }
  return {best, best_grad};
}

ParamLossResult param_losses(const BodyParams& pred, const BodyParams& gt) {
  ParamLossResult out;
  const Eigen::VectorXd dt = pred.theta - gt.theta;
  const Eigen::VectorXd db = pred.beta - gt.beta;
  out.theta_loss = dt.squaredNorm() / dt.size();
  out.beta_loss = db.squaredNorm() / db.size();
  out.d_theta = 2.0 * dt / dt.size();
  out.d_beta = 2.0 * db / db.size();
  return out;
}

TotalLoss total_loss(const LossValues& v, const LossWeights& w) {
  w.validate();
  TotalLoss out;
  out.breakdown = {
      {"cm", w.cm * v.cm},       {"cm3d", w.cm3d * v.cm3d}, {"theta", w.theta * v.theta},
      {"beta", w.beta * v.beta}, {"prior", w.prior * v.prior}, {"mpj", w.mpj * v.mpj},
      {"pmpj", w.pmpj * v.pmpj}, {"pj2d", w.pj2d * v.pj2d}, {"depth", w.depth * v.depth},
      {"age", w.age * v.age},
  };
  out.total = 0.0;
  for (const auto& [name, val] : out.breakdown) out.total += val;
  return out;
}

}  // namespace bev
