#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace bev {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BEV_DEFINE_ERROR(Name)     \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

BEV_DEFINE_ERROR(DegenerateRotation);
BEV_DEFINE_ERROR(AssetMismatch);
BEV_DEFINE_ERROR(BehindCamera);
BEV_DEFINE_ERROR(OutOfFrustum);
BEV_DEFINE_ERROR(ShapeMismatch);
BEV_DEFINE_ERROR(OutOfBounds);
BEV_DEFINE_ERROR(UnknownClass);
BEV_DEFINE_ERROR(TooFewJoints);
BEV_DEFINE_ERROR(PriorFileCorrupt);
BEV_DEFINE_ERROR(SceneCountMismatch);
BEV_DEFINE_ERROR(MissingLayers);
BEV_DEFINE_ERROR(TopologyMismatch);
BEV_DEFINE_ERROR(ZeroF1);
BEV_DEFINE_ERROR(NoVisibleKeypoints);
BEV_DEFINE_ERROR(ParseError);
BEV_DEFINE_ERROR(SchemaViolation);
BEV_DEFINE_ERROR(PlacementInfeasible);

#undef BEV_DEFINE_ERROR

/// Dense row-major n-dimensional array of doubles. Used for all map tensors
/// and as the payload type of the array container format.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Array() = default;
  explicit Array(std::vector<std::size_t> s);

  static Array zeros(std::initializer_list<std::size_t> s) {
    return Array(std::vector<std::size_t>(s));
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t ndim() const { return shape.size(); }

  double& operator()(std::size_t i) { return data[i]; }
  double operator()(std::size_t i) const { return data[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  bool same_shape(const Array& other) const { return shape == other.shape; }
};

inline Array::Array(std::vector<std::size_t> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  data.assign(n, 0.0);
}

/// Formats a double so that re-parsing recovers the exact value
/// (shortest round-trip representation; byte-deterministic).
std::string format_double(double v);

}  // namespace bev
