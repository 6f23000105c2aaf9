#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bev/body_model.hpp"
#include "bev/losses.hpp"

namespace bev {

struct GradCheckOptions {
  std::uint64_t seed = 1;
  int points = 1000;       // random evaluation points per suite
  double step = 1e-5;      // central difference step
  double tolerance = 1e-4; // relative error bound
  double boundary_margin = 1e-3;  // kept clear of piece boundaries
};

struct GradCheckSuite {
  std::string name;
  int points = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckSuite> suites;
  GradCheckOptions options;

  bool all_passed() const;
  std::string render() const;
};

/// Central finite-difference audit of every analytic gradient: the
/// depth-layer and age losses, 2D/3D focal losses, projection, parameter
/// and joint losses, and the body model Jacobians (checked as directional
/// derivatives). Random points avoid piece boundaries by boundary_margin.
GradCheckReport run_gradient_checks(const BodyModelAssets& assets, double t_alpha,
                                    const GradCheckOptions& options = {});

}  // namespace bev
