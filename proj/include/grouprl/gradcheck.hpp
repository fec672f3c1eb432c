#pragma once

#include <cstdint>
#include <string>

namespace grouprl {

// Central-difference verification of the three analytic gradients: sequence
// log-probability, the group-mean objective, and the token-mean objective.
// Instances are drawn small (V <= 16, D <= 40, G <= 4, length <= 12) and
// redrawn whenever any token ratio sits within `kink_margin` of a clip bound,
// where the surrogate is not differentiable.
struct GradCheckReport {
  int instances = 0;
  double max_err_logprob = 0.0;
  double max_err_grpo = 0.0;
  double max_err_dapo = 0.0;

  double worst() const;
  bool pass(double tol) const { return worst() <= tol; }
  std::string summary() const;
};

struct GradCheckOptions {
  uint64_t seed = 1;
  int instances = 20;
  double fd_step = 1e-5;
  double kink_margin = 1e-3;
  // Test hook: perturbs one analytic gradient entry per instance so the
  // checker itself can be shown to catch a wrong gradient.
  bool corrupt = false;
};

GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace grouprl
