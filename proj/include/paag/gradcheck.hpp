#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "paag/tensor.hpp"

namespace paag {

/// A scalar function of some leaves whose autograd gradient is compared with
/// central finite differences.
struct GradCheck {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Tensor()> loss;
};

struct GradCheckResult {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Error per entry is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult run_gradcheck(GradCheck& check, double tolerance = kGradCheckTolerance,
                              double step = 1e-4);

/// One check per differentiable op on random inputs.
std::vector<GradCheck> op_gradchecks(std::uint64_t seed);
/// loss_g over every generator parameter and loss_d (both critic objectives,
/// including the gradient penalty) over every critic parameter, on a toy
/// instance.
std::vector<GradCheck> model_gradchecks(std::uint64_t seed);

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  bool passed() const;
  std::string text() const;
};

GradCheckReport run_gradchecks(std::vector<GradCheck> checks,
                               double tolerance = kGradCheckTolerance);

}  // namespace paag
