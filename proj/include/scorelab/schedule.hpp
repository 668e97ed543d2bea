#pragma once
// Backward-time grids: constant steps, and the exponential-then-constant
// family whose steps contract geometrically toward the horizon before
// settling at c*a. Knots always satisfy t_0 = 0 < ... < t_N = T exactly.

#include <vector>

namespace scorelab {

enum class Process { ou, kou };

enum class ScheduleKind { constant, exp_then_const };

struct Schedule {
  double horizon = 0.0;
  std::vector<double> knots;  // size N + 1, knots.front() = 0, knots.back() = horizon
  std::vector<double> steps;  // size N, steps[k] = knots[k+1] - knots[k]
  ScheduleKind kind = ScheduleKind::constant;
  double c = 0.0;
  double a = 0.0;
  int k0 = 0;  // constant-phase step count (exp_then_const)
  int k1 = 0;  // contracting-phase step count (exp_then_const)
  int n_steps() const { return static_cast<int>(steps.size()); }
};

// Knots k*h with a truncated final step landing on T.
// Preconditions: T >= 1, 0 < h <= 1.
Schedule make_constant_schedule(double T, double h);

// Constant phase of k0 = ceil((T-1)/c) steps of size c, then the recursion
// h = c * (T - t) / (1 + c) while the next step would exceed c*a, then
// constant steps c*a with a truncated final step. With a = 0 the recursion
// runs until the remaining gap is at most max(2*delta_hint, 1e-9) and a
// single final step closes it, so the tail still lands on T exactly.
// Preconditions: c in (0, 1/2], T >= 1 + 2c, a in [0, 1], delta_hint >= 0.
Schedule make_exp_then_const_schedule(double T, double c, double a, double delta_hint = 0.0);

}  // namespace scorelab
