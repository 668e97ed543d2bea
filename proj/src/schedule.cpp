#include "scorelab/schedule.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace scorelab {

namespace {

void finalize(Schedule& s) {
  s.steps.resize(s.knots.size() - 1);
  for (std::size_t k = 0; k + 1 < s.knots.size(); ++k)
    s.steps[k] = s.knots[k + 1] - s.knots[k];
  for (double h : s.steps)
    if (!(h > 0.0)) throw std::logic_error("schedule: constructed a nonpositive step");
  const double total = std::accumulate(s.steps.begin(), s.steps.end(), 0.0);
  if (std::abs(total - s.horizon) > 1e-12)
    throw std::logic_error("schedule: steps do not sum to the horizon within 1e-12");
}

}  // namespace

Schedule make_constant_schedule(double T, double h) {
  if (!(T >= 1.0))
    throw std::invalid_argument("make_constant_schedule: horizon must be >= 1");
  if (!(h > 0.0 && h <= 1.0))
    throw std::invalid_argument("make_constant_schedule: step must lie in (0, 1]");
  Schedule s;
  s.horizon = T;
  s.kind = ScheduleKind::constant;
  s.knots.push_back(0.0);
  for (int k = 1;; ++k) {
    const double t = k * h;
    if (t >= T - h * 1e-9) break;
    s.knots.push_back(t);
  }
  s.knots.push_back(T);
  finalize(s);
  s.k0 = s.n_steps();
  s.k1 = 0;
  return s;
}

Schedule make_exp_then_const_schedule(double T, double c, double a, double delta_hint) {
  if (!(c > 0.0 && c <= 0.5))
    throw std::invalid_argument(
        "make_exp_then_const_schedule: contraction parameter c must lie in (0, 1/2]");
  if (!(T >= 1.0 + 2.0 * c))
    throw std::invalid_argument("make_exp_then_const_schedule: horizon must be >= 1 + 2c");
  if (!(a >= 0.0 && a <= 1.0))
    throw std::invalid_argument("make_exp_then_const_schedule: tail parameter a must lie in [0, 1]");
  if (!(delta_hint >= 0.0))
    throw std::invalid_argument("make_exp_then_const_schedule: delta_hint must be nonnegative");

  Schedule s;
  s.horizon = T;
  s.kind = ScheduleKind::exp_then_const;
  s.c = c;
  s.a = a;
  s.knots.push_back(0.0);

  s.k0 = static_cast<int>(std::ceil((T - 1.0) / c - 1e-9));
  for (int k = 1; k <= s.k0; ++k) s.knots.push_back(k * c);

  double t = s.knots.back();
  if (a > 0.0) {
    while ((T - t) / (1.0 + c) > a * (1.0 + 1e-12)) {
      t += c * (T - t) / (1.0 + c);
      s.knots.push_back(t);
      ++s.k1;
    }
    const double tail = c * a;
    while (T - t > tail * (1.0 + 1e-12)) {
      t += tail;
      s.knots.push_back(t);
    }
    // Truncated final step; absorb a sliver below 1e-9 * tail into it.
    if (T - t > tail * 1e-9)
      s.knots.push_back(T);
    else
      s.knots.back() = T;
  } else {
    const double floor_gap = std::max(2.0 * delta_hint, 1e-9);
    while (T - t > floor_gap) {
      t += c * (T - t) / (1.0 + c);
      s.knots.push_back(t);
      ++s.k1;
    }
    s.knots.push_back(T);
  }
  finalize(s);
  return s;
}

}  // namespace scorelab
