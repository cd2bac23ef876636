#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "gravtrack/image.hpp"

namespace gravtrack {

/// Embedded Euler-Heun / third-order pair. Stage k3 is evaluated at the Heun
/// midpoint; the low-order row is Heun's method and carries no weight on k3.
struct IntegratorTableau {
  static constexpr std::array<double, 3> c{0.0, 1.0, 0.5};
  static constexpr double a21 = 1.0;
  static constexpr double a31 = 0.25;
  static constexpr double a32 = 0.25;
  static constexpr std::array<double, 3> b_high{1.0 / 6.0, 1.0 / 6.0, 4.0 / 6.0};
  static constexpr std::array<double, 3> b_low{0.5, 0.5, 0.0};
};

struct IntegratorConfig {
  double tol = 1e-3;    ///< per-step error tolerance, pixels
  double h_init = 0.5;  ///< pixels
  double h_min = 1e-3;
  double h_max = 2.0;
  int max_steps = 10000;
  double stagnation_tol = 1e-6;  ///< force magnitude treated as zero
};

void validate(const IntegratorConfig& cfg);

enum class Direction { descent, ascent };

template <typename State>
struct EmbeddedStep {
  State high;
  State low;
  double error = 0.0;
};

inline double step_distance(double a, double b) { return std::abs(a - b); }
inline double step_distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// One step of the embedded pair for y' = f(y). Works for any State supporting
/// +, scalar * and step_distance.
template <typename State, typename Field>
EmbeddedStep<State> embedded_step(const State& y, Field&& f, double h) {
  using T = IntegratorTableau;
  const State k1 = f(y);
  const State k2 = f(y + h * (T::a21 * k1));
  const State k3 = f(y + h * (T::a31 * k1 + T::a32 * k2));
  EmbeddedStep<State> s{y + h * (T::b_high[0] * k1 + T::b_high[1] * k2 + T::b_high[2] * k3),
                        y + h * (T::b_low[0] * k1 + T::b_low[1] * k2), 0.0};
  s.error = step_distance(s.high, s.low);
  return s;
}

struct StepResult {
  Vec2 state;
  double error = 0.0;
};

/// Step on the bilinearly interpolated force field; the field is negated for ascent.
StepResult integrate_step(Vec2 state, const ForceField2D& field, double h, Direction dir);

struct StepDecision {
  bool accept = false;
  double h_next = 0.0;
};

/// Third-order step-size controller: accept iff error <= tol (always at h_min),
/// h_next = clamp(0.9 h (tol / error)^(1/3), h_min, h_max).
StepDecision adapt_step(double error, double h, const IntegratorConfig& cfg);

}  // namespace gravtrack
