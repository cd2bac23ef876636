#include "gravtrack/integrator.hpp"

#include "gravtrack/error.hpp"

namespace gravtrack {

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw ParameterError("integrator tol must be > 0");
  if (!(cfg.h_min > 0.0 && cfg.h_min <= cfg.h_init && cfg.h_init <= cfg.h_max)) {
    throw ParameterError("integrator steps must satisfy 0 < h_min <= h_init <= h_max");
  }
  if (cfg.max_steps < 1) throw ParameterError("integrator max_steps must be >= 1");
  if (!(cfg.stagnation_tol >= 0.0)) throw ParameterError("integrator stagnation_tol must be >= 0");
}

StepResult integrate_step(Vec2 state, const ForceField2D& field, double h, Direction dir) {
  const double sign = dir == Direction::descent ? 1.0 : -1.0;
  const auto f = [&](Vec2 p) { return sign * bilinear_sample(field, p); };
  const auto s = embedded_step(state, f, h);
  return {s.high, s.error};
}

StepDecision adapt_step(double error, double h, const IntegratorConfig& cfg) {
  const bool at_floor = h <= cfg.h_min;
  const double ratio = cfg.tol / std::max(error, 1e-12);
  const double proposal = 0.9 * h * std::cbrt(ratio);
  return {error <= cfg.tol || at_floor, std::clamp(proposal, cfg.h_min, cfg.h_max)};
}

}  // namespace gravtrack
