#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "adjoint_flow/errors.hpp"

namespace adjoint_flow {

enum class ScheduleKind { inverse_linear, constant, custom_power, custom };

/// Learning rate alpha(t) = C_alpha * a(t).
struct Schedule {
  ScheduleKind kind = ScheduleKind::inverse_linear;
  double c_alpha = 1.0;
  double exponent = 1.0;  ///< p in (1 + t)^(-p), custom_power only
  std::function<double(double)> custom;  ///< arbitrary alpha(t), custom only

  static Schedule inverse_linear(double c) { return {ScheduleKind::inverse_linear, c, 1.0, {}}; }
  static Schedule constant(double c) { return {ScheduleKind::constant, c, 0.0, {}}; }
  static Schedule power(double c, double p) { return {ScheduleKind::custom_power, c, p, {}}; }
  static Schedule from_function(std::function<double(double)> fn) {
    return {ScheduleKind::custom, 1.0, 0.0, std::move(fn)};
  }

  double operator()(double t) const {
    switch (kind) {
      case ScheduleKind::inverse_linear: return c_alpha / (1.0 + t);
      case ScheduleKind::constant: return c_alpha;
      case ScheduleKind::custom_power: return c_alpha * std::pow(1.0 + t, -exponent);
      case ScheduleKind::custom: return custom ? custom(t) : 0.0;
    }
    return 0.0;
  }

  void validate() const {
    if (kind != ScheduleKind::custom && !(c_alpha > 0.0)) throw Error("C_alpha must be positive");
    if (kind == ScheduleKind::custom && !custom) throw Error("custom schedule needs a function");
  }
};

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::inverse_linear: return "inverse-linear";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::custom_power: return "custom-power";
    case ScheduleKind::custom: return "custom";
  }
  return "unknown";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "inverse-linear") return ScheduleKind::inverse_linear;
  if (s == "constant") return ScheduleKind::constant;
  if (s == "custom-power") return ScheduleKind::custom_power;
  throw ConfigError("unknown schedule kind '" + s + "'");
}

}  // namespace adjoint_flow
