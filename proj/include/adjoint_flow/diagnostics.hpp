#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"
#include "adjoint_flow/mesh.hpp"
#include "adjoint_flow/schedule.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double t) const noexcept { return t >= lo && t <= hi; }
};

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  Window window;
  std::size_t samples = 0;
};

/// [t_max / 100, t_max] over the positive times present.
inline Window last_two_decades(std::span<const double> t) {
  double hi = 0.0;
  for (double v : t) hi = std::max(hi, v);
  if (!(hi > 0.0)) throw FitError("no positive times to fit");
  return {hi / 100.0, hi};
}

/// Two decades ending at the last time the column is still above `floor`.
inline Window window_above_floor(std::span<const double> t, std::span<const double> values, double floor) {
  if (t.size() != values.size()) throw ConformabilityError("time and value columns differ in length");
  double hi = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] > 0.0 && values[i] > floor) hi = std::max(hi, t[i]);
  if (!(hi > 0.0)) throw FitError("column never exceeds the noise floor " + format_number(floor));
  return {hi / 100.0, hi};
}

/// Least-squares fit of log(value) against log(t) over the window.
inline RateFit fit_rate(std::span<const double> t, std::span<const double> values,
                        std::optional<Window> window = std::nullopt) {
  if (t.size() != values.size()) throw ConformabilityError("time and value columns differ in length");
  const Window w = window ? *window : last_two_decades(t);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!w.contains(t[i]) || !(t[i] > 0.0)) continue;
    if (!(values[i] > 0.0))
      throw FitError("non-positive value " + format_number(values[i]) + " at t = " + format_number(t[i]) +
                     "; the column has reached its noise floor, shrink the window");
    x.push_back(std::log(t[i]));
    y.push_back(std::log(values[i]));
  }
  if (x.size() < 10) throw FitError("need at least 10 samples in the fit window, got " + std::to_string(x.size()));

  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit window holds a single distinct time");

  RateFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.exponent * x[i]);
    ss_res += e * e;
  }
  // A constant column (spread at rounding level) is fitted exactly.
  const double spread_floor = 1e-24 * n * (1.0 + my * my);
  fit.r_squared = syy > spread_floor ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.window = w;
  fit.samples = x.size();
  return fit;
}

inline RateFit fit_rate(const TraceRecord& trace, const std::string& column,
                        std::optional<Window> window = std::nullopt) {
  const std::vector<double> t = trace.column("t"), v = trace.column(column);
  return fit_rate(t, v, window);
}

/// max over the window of value / envelope(t).
inline double ratio_bound(std::span<const double> t, std::span<const double> values,
                          const std::function<double(double)>& envelope, Window window) {
  if (t.size() != values.size()) throw ConformabilityError("time and value columns differ in length");
  double best = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!window.contains(t[i])) continue;
    const double e = envelope(t[i]);
    if (!(e > 0.0)) throw Error("envelope is not positive at t = " + format_number(t[i]));
    best = std::max(best, values[i] / e);
    ++used;
  }
  if (used == 0) throw Error("ratio window [" + format_number(window.lo) + ", " + format_number(window.hi) + "] is empty");
  return best;
}

/// out[i] = max(values[i..]).
inline std::vector<double> suffix_max(std::span<const double> values) {
  std::vector<double> out(values.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = values.size(); i-- > 0;) out[i] = m = std::max(m, values[i]);
  return out;
}

/// out[i] = max(values[0..i]).
inline std::vector<double> prefix_max(std::span<const double> values) {
  std::vector<double> out(values.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = m = std::max(m, values[i]);
  return out;
}

enum class Verdict { pass, fail, unchecked };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::unchecked: return "UNCHECKED";
  }
  return "UNCHECKED";
}

struct ConditionVerdict {
  std::string name;
  Verdict verdict = Verdict::unchecked;
  std::string detail;
};

struct ScheduleReport {
  std::vector<ConditionVerdict> conditions;

  bool all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionVerdict& c) { return c.verdict == Verdict::pass; });
  }
  bool any_fail() const {
    return std::any_of(conditions.begin(), conditions.end(),
                       [](const ConditionVerdict& c) { return c.verdict == Verdict::fail; });
  }
  const ConditionVerdict& at(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw Error("no schedule condition named '" + name + "'");
  }
};

/// Closed-form verdicts for alpha(t) = C (1+t)^{-p}. Inverse-linear is
/// p = 1, constant is p = 0; custom schedules are never verified.
inline ScheduleReport check_schedule(const Schedule& sched, double gamma) {
  sched.validate();
  if (!(gamma >= 0.0)) throw Error("gamma must be non-negative");
  ScheduleReport r;
  const char* names[] = {"alpha_vanishes", "integral_alpha_diverges", "integral_alpha_squared_finite",
                         "weighted_integral_bounded", "log_derivative_vanishes"};
  if (sched.kind == ScheduleKind::custom) {
    for (const char* n : names) r.conditions.push_back({n, Verdict::unchecked, "custom schedule"});
    return r;
  }
  const double p = sched.kind == ScheduleKind::inverse_linear ? 1.0
                   : sched.kind == ScheduleKind::constant     ? 0.0
                                                              : sched.exponent;
  const std::string ps = "p = " + format_number(p);
  auto v = [](bool ok) { return ok ? Verdict::pass : Verdict::fail; };
  const bool integral_infinite = p <= 1.0;
  r.conditions.push_back({names[0], v(p > 0.0), ps});
  r.conditions.push_back({names[1], v(integral_infinite), ps});
  r.conditions.push_back({names[2], v(p > 0.5), ps});
  // int_0^t a(s) exp(-gamma int_s^t a) ds = (1 - exp(-gamma int_0^t a)) / gamma for gamma > 0,
  // and int_0^t a otherwise.
  const bool weighted = gamma > 0.0 || !integral_infinite;
  r.conditions.push_back({names[3], v(weighted), ps + ", gamma = " + format_number(gamma)});
  // a'/a = -p / (1 + t).
  r.conditions.push_back({names[4], Verdict::pass, ps});
  return r;
}

/// Flat key=value report with keys in insertion order.
class KeyValueReport {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_number(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  std::optional<std::string> get(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return kv.second;
    return std::nullopt;
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }
  void write(const std::string& path) const { write_file_atomic(path, str()); }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void add_schedule_report(KeyValueReport& out, const ScheduleReport& r, const std::string& prefix = "schedule.") {
  for (const auto& c : r.conditions) out.set(prefix + c.name, to_string(c.verdict));
}

}  // namespace adjoint_flow
