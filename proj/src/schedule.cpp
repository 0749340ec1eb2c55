#include "icdiff/schedule.hpp"

#include <cmath>
#include <numbers>

#include "icdiff/error.hpp"

namespace icdiff {

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "cosine") return ScheduleKind::cosine;
  throw Error(ErrorKind::config, "unknown schedule kind '" + std::string(name) + "'");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "cosine";
}

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::domain, "time must lie in [0, 1]");
}

}  // namespace

double MaskingSchedule::alpha(double t) const {
  check_time(t);
  if (t == 1.0) return 0.0;
  switch (kind_) {
    case ScheduleKind::linear: return 1.0 - t;
    case ScheduleKind::cosine: return std::cos(0.5 * std::numbers::pi * t);
  }
  return 0.0;
}

double MaskingSchedule::alpha_prime(double t) const {
  check_time(t);
  switch (kind_) {
    case ScheduleKind::linear: return -1.0;
    case ScheduleKind::cosine: return -0.5 * std::numbers::pi * std::sin(0.5 * std::numbers::pi * t);
  }
  return 0.0;
}

ScheduleValue MaskingSchedule::eval(double t) const {
  ScheduleValue v;
  v.alpha = alpha(t);
  v.alpha_prime = alpha_prime(t);
  if (v.alpha > 0.0) v.beta = -v.alpha_prime / v.alpha;
  return v;
}

double MaskingSchedule::beta(double t) const {
  const ScheduleValue v = eval(t);
  if (!v.beta) throw Error(ErrorKind::singular, "beta undefined where alpha(t) = 0");
  return *v.beta;
}

double MaskingSchedule::unmask_rate(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::cosine) {
    // pi/2 sin(u) / (1 - cos(u)) = pi/2 cot(u/2), stable near t = 0.
    const double half = 0.25 * std::numbers::pi * t;
    if (half == 0.0) throw Error(ErrorKind::singular, "unmask rate undefined where alpha(t) = 1");
    return 0.5 * std::numbers::pi * std::cos(half) / std::sin(half);
  }
  const double a = alpha(t);
  if (a >= 1.0) throw Error(ErrorKind::singular, "unmask rate undefined where alpha(t) = 1");
  return -alpha_prime(t) / (1.0 - a);
}

double MaskingSchedule::integrated_beta(double t0, double t1) const {
  if (t1 < t0) throw Error(ErrorKind::domain, "integrated_beta requires t0 <= t1");
  if (t0 == t1) return 0.0;
  const double a1 = alpha(t1);
  if (a1 <= 0.0) throw Error(ErrorKind::singular, "integral of beta diverges at alpha = 0");
  return std::log(alpha(t0)) - std::log(a1);
}

}  // namespace icdiff
