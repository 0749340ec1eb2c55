#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace icdiff {

enum class ScheduleKind { linear, cosine };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string to_string(ScheduleKind kind);

struct ScheduleValue {
  double alpha = 1.0;
  double alpha_prime = 0.0;
  /// -alpha'/alpha; empty when alpha == 0.
  std::optional<double> beta;
};

/// Survival function of the absorbing forward process on the unit horizon.
///
///   linear: alpha(t) = 1 - t
///   cosine: alpha(t) = cos(pi t / 2)
///
/// Both satisfy alpha(0) = 1, alpha(1) = 0 and are strictly decreasing.
class MaskingSchedule {
 public:
  explicit MaskingSchedule(ScheduleKind kind = ScheduleKind::cosine) : kind_(kind) {}

  ScheduleKind kind() const noexcept { return kind_; }

  /// Throws domain error for t outside [0, 1].
  ScheduleValue eval(double t) const;

  double alpha(double t) const;
  double alpha_prime(double t) const;
  /// Throws singular error where alpha(t) == 0.
  double beta(double t) const;
  /// -alpha'(t) / (1 - alpha(t)): the total unmasking rate of one masked
  /// position under the time reversal. Throws singular where alpha(t) == 1.
  double unmask_rate(double t) const;
  /// Integral of beta over [t0, t1] = log alpha(t0) - log alpha(t1).
  double integrated_beta(double t0, double t1) const;

 private:
  ScheduleKind kind_;
};

}  // namespace icdiff
