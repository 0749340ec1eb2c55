#include "doctest.h"

#include <cmath>
#include <numbers>

#include "icdiff/schedule.hpp"
#include "icdiff/error.hpp"

using namespace icdiff;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson rule, used as an independent reference for integrals.
template <typename F>
double simpson(F f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("linear schedule closed forms") {
  const MaskingSchedule s(ScheduleKind::linear);
  CHECK(s.alpha(0.25) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.alpha_prime(0.25) == -1.0);
  CHECK(s.beta(0.25) == doctest::Approx(1.0 / 0.75).epsilon(1e-14));
  CHECK(s.unmask_rate(0.25) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("cosine schedule closed forms") {
  const MaskingSchedule s(ScheduleKind::cosine);
  CHECK(s.alpha(0.5) == doctest::Approx(std::cos(kPi / 4)).epsilon(1e-15));
  CHECK(s.alpha_prime(0.5) == doctest::Approx(-kPi / 2 * std::sin(kPi / 4)).epsilon(1e-14));
  CHECK(s.beta(0.5) == doctest::Approx(kPi / 2 * std::tan(kPi / 4)).epsilon(1e-14));
  for (double t : {0.1, 0.4, 0.9}) {
    const double a = std::cos(kPi * t / 2);
    CHECK(s.unmask_rate(t) == doctest::Approx(kPi / 2 * std::sin(kPi * t / 2) / (1.0 - a)).epsilon(1e-12));
  }
}

TEST_CASE("endpoints are exact") {
  for (ScheduleKind k : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const MaskingSchedule s(k);
    CHECK(s.alpha(0.0) == 1.0);
    CHECK(s.alpha(1.0) == 0.0);
    CHECK_FALSE(s.eval(1.0).beta.has_value());
    CHECK(s.eval(0.0).beta.has_value());
  }
}

TEST_CASE("singular and out-of-range times raise") {
  const MaskingSchedule s(ScheduleKind::cosine);
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::contract;
  };
  CHECK(kind_of([&] { s.beta(1.0); }) == ErrorKind::singular);
  CHECK(kind_of([&] { s.unmask_rate(0.0); }) == ErrorKind::singular);
  CHECK(kind_of([&] { s.alpha(-0.1); }) == ErrorKind::domain);
  CHECK(kind_of([&] { s.alpha(1.1); }) == ErrorKind::domain);
  CHECK(kind_of([&] { s.alpha(std::nan("")); }) == ErrorKind::domain);
}

TEST_CASE("alpha is strictly decreasing and alpha' matches finite differences") {
  for (ScheduleKind k : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const MaskingSchedule s(k);
    double prev = s.alpha(0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double t = i / 1000.0;
      const double a = s.alpha(t);
      CHECK(a < prev);
      prev = a;
    }
    for (double t = 0.01; t < 0.99; t += 0.07) {
      const double h = 1e-6;
      const double fd = (s.alpha(t + h) - s.alpha(t - h)) / (2 * h);
      CHECK(s.alpha_prime(t) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(s.beta(t) == doctest::Approx(-s.alpha_prime(t) / s.alpha(t)).epsilon(1e-13));
    }
  }
}

TEST_CASE("integrated beta matches quadrature of beta") {
  for (ScheduleKind k : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const MaskingSchedule s(k);
    for (auto [t0, t1] : {std::pair{0.0, 0.5}, std::pair{0.2, 0.9}, std::pair{0.6, 0.61}}) {
      const double ref = simpson([&](double t) { return s.beta(t); }, t0, t1);
      CHECK(s.integrated_beta(t0, t1) == doctest::Approx(ref).epsilon(1e-9));
    }
  }
}

TEST_CASE("schedule names round-trip") {
  CHECK(parse_schedule_kind("linear") == ScheduleKind::linear);
  CHECK(parse_schedule_kind("cosine") == ScheduleKind::cosine);
  CHECK(to_string(ScheduleKind::cosine) == "cosine");
  CHECK_THROWS_AS(parse_schedule_kind("geometric"), Error);
}
