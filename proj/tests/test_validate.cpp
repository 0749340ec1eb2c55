#include "doctest.h"

#include "icdiff/validate.hpp"

using namespace icdiff;

TEST_CASE("every check passes on the shipped implementation") {
  ValidateOptions opts;
  opts.zero_error_sequences = 100;
  for (const CheckResult& r : run_checks(opts)) {
    INFO(r.id << ": " << r.detail);
    CHECK(r.passed);
  }
}

TEST_CASE("a corrupted posterior fails the named check") {
  ValidateOptions opts;
  opts.posterior = [](const StickyChainModel& model, const SequenceState& x) {
    PosteriorTable post = leave_one_out_posterior(model, x);
    // Shift a little mass between the first two tokens of the last row.
    post(x.size() - 1, 0) += 1e-6;
    post(x.size() - 1, 1) -= 1e-6;
    return post;
  };
  const CheckResult r = check_posterior_oracle(opts);
  CHECK(r.id == "posterior_oracle");
  CHECK_FALSE(r.passed);
}

TEST_CASE("check ids are unique and ordered") {
  const auto& checks = all_checks();
  REQUIRE(checks.size() == 9);
  CHECK(std::string(checks.front().id) == "posterior_oracle");
  for (std::size_t i = 0; i < checks.size(); ++i)
    for (std::size_t j = i + 1; j < checks.size(); ++j) CHECK(std::string(checks[i].id) != checks[j].id);
}
