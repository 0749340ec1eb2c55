#pragma once

// Cross-module invariant suite behind `icdiff validate`. Every check is
// deterministic given the seed and compares an implementation against an
// exact (enumerated or dense) reference.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icdiff/chain.hpp"

namespace icdiff {

struct CheckResult {
  std::string id;
  bool passed = false;
  std::string detail;
  double elapsed_ms = 0.0;
};

using PosteriorFn = std::function<PosteriorTable(const StickyChainModel&, const SequenceState&)>;

struct ValidateOptions {
  std::uint64_t seed = 0;
  /// Implementation under test for the posterior check. Swapping in a
  /// corrupted function must make that check fail.
  PosteriorFn posterior = leave_one_out_posterior;
  int zero_error_sequences = 1000;
  int jobs = 1;
};

CheckResult check_posterior_oracle(const ValidateOptions& opts);
CheckResult check_corrector_stationarity(const ValidateOptions& opts);
CheckResult check_objective_equivalence(const ValidateOptions& opts);
CheckResult check_score_simplification(const ValidateOptions& opts);
CheckResult check_hollowness(const ValidateOptions& opts);
CheckResult check_zero_error(const ValidateOptions& opts);
CheckResult check_gumbel_top_k(const ValidateOptions& opts);
CheckResult check_gibbs_stationarity(const ValidateOptions& opts);
CheckResult check_nfe_accounting(const ValidateOptions& opts);

struct NamedCheck {
  const char* id;
  CheckResult (*run)(const ValidateOptions&);
};

/// All checks in report order.
const std::vector<NamedCheck>& all_checks();

std::vector<CheckResult> run_checks(const ValidateOptions& opts);

}  // namespace icdiff
