#include "icdiff/process.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace icdiff {

SequenceState forward_sample(const SequenceState& x0, double t, const MaskingSchedule& sched, Rng& rng) {
  if (x0.has_mask()) throw Error(ErrorKind::invalid_input, "forward_sample expects a clean sequence");
  const double a = sched.alpha(t);
  SequenceState xt = x0;
  for (std::size_t d = 0; d < xt.size(); ++d) {
    if (!bernoulli(rng, a)) xt.set(d, x0.spec().mask());
  }
  return xt;
}

double forward_kernel(Token xt, Token x0, Token mask, double alpha) {
  if (xt == mask) return 1.0 - alpha;
  return xt == x0 ? alpha : 0.0;
}

Eigen::MatrixXd absorbing_rate_base(int vocab) {
  if (vocab < 2) throw Error(ErrorKind::config, "vocabulary size must be >= 2");
  const int n = vocab + 1;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < vocab; ++x) {
    r(x, x) = -1.0;
    r(x, vocab) = 1.0;
  }
  return r;
}

std::size_t dense_state_count(const SequenceSpec& spec) {
  std::size_t n = 1;
  for (int d = 0; d < spec.length; ++d) {
    n *= static_cast<std::size_t>(spec.vocab + 1);
    if (n > kMaxDenseStates) throw Error(ErrorKind::capacity, "dense state space exceeds 4096 states");
  }
  return n;
}

std::size_t state_index(const SequenceState& x) {
  const std::size_t base = static_cast<std::size_t>(x.spec().vocab + 1);
  std::size_t idx = 0;
  for (Token v : x.tokens()) idx = idx * base + static_cast<std::size_t>(v);
  return idx;
}

SequenceState state_from_index(const SequenceSpec& spec, std::size_t index) {
  const std::size_t base = static_cast<std::size_t>(spec.vocab + 1);
  std::vector<Token> tokens(static_cast<std::size_t>(spec.length));
  for (std::size_t d = tokens.size(); d-- > 0;) {
    tokens[d] = static_cast<Token>(index % base);
    index /= base;
  }
  return SequenceState(spec, std::move(tokens));
}

bool DenseRateMatrix::is_valid(double tol) const {
  for (Eigen::Index i = 0; i < entries.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < entries.cols(); ++j) {
      if (i != j && entries(i, j) < 0.0) return false;
      row += entries(i, j);
    }
    if (std::abs(row) > tol) return false;
  }
  return true;
}

DenseRateMatrix joint_rate_base(const SequenceSpec& spec) {
  const std::size_t n = dense_state_count(spec);
  const Eigen::MatrixXd rb = absorbing_rate_base(spec.vocab);
  DenseRateMatrix r{spec, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  std::size_t stride = 1;
  // Position d (from the right) contributes jumps that change only its digit.
  for (int pos = spec.length - 1; pos >= 0; --pos) {
    for (std::size_t x = 0; x < n; ++x) {
      const int digit = static_cast<int>((x / stride) % static_cast<std::size_t>(spec.vocab + 1));
      for (int to = 0; to <= spec.vocab; ++to) {
        const double rate = rb(digit, to);
        if (rate == 0.0) continue;
        const std::size_t y = x + static_cast<std::size_t>(to - digit) * stride;
        r.entries(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) += rate;
      }
    }
    stride *= static_cast<std::size_t>(spec.vocab + 1);
  }
  return r;
}

DenseRateMatrix joint_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched) {
  DenseRateMatrix r = joint_rate_base(spec);
  r.entries *= sched.beta(t);
  return r;
}

Eigen::MatrixXd transition_probs_expm(const DenseRateMatrix& base_rate, double t0, double t1,
                                      const MaskingSchedule& sched) {
  if (base_rate.entries.rows() != base_rate.entries.cols())
    throw Error(ErrorKind::shape, "rate matrix must be square");
  if (t0 > t1) throw Error(ErrorKind::domain, "transition_probs_expm requires t0 <= t1");
  const double scale = sched.integrated_beta(t0, t1);
  if (scale == 0.0) return Eigen::MatrixXd::Identity(base_rate.entries.rows(), base_rate.entries.cols());
  const Eigen::MatrixXd scaled = base_rate.entries * scale;
  return scaled.exp();
}

Eigen::VectorXd exact_marginals(const SequenceSpec& spec, const Eigen::VectorXd& q0, double t,
                                const MaskingSchedule& sched) {
  const std::size_t n = dense_state_count(spec);
  if (static_cast<std::size_t>(q0.size()) != n) throw Error(ErrorKind::shape, "q0 has wrong length");
  const double a = sched.alpha(t);
  Eigen::VectorXd qt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<SequenceState> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) states.push_back(state_from_index(spec, i));
  for (std::size_t i0 = 0; i0 < n; ++i0) {
    const double w = q0(static_cast<Eigen::Index>(i0));
    if (w == 0.0) continue;
    if (states[i0].has_mask()) throw Error(ErrorKind::invalid_input, "q0 must vanish on masked states");
    for (std::size_t j = 0; j < n; ++j) {
      double p = w;
      for (std::size_t d = 0; d < states[j].size() && p != 0.0; ++d)
        p *= forward_kernel(states[j][d], states[i0][d], spec.mask(), a);
      qt(static_cast<Eigen::Index>(j)) += p;
    }
  }
  return qt;
}

namespace {

void renormalise_diagonal(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, i) = 0.0;
    m(i, i) = -m.row(i).sum();
  }
}

}  // namespace

DenseRateMatrix backward_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched,
                                    const Eigen::VectorXd& marginals) {
  const DenseRateMatrix fwd = joint_rate_dense(spec, t, sched);
  const Eigen::Index n = fwd.entries.rows();
  if (marginals.size() != n) throw Error(ErrorKind::shape, "marginal vector has wrong length");
  DenseRateMatrix rev{spec, Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      if (x == y) continue;
      const double r = fwd.entries(x, y);
      if (r == 0.0) continue;
      // Unreachable y: no backward mass leaves it, and none enters from it.
      if (marginals(y) < kZeroMarginal) continue;
      rev.entries(y, x) = r * marginals(x) / marginals(y);
    }
  }
  renormalise_diagonal(rev.entries);
  return rev;
}

DenseRateMatrix corrector_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched,
                                     const Eigen::VectorXd& marginals) {
  DenseRateMatrix rc = backward_rate_dense(spec, t, sched, marginals);
  rc.entries += joint_rate_dense(spec, t, sched).entries;
  renormalise_diagonal(rc.entries);
  return rc;
}

}  // namespace icdiff
