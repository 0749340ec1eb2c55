#include "icdiff/losses.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>

#include "icdiff/process.hpp"

namespace icdiff {

double gauss_legendre(const std::function<double(double)>& f, double lo, double hi, int nodes) {
  using boost::math::quadrature::gauss;
  switch (nodes) {
    case 16: return gauss<double, 16>::integrate(f, lo, hi);
    case 32: return gauss<double, 32>::integrate(f, lo, hi);
    case 64: return gauss<double, 64>::integrate(f, lo, hi);
    case 128: return gauss<double, 128>::integrate(f, lo, hi);
    default: throw Error(ErrorKind::config, "quadrature node count must be 16, 32, 64 or 128");
  }
}

namespace {

inline double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Sum of log f(y)_{d, x0^d} over masked (first) and unmasked (second) positions.
struct PatternLogs {
  double masked = 0.0;
  double unmasked = 0.0;
  std::size_t n_masked = 0;
};

PatternLogs pattern_logs(const DenoiserOutput& f, const SequenceState& y, const SequenceState& x0) {
  PatternLogs out;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double lp = floored_log(f(d, x0[d]));
    if (y.is_masked(d)) {
      out.masked += lp;
      ++out.n_masked;
    } else {
      out.unmasked += lp;
    }
  }
  return out;
}

void check_clean(const SequenceState& x0) {
  if (x0.has_mask()) throw Error(ErrorKind::invalid_input, "x0 must be a clean sequence");
}

void check_range(double lo, double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0)) throw Error(ErrorKind::domain, "loss time range must satisfy 0 <= lo < hi <= 1");
}

struct Components {
  LossEstimate masked, unmasked, hd;
};

Components exact_components(const Denoiser& den, const SequenceState& x0, const MaskingSchedule& sched,
                            const ExactMode& mode) {
  const std::size_t D = x0.size();
  if (D >= 17 || (std::size_t{1} << D) > kMaxMaskPatterns)
    throw Error(ErrorKind::capacity, "exact mode enumerates 2^D mask patterns; D too large");
  check_range(mode.t_lo, mode.t_hi);
  const std::size_t n_patterns = std::size_t{1} << D;

  double masked_sum = 0.0, unmasked_sum = 0.0;
  auto integrand = [&](double t, bool want_masked) {
    const double a = sched.alpha(t);
    const double ap = sched.alpha_prime(t);
    double acc = 0.0;
    for (std::size_t bits = 0; bits < n_patterns; ++bits) {
      SequenceState y = x0;
      std::size_t m = 0;
      for (std::size_t d = 0; d < D; ++d) {
        if (bits >> d & 1U) {
          y.set(d, x0.spec().mask());
          ++m;
        }
      }
      const std::size_t u = D - m;
      if (want_masked ? m == 0 : u == 0) continue;
      const PatternLogs logs = pattern_logs(den.evaluate(y, t), y, x0);
      if (want_masked) {
        acc += ap * std::pow(a, static_cast<double>(u)) * std::pow(1.0 - a, static_cast<double>(m - 1)) * logs.masked;
      } else {
        acc += ap * std::pow(a, static_cast<double>(u - 1)) * std::pow(1.0 - a, static_cast<double>(m)) * logs.unmasked;
      }
    }
    return acc;
  };
  masked_sum = gauss_legendre([&](double t) { return integrand(t, true); }, mode.t_lo, mode.t_hi, mode.nodes);
  unmasked_sum = gauss_legendre([&](double t) { return integrand(t, false); }, mode.t_lo, mode.t_hi, mode.nodes);

  Components c;
  c.masked = {masked_sum, 0.0, 0};
  c.unmasked = {unmasked_sum, 0.0, 0};
  c.hd = {0.5 * (masked_sum + unmasked_sum), 0.0, 0};
  return c;
}

LossEstimate summarise(double sum, double sum_sq, std::size_t n) {
  LossEstimate e;
  e.n_samples = n;
  if (n == 0) return e;
  const double mean = sum / static_cast<double>(n);
  e.value = mean;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    e.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return e;
}

Components mc_components(const Denoiser& den, const SequenceState& x0, const MaskingSchedule& sched,
                         const MonteCarloMode& mode) {
  check_range(mode.t_lo, mode.t_hi);
  Rng rng(mode.seed);
  std::uniform_real_distribution<double> ut(mode.t_lo, mode.t_hi);
  const double width = mode.t_hi - mode.t_lo;
  double s[3] = {0, 0, 0}, ss[3] = {0, 0, 0};
  for (std::size_t i = 0; i < mode.n; ++i) {
    const double t = ut(rng);
    const SequenceState y = forward_sample(x0, t, sched, rng);
    const PatternLogs logs = pattern_logs(den.evaluate(y, t), y, x0);
    const double a = sched.alpha(t), ap = sched.alpha_prime(t);
    const std::size_t u = y.size() - logs.n_masked;
    const double lm = logs.n_masked == 0 ? 0.0 : width * ap / (1.0 - a) * logs.masked;
    const double lu = u == 0 ? 0.0 : width * ap / a * logs.unmasked;
    const double v[3] = {lm, lu, 0.5 * (lm + lu)};
    for (int k = 0; k < 3; ++k) {
      s[k] += v[k];
      ss[k] += v[k] * v[k];
    }
  }
  return {summarise(s[0], ss[0], mode.n), summarise(s[1], ss[1], mode.n), summarise(s[2], ss[2], mode.n)};
}

Components components(const Denoiser& den, const SequenceState& x0, const MaskingSchedule& sched,
                      const LossMode& mode) {
  check_clean(x0);
  return std::visit(
      [&](const auto& m) -> Components {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ExactMode>) {
          return exact_components(den, x0, sched, m);
        } else {
          return mc_components(den, x0, sched, m);
        }
      },
      mode);
}

void require_hollow(const Denoiser& den) {
  if (!den.is_hollow())
    throw Error(ErrorKind::contract, "the unmasked-position objective needs a hollow denoiser");
}

}  // namespace

LossEstimate loss_masked(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                         const LossMode& mode) {
  return components(denoiser, x0, sched, mode).masked;
}

LossEstimate loss_unmasked(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                           const LossMode& mode) {
  require_hollow(denoiser);
  return components(denoiser, x0, sched, mode).unmasked;
}

LossEstimate loss_hd(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                     const LossMode& mode) {
  require_hollow(denoiser);
  return components(denoiser, x0, sched, mode).hd;
}

double score_from_denoiser(const Denoiser& denoiser, const SequenceState& x, std::size_t d, double t,
                           const MaskingSchedule& sched) {
  if (x.is_masked(d)) throw Error(ErrorKind::invalid_input, "score target position must be unmasked");
  const double a = sched.alpha(t);
  if (!(a > 0.0 && a < 1.0)) throw Error(ErrorKind::singular, "alpha/(1-alpha) undefined for alpha in {0, 1}");
  const DenoiserOutput f = denoiser.evaluate(x.with_masked(d), t);
  return a / (1.0 - a) * f(d, x[d]);
}

LossEstimate loss_ctmc_dense(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                             const ExactMode& quadrature) {
  check_clean(x0);
  check_range(quadrature.t_lo, quadrature.t_hi);
  const SequenceSpec& spec = x0.spec();
  if (spec.length > 3 || spec.vocab > 3) throw Error(ErrorKind::capacity, "dense objective limited to D <= 3, S <= 3");
  const DenseRateMatrix base = joint_rate_base(spec);
  const std::size_t n = base.n_states();
  std::vector<SequenceState> states;
  for (std::size_t i = 0; i < n; ++i) states.push_back(state_from_index(spec, i));

  auto integrand = [&](double t) {
    const double a = sched.alpha(t);
    const double beta = sched.beta(t);
    auto cond = [&](const SequenceState& z) {
      double p = 1.0;
      for (std::size_t d = 0; d < z.size(); ++d) p *= forward_kernel(z[d], x0[d], spec.mask(), a);
      return p;
    };
    double acc = 0.0;
    for (std::size_t yi = 0; yi < n; ++yi) {
      const double qy = cond(states[yi]);
      if (qy == 0.0) continue;
      double term = 0.0;
      for (std::size_t xi = 0; xi < n; ++xi) {
        if (xi == yi) continue;
        const double r = beta * base.entries(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(yi));
        if (r == 0.0) continue;
        const SequenceState& x = states[xi];
        std::size_t d = 0;
        while (x[d] == states[yi][d]) ++d;
        const double score = score_from_denoiser(denoiser, x, d, t, sched);
        term += r * score;
        const double qx = cond(x);
        if (qx > 0.0) {
          const double log_rate = std::log(r) + std::log(a / (1.0 - a)) + floored_log(score * (1.0 - a) / a);
          term -= r * qx / qy * log_rate;
        }
      }
      acc += qy * term;
    }
    return acc;
  };
  return {gauss_legendre(integrand, quadrature.t_lo, quadrature.t_hi, quadrature.nodes), 0.0, 0};
}

}  // namespace icdiff
