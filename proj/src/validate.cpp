#include "icdiff/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "icdiff/bench.hpp"
#include "icdiff/hollow.hpp"
#include "icdiff/losses.hpp"
#include "icdiff/process.hpp"
#include "icdiff/samplers.hpp"

namespace icdiff {

namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// Random partially masked sequence drawn from the chain, so every context has
// positive probability.
SequenceState random_observation(const StickyChainModel& model, int length, double mask_prob, Rng& rng) {
  SequenceState x = sample_chain(model, length, rng);
  for (std::size_t d = 0; d < x.size(); ++d)
    if (bernoulli(rng, mask_prob)) x.set(d, x.spec().mask());
  return x;
}

// q0 over the dense state space induced by the chain (zero on masked states).
Eigen::VectorXd chain_q0(const StickyChainModel& model, const SequenceSpec& spec) {
  const std::size_t n = dense_state_count(spec);
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const SequenceState x = state_from_index(spec, i);
    if (!x.has_mask()) q0(static_cast<Eigen::Index>(i)) = model.sequence_probability(x.tokens());
  }
  return q0;
}

Eigen::VectorXd dirichlet_q0(const SequenceSpec& spec, Rng& rng) {
  const std::size_t n = dense_state_count(spec);
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    if (!state_from_index(spec, i).has_mask()) q0(static_cast<Eigen::Index>(i)) = g(rng) + 1e-3;
  return q0 / q0.sum();
}

double random_stickiness(Rng& rng) { return std::uniform_real_distribution<double>(0.05, 0.95)(rng); }

}  // namespace

CheckResult check_posterior_oracle(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("posterior_oracle")}));
  std::uniform_int_distribution<int> pick_s(2, 4), pick_d(1, 8);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const StickyChainModel model(pick_s(rng), random_stickiness(rng));
    const SequenceState x = random_observation(model, pick_d(rng), 0.5, rng);
    const double dev = max_abs_diff(opts.posterior(model, x), brute_force_posterior(model, x));
    worst = std::max(worst, std::isnan(dev) ? std::numeric_limits<double>::infinity() : dev);
  }
  return {"posterior_oracle", worst <= 1e-10, "100 instances, max |dev| = " + sci(worst) + " (tol 1e-10)", 0.0};
}

CheckResult check_corrector_stationarity(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("corrector_stationarity")}));
  double worst = 0.0;
  bool rates_valid = true;
  int instances = 0;
  for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const MaskingSchedule sched(kind);
    for (int length : {1, 2}) {
      for (int vocab : {2, 3}) {
        const SequenceSpec spec(vocab, length);
        for (int source = 0; source < 2; ++source) {
          const Eigen::VectorXd q0 =
              source == 0 ? dirichlet_q0(spec, rng) : chain_q0(StickyChainModel(vocab, random_stickiness(rng)), spec);
          for (double t : {0.2, 0.5, 0.8}) {
            const Eigen::VectorXd qt = exact_marginals(spec, q0, t, sched);
            const DenseRateMatrix rc = corrector_rate_dense(spec, t, sched, qt);
            rates_valid = rates_valid && rc.is_valid(1e-10);
            const Eigen::VectorXd flux = rc.entries.transpose() * qt;
            worst = std::max(worst, flux.cwiseAbs().maxCoeff());
            ++instances;
          }
        }
      }
    }
  }
  return {"corrector_stationarity", worst <= 1e-8 && rates_valid,
          std::to_string(instances) + " instances, max |q^T (R + R~)| = " + sci(worst) + " (tol 1e-8)" +
              (rates_valid ? "" : ", invalid rate matrix"),
          0.0};
}

CheckResult check_objective_equivalence(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("objective_equivalence")}));
  const MaskingSchedule sched(ScheduleKind::cosine);
  const ExactMode exact{64, 0.0, 1.0};

  // L_M - L_Mbar at D = 4, S = 2.
  const SequenceSpec spec4(2, 4);
  const SequenceState x4(spec4, {0, 1, 1, 0});
  std::vector<double> gaps;
  for (int i = 0; i < 6; ++i) {
    const TabularDenoiser den = TabularDenoiser::random(spec4, rng);
    gaps.push_back(loss_masked(den, x4, sched, exact).value - loss_unmasked(den, x4, sched, exact).value);
  }
  const auto [g_lo, g_hi] = std::minmax_element(gaps.begin(), gaps.end());
  const double spread_m = *g_hi - *g_lo;

  // Dense CTMC objective - L_Mbar at D = 3, S = 2.
  const SequenceSpec spec3(2, 3);
  const SequenceState x3(spec3, {1, 0, 1});
  std::vector<double> dense_gaps;
  for (int i = 0; i < 5; ++i) {
    const TabularDenoiser den = TabularDenoiser::random(spec3, rng);
    dense_gaps.push_back(loss_ctmc_dense(den, x3, sched, exact).value - loss_unmasked(den, x3, sched, exact).value);
  }
  const auto [d_lo, d_hi] = std::minmax_element(dense_gaps.begin(), dense_gaps.end());
  const double spread_d = *d_hi - *d_lo;

  return {"objective_equivalence", spread_m <= 1e-5 && spread_d <= 1e-5,
          "spread(L_M - L_Mbar) = " + sci(spread_m) + ", spread(dense - L_Mbar) = " + sci(spread_d) + " (tol 1e-5)",
          0.0};
}

CheckResult check_score_simplification(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("score_simplification")}));
  double worst = 0.0;
  std::size_t compared = 0;
  for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const MaskingSchedule sched(kind);
    for (int length : {1, 2, 3}) {
      for (int vocab : {2, 3}) {
        const StickyChainModel model(vocab, random_stickiness(rng));
        const OracleDenoiser oracle(model);
        const SequenceSpec spec(vocab, length);
        const Eigen::VectorXd q0 = chain_q0(model, spec);
        for (double t : {0.25, 0.5, 0.75}) {
          const Eigen::VectorXd qt = exact_marginals(spec, q0, t, sched);
          for (std::size_t i = 0; i < static_cast<std::size_t>(qt.size()); ++i) {
            const SequenceState x = state_from_index(spec, i);
            for (std::size_t d = 0; d < x.size(); ++d) {
              if (x.is_masked(d)) continue;
              const double denom = qt(static_cast<Eigen::Index>(state_index(x.with_masked(d))));
              if (denom <= kZeroMarginal) continue;
              const double ratio = qt(static_cast<Eigen::Index>(i)) / denom;
              worst = std::max(worst, std::abs(score_from_denoiser(oracle, x, d, t, sched) - ratio));
              ++compared;
            }
          }
        }
      }
    }
  }
  return {"score_simplification", worst <= 1e-10,
          std::to_string(compared) + " ratios, max |dev| = " + sci(worst) + " (tol 1e-10)", 0.0};
}

CheckResult check_hollowness(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("hollowness")}));
  HollowDims dims;
  dims.layers = 4;
  dims.mix_every = 2;
  dims.embed = 16;
  dims.heads = 2;
  dims.vocab = 4;
  dims.max_len = 24;
  const HollowNetParams params = init_hollow(derive_seed(opts.seed, {hash_label("hollow_params")}), dims);
  const SequenceSpec spec(dims.vocab, dims.max_len);
  std::uniform_int_distribution<int> tok(0, dims.vocab);  // includes MASK
  std::uniform_int_distribution<std::size_t> pos(0, static_cast<std::size_t>(dims.max_len - 1));
  int violations = 0;
  int other_rows_changed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Token> tokens(static_cast<std::size_t>(dims.max_len));
    for (auto& v : tokens) v = tok(rng);
    const SequenceState x(spec, tokens);
    const std::size_t d = pos(rng);
    Token v = tok(rng);
    while (v == x[d]) v = tok(rng);
    SequenceState y = x;
    y.set(d, v);
    const DenoiserOutput fx = hollow_forward(params, x);
    const DenoiserOutput fy = hollow_forward(params, y);
    if (!std::ranges::equal(fx.row(d), fy.row(d))) ++violations;
    if (!std::ranges::equal(fx.values(), fy.values())) ++other_rows_changed;
  }
  return {"hollowness", violations == 0,
          "200 perturbations, " + std::to_string(violations) + " row changes at the perturbed position, " +
              std::to_string(other_rows_changed) + " with other rows changed",
          0.0};
}

CheckResult check_zero_error(const ValidateOptions& opts) {
  ExperimentConfig config;
  config.seed = derive_seed(opts.seed, {hash_label("zero_error")});
  config.jobs = opts.jobs;
  const StickyChainModel model = config.chain();
  const OracleDenoiser oracle(model);
  SamplerConfig sc;
  sc.predictor = PredictorKind::one_at_a_time;
  sc.predictor_steps = config.length;
  sc.corrector = CorrectorKind::none;
  sc.corrector_steps = 0;
  sc.final_argmax = FinalArgmaxMode::off;
  sc.record_trace = false;

  const auto n = static_cast<std::size_t>(opts.zero_error_sequences);
  std::vector<SequenceState> samples(n);
  std::vector<std::size_t> masks(n, 0);
  parallel_for(n, opts.jobs, [&](std::size_t i) {
    SamplerConfig c = sc;
    c.seed = derive_seed(config.seed, {i});
    GenerationReport r = generate(c, oracle, config.spec(), config.masking());
    masks[i] = r.residual_masks;
    samples[i] = std::move(r.sample);
  });
  std::size_t residual = 0;
  for (std::size_t m : masks) residual += m;
  const double rate = residual == 0 && n > 0 ? error_rate(samples, model) : 1.0;
  return {"zero_error", residual == 0 && rate == 0.0,
          std::to_string(n) + " sequences, error rate = " + sci(rate) + ", residual masks = " + std::to_string(residual),
          0.0};
}

CheckResult check_gumbel_top_k(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("gumbel_top_k")}));
  struct Case {
    std::vector<double> c;
    double tau;
  };
  const std::vector<Case> cases = {
      {{0.0, 1.0, 2.0}, 1.0},
      {{-1.0, 0.5, 0.5, 2.0}, 0.5},
      {{3.0, -2.0, 0.0, 1.0, 1.0}, 2.0},
  };
  constexpr int n = 100000;
  double worst_z = 0.0;
  for (const Case& cs : cases) {
    std::vector<double> p(cs.c.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(-cs.c[i] / cs.tau);
    for (double& v : p) v /= z;
    std::vector<int> counts(p.size(), 0);
    for (int draw = 0; draw < n; ++draw) ++counts[gumbel_top_k(cs.c, 1, cs.tau, rng)[0]];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double sigma = std::sqrt(p[i] * (1.0 - p[i]) / n);
      worst_z = std::max(worst_z, std::abs(counts[i] / static_cast<double>(n) - p[i]) / sigma);
    }
  }
  std::ostringstream detail;
  detail.precision(3);
  detail << "3 score vectors x 1e5 draws, max |z| = " << worst_z << " (tol 3)";
  return {"gumbel_top_k", worst_z <= 3.0, detail.str(), 0.0};
}

CheckResult check_gibbs_stationarity(const ValidateOptions& opts) {
  Rng rng(derive_seed(opts.seed, {hash_label("gibbs_stationarity")}));
  const SequenceSpec spec(2, 3);
  double worst = 0.0;
  int patterns = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const StickyChainModel model(2, random_stickiness(rng));
    const OracleDenoiser oracle(model);
    const MaskingSchedule sched(ScheduleKind::cosine);
    const Eigen::VectorXd q0 = chain_q0(model, spec);
    const std::size_t n = dense_state_count(spec);
    for (double t : {0.3, 0.7}) {
      const Eigen::VectorXd qt = exact_marginals(spec, q0, t, sched);
      // Group states by mask pattern.
      for (unsigned bits = 0; bits < (1U << spec.length) - 1; ++bits) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
          const SequenceState x = state_from_index(spec, i);
          bool match = true;
          for (std::size_t d = 0; d < x.size(); ++d) match = match && (x.is_masked(d) == static_cast<bool>(bits >> d & 1U));
          if (match) members.push_back(i);
        }
        Eigen::VectorXd pi(static_cast<Eigen::Index>(members.size()));
        for (std::size_t a = 0; a < members.size(); ++a) pi(static_cast<Eigen::Index>(a)) = qt(static_cast<Eigen::Index>(members[a]));
        if (pi.sum() <= 0.0) continue;
        pi /= pi.sum();

        // K(x, y) = 1/u sum_{d unmasked} 1{y^{\d} = x^{\d}} f(x)_{d, y^d}
        Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(pi.size(), pi.size());
        for (std::size_t a = 0; a < members.size(); ++a) {
          const SequenceState x = state_from_index(spec, members[a]);
          const auto unmasked = x.unmasked_positions();
          const DenoiserOutput f = oracle.evaluate(x, t);
          for (std::size_t b = 0; b < members.size(); ++b) {
            const SequenceState y = state_from_index(spec, members[b]);
            for (std::size_t d : unmasked) {
              bool same_elsewhere = true;
              for (std::size_t e = 0; e < x.size(); ++e) same_elsewhere = same_elsewhere && (e == d || x[e] == y[e]);
              if (same_elsewhere) kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += f(d, y[d]) / static_cast<double>(unmasked.size());
            }
          }
        }
        const Eigen::VectorXd moved = kernel.transpose() * pi;
        worst = std::max(worst, (moved - pi).cwiseAbs().maxCoeff());
        ++patterns;
      }
    }
  }
  return {"gibbs_stationarity", worst <= 1e-10,
          std::to_string(patterns) + " mask patterns, max |pi K - pi| = " + sci(worst) + " (tol 1e-10)", 0.0};
}

CheckResult check_nfe_accounting(const ValidateOptions& opts) {
  const StickyChainModel model = default_chain();
  const OracleDenoiser oracle(model);
  const CountingDenoiser counter(oracle);
  SamplerConfig sc;
  sc.predictor_steps = 8;
  sc.corrector = CorrectorKind::informed;
  sc.corrector_steps = 1;
  sc.t_c = 1.0;
  sc.final_argmax = FinalArgmaxMode::masked;
  sc.seed = derive_seed(opts.seed, {hash_label("nfe_accounting")});
  const GenerationReport r = generate(sc, counter, SequenceSpec(4, 32), MaskingSchedule());
  const bool ok = r.nfe == 17 && r.trace.size() == 17 && counter.count() == 17 && sc.expected_nfe() == 17;
  return {"nfe_accounting", ok,
          "reported " + std::to_string(r.nfe) + ", trace " + std::to_string(r.trace.size()) + ", counted " +
              std::to_string(counter.count()) + " (expected 17)",
          0.0};
}

const std::vector<NamedCheck>& all_checks() {
  static const std::vector<NamedCheck> checks = {
      {"posterior_oracle", check_posterior_oracle},
      {"corrector_stationarity", check_corrector_stationarity},
      {"objective_equivalence", check_objective_equivalence},
      {"score_simplification", check_score_simplification},
      {"hollowness", check_hollowness},
      {"zero_error", check_zero_error},
      {"gumbel_top_k", check_gumbel_top_k},
      {"gibbs_stationarity", check_gibbs_stationarity},
      {"nfe_accounting", check_nfe_accounting},
  };
  return checks;
}

std::vector<CheckResult> run_checks(const ValidateOptions& opts) {
  std::vector<CheckResult> out;
  for (const NamedCheck& check : all_checks()) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check.run(opts);
    } catch (const std::exception& e) {
      r = {check.id, false, std::string("exception: ") + e.what(), 0.0};
    }
    r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace icdiff
