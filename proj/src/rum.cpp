#include "welfarechoice/rum.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>

namespace welfarechoice {

void NoiseSampler::sample(Rng& rng, Vector& out) const {
  if (static_cast<std::size_t>(out.size()) != n) out.resize(static_cast<Eigen::Index>(n));
  draw(rng, out);
}

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) throw ArgumentError(std::string(what) + " must be positive");
}

void require_dimension(std::size_t n) {
  if (n == 0) throw ArgumentError("noise dimension must be at least 1");
}

struct BlockPartial {
  std::vector<Eigen::VectorXd> counts;  // per mu
  std::vector<double> sum;
  std::vector<double> sum_sq;
};

MCBatchResult run_batch(const NoiseSampler& sampler, const std::vector<UtilityVector>& mus,
                        std::size_t samples, std::uint64_t seed, bool want_choice) {
  if (samples == 0) throw ArgumentError("samples must be at least 1");
  if (!sampler.draw) throw ArgumentError("noise sampler has no draw function");
  for (const auto& mu : mus) {
    require_utility(mu);
    if (static_cast<std::size_t>(mu.size()) != sampler.n) {
      throw ArgumentError("mu dimension does not match the noise sampler");
    }
  }
  const std::size_t n = sampler.n;
  const std::size_t k = mus.size();
  const std::size_t blocks = (samples + kBlockSize - 1) / kBlockSize;
  std::vector<BlockPartial> partial(blocks);

  parallel_for(blocks, [&](std::size_t b) {
    BlockPartial& part = partial[b];
    part.counts.assign(k, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
    part.sum.assign(k, 0.0);
    part.sum_sq.assign(k, 0.0);
    Rng rng(seed, b);
    Vector eps(static_cast<Eigen::Index>(n));
    const std::size_t begin = b * kBlockSize;
    const std::size_t end = std::min(samples, begin + kBlockSize);
    for (std::size_t s = begin; s < end; ++s) {
      sampler.sample(rng, eps);
      for (std::size_t m = 0; m < k; ++m) {
        Eigen::Index best = 0;
        double top = mus[m][0] + eps[0];
        for (Eigen::Index i = 1; i < eps.size(); ++i) {
          const double u = mus[m][i] + eps[i];
          if (u > top) {
            top = u;
            best = i;
          }
        }
        if (want_choice) part.counts[m][best] += 1.0;
        part.sum[m] += top;
        part.sum_sq[m] += top * top;
      }
    }
  });

  MCBatchResult out;
  out.choice.resize(k);
  out.welfare.resize(k);
  const double N = static_cast<double>(samples);
  for (std::size_t m = 0; m < k; ++m) {
    Vector counts = Vector::Zero(static_cast<Eigen::Index>(n));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& part : partial) {
      counts += part.counts[m];
      sum += part.sum[m];
      sum_sq += part.sum_sq[m];
    }
    MCChoiceResult& c = out.choice[m];
    c.samples = samples;
    c.probabilities = counts / N;
    c.standard_error = (c.probabilities.array() * (1.0 - c.probabilities.array()) / N).sqrt();
    MCWelfareResult& w = out.welfare[m];
    w.samples = samples;
    w.value = sum / N;
    const double var = samples > 1 ? std::max(0.0, (sum_sq - N * w.value * w.value) / (N - 1)) : 0.0;
    w.standard_error = std::sqrt(var / N);
  }
  return out;
}

}  // namespace

NoiseSampler iid_gumbel(double eta, std::size_t n) {
  require_positive(eta, "gumbel scale eta");
  require_dimension(n);
  return {n, "iid-gumbel", eta, [eta](Rng& rng, Vector& out) {
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = -eta * std::log(-std::log(rng.uniform()));
          }};
}

NoiseSampler iid_normal(double sd, std::size_t n) {
  require_positive(sd, "normal sd");
  require_dimension(n);
  return {n, "iid-normal", sd, [sd](Rng& rng, Vector& out) {
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = sd * rng.normal();
          }};
}

NoiseSampler iid_logistic(double scale, std::size_t n) {
  require_positive(scale, "logistic scale");
  require_dimension(n);
  return {n, "iid-logistic", scale, [scale](Rng& rng, Vector& out) {
            for (Eigen::Index i = 0; i < out.size(); ++i) {
              const double u = rng.uniform();
              out[i] = scale * (std::log(u) - std::log1p(-u));
            }
          }};
}

NoiseSampler degenerate_noise(std::size_t n) {
  require_dimension(n);
  return {n, "degenerate", 0.0, [](Rng&, Vector& out) { out.setZero(); }};
}

NoiseSampler custom_noise(std::size_t n, NoiseDraw draw) {
  require_dimension(n);
  if (!draw) throw ArgumentError("custom noise needs a draw function");
  return {n, "custom", 0.0, std::move(draw)};
}

MCChoiceResult mc_choice_probs(const NoiseSampler& sampler, const UtilityVector& mu,
                               std::size_t samples, std::uint64_t seed) {
  return run_batch(sampler, {mu}, samples, seed, true).choice.front();
}

MCWelfareResult mc_welfare(const NoiseSampler& sampler, const UtilityVector& mu,
                           std::size_t samples, std::uint64_t seed) {
  return run_batch(sampler, {mu}, samples, seed, false).welfare.front();
}

MCBatchResult mc_batch(const NoiseSampler& sampler, const std::vector<UtilityVector>& mus,
                       std::size_t samples, std::uint64_t seed) {
  return run_batch(sampler, mus, samples, seed, true);
}

namespace {

class MonteCarloWelfare final : public WelfareModel {
 public:
  MonteCarloWelfare(NoiseSampler sampler, std::size_t samples, std::uint64_t seed)
      : sampler_(std::move(sampler)), samples_(samples), seed_(seed) {}

  std::size_t size() const override { return sampler_.n; }
  double value(const Vector& mu) const override { return evaluate(mu).first; }
  Vector gradient(const Vector& mu) const override { return evaluate(mu).second; }
  std::pair<double, Vector> evaluate(const Vector& mu) const override {
    check_input(mu);
    const MCBatchResult r = run_batch(sampler_, {mu}, samples_, seed_, true);
    return {r.welfare.front().value, r.choice.front().probabilities};
  }
  std::string name() const override { return "mc(" + sampler_.family + ")"; }

 private:
  NoiseSampler sampler_;
  std::size_t samples_;
  std::uint64_t seed_;
};

}  // namespace

ModelPtr mc_welfare_model(NoiseSampler sampler, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ArgumentError("samples must be at least 1");
  if (!sampler.draw) throw ArgumentError("noise sampler has no draw function");
  return std::make_shared<MonteCarloWelfare>(std::move(sampler), samples, seed);
}

Vector mc_abs_mean(const NoiseSampler& sampler, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ArgumentError("samples must be at least 1");
  const std::size_t blocks = (samples + kBlockSize - 1) / kBlockSize;
  const auto n = static_cast<Eigen::Index>(sampler.n);
  std::vector<Vector> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Vector acc = Vector::Zero(n);
    Vector eps(n);
    Rng rng(seed, b);
    const std::size_t end = std::min(samples, (b + 1) * kBlockSize);
    for (std::size_t s = b * kBlockSize; s < end; ++s) {
      sampler.sample(rng, eps);
      acc += eps.cwiseAbs();
    }
    partial[b] = acc;
  });
  Vector total = Vector::Zero(n);
  for (const auto& p : partial) total += p;
  return total / static_cast<double>(samples);
}

// --- two-alternative construction -------------------------------------------

BinaryRUMConstruction::BinaryRUMConstruction(ModelPtr m) : model_(std::move(m)) {
  if (!model_) throw ArgumentError("binary RUM construction: null model");
  if (model_->size() != 2) throw ArgumentError("binary RUM construction needs n = 2");
  v0_ = model_->value(Vector::Zero(2));
}

double BinaryRUMConstruction::v_prime(double x) const {
  return model_->gradient(Vector{{x, 0.0}})[0];
}

double BinaryRUMConstruction::xi_quantile(double u, bool* truncated) const {
  if (!(u > 0 && u < 1)) throw ArgumentError("xi_quantile: u must be in (0, 1)");
  if (truncated) *truncated = false;
  double t = 1.0;
  while (!(v_prime(-t) <= u && u <= v_prime(t))) {
    if (t >= kMaxBracket) {
      if (truncated) *truncated = true;
      return v_prime(-t) > u ? -kMaxBracket : kMaxBracket;
    }
    t = std::min(2.0 * t, kMaxBracket);
  }
  const auto g = [this, u](double x) { return v_prime(x) - u; };
  const double ga = g(-t);
  const double gb = g(t);
  if (ga == 0.0) return -t;
  if (gb == 0.0) return t;
  std::uintmax_t iterations = 200;
  const auto r = boost::math::tools::toms748_solve(g, -t, t, ga, gb, boost::math::tools::eps_tolerance<double>(50),
                                                   iterations);
  return 0.5 * (r.first + r.second);
}

Vector BinaryRUMConstruction::noise_from_xi(double xi) const {
  return Vector{{v0_ - std::max(xi, 0.0), v0_ - std::max(-xi, 0.0)}};
}

NoiseSampler BinaryRUMConstruction::sampler() const {
  BinaryRUMConstruction self = *this;
  return {2, "binary-from-welfare", 0.0, [self](Rng& rng, Vector& out) {
            out = self.noise_from_xi(self.xi_quantile(rng.uniform()));
          }};
}

BinaryRUMConstruction binary_rum_from_welfare(ModelPtr m) {
  BinaryRUMConstruction c(std::move(m));
  constexpr int kGrid = 2001;
  constexpr double kTol = 1e-9;
  double prev = -1.0;
  for (int k = 0; k < kGrid; ++k) {
    const double x = -50.0 + 100.0 * k / (kGrid - 1);
    const double v = c.v_prime(x);
    if (!std::isfinite(v) || v < -kTol || v > 1.0 + kTol) {
      throw InvalidWelfareError("v'(" + std::to_string(x) + ") = " + std::to_string(v) +
                                " is outside [0, 1]");
    }
    if (v < prev - kTol) {
      throw InvalidWelfareError("v' decreases near x = " + std::to_string(x));
    }
    prev = v;
  }
  return c;
}

// --- alternating-sign test ----------------------------------------------------

bool SignTestReport::pass() const {
  return std::all_of(orders.begin(), orders.end(), [](const SignOrderVerdict& v) { return v.pass; });
}

std::vector<UtilityVector> sign_test_points(std::size_t n, int samples, std::uint64_t seed) {
  std::vector<UtilityVector> points;
  if (n <= 4) {
    std::size_t lattice = 1;
    for (std::size_t i = 0; i < n; ++i) lattice *= 4;
    for (std::size_t code = 0; code < lattice; ++code) {
      Vector mu(n);
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 4) mu[i] = static_cast<double>(c % 4);
      points.push_back(mu);
    }
  }
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    Vector mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = -3.0 + 6.0 * rng.uniform();
    points.push_back(mu);
  }
  return points;
}

SignTestReport rum_sign_test(const WelfareModel& m, int max_order,
                             const std::vector<UtilityVector>& points, double h) {
  if (max_order < 2 || max_order > 3) {
    throw ArgumentError("rum_sign_test: max_order must be 2 or 3");
  }
  const int n = static_cast<int>(m.size());
  SignTestReport report;
  report.max_order_tested = std::min(max_order, n);
  ScalarField f = [&m](const Vector& mu) { return m.value(mu); };

  for (int k = 1; k <= report.max_order_tested; ++k) {
    SignOrderVerdict verdict;
    verdict.order = k;
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    // Enumerate index sets via a selection mask over n positions.
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    std::fill(mask.begin(), mask.begin() + k, true);
    std::vector<std::vector<int>> tuples;
    do {
      std::vector<int> idx;
      for (int i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)]) idx.push_back(i);
      }
      tuples.push_back(std::move(idx));
    } while (std::prev_permutation(mask.begin(), mask.end()));

    for (const auto& mu : points) {
      const double tol = 1e-4 * std::max(1.0, std::abs(m.value(mu)));
      for (const auto& idx : tuples) {
        const double v = sign * mixed_partial(f, mu, idx, h);
        ++verdict.tuples_tested;
        if (v > verdict.worst_value) {
          verdict.worst_value = v;
          if (v > tol) {
            verdict.pass = false;
            verdict.witness_indices = idx;
            verdict.witness_mu = mu;
          }
        }
      }
    }
    report.orders.push_back(std::move(verdict));
  }
  return report;
}

}  // namespace welfarechoice
