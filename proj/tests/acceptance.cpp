// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "welfarechoice/cli.hpp"
#include "welfarechoice/duality.hpp"
#include "welfarechoice/rum.hpp"
#include "welfarechoice/spec.hpp"
#include "welfarechoice/substitution.hpp"
#include "welfarechoice/transforms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace welfarechoice;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void note(Outcome& o, const std::string& text) { o.detail += (o.detail.empty() ? "" : "; ") + text; }

void require(Outcome& o, bool ok, const std::string& text) {
  if (!ok) o.pass = false;
  note(o, (ok ? "" : "FAILED ") + text);
}

Vector uniform_vector(Rng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (auto& c : v) c = lo + (hi - lo) * rng.uniform();
  return v;
}

Vector interior_point(Rng& rng, std::size_t n, double floor) {
  Vector e(n);
  for (auto& c : e) c = -std::log(rng.uniform());
  e /= e.sum();
  return (1.0 - n * floor) * e + Vector::Constant(n, floor);
}

double logit_w(const Vector& mu, double eta) {
  double s = 0.0;
  for (double m : mu) s += std::exp(m / eta);
  return eta * std::log(s);
}

Vector logit_q(const Vector& mu, double eta) {
  Vector e = (mu / eta).array().exp().matrix();
  return e / e.sum();
}

double paired_w(const Vector& mu) {
  return std::log(std::exp(mu[0]) + std::exp(mu[1]) + std::exp(mu[2]) + std::exp(0.5 * (mu[0] + mu[1])));
}

double paired_margin(const Vector& mu) {
  return std::exp(mu[2]) - 4 * std::exp(0.5 * (mu[0] + mu[1])) - std::exp(mu[0]) - std::exp(mu[1]);
}

const Matrix kA{{3, 2, 0}, {2, 3, 2}, {0, 2, 3}};
const Matrix kCross{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.5, 0.5, 0}};

std::string spec_dir() { return std::string(WELFARECHOICE_SOURCE_DIR) + "/specs"; }

// --- criteria -----------------------------------------------------------------

Outcome entropy_ram_matches_logit() {
  Outcome o;
  Rng rng(101);
  double worst_q = 0.0;
  double worst_w = 0.0;
  int solves = 0;
  for (double eta : {0.5, 1.0, 2.0}) {
    for (std::size_t n = 2; n <= 6; ++n) {
      const ModelPtr m = ram_welfare(entropy_regularizer(eta, n));
      for (int s = 0; s < 100; ++s) {
        const Vector mu = uniform_vector(rng, n, -5, 5);
        worst_w = std::max(worst_w, std::abs(m->value(mu) - logit_w(mu, eta)));
        worst_q = std::max(worst_q, (m->gradient(mu) - logit_q(mu, eta)).cwiseAbs().maxCoeff());
        ++solves;
      }
    }
  }
  require(o, worst_q <= 1e-6, "max |q - q_logit| = " + num(worst_q) + " (tol 1e-6)");
  require(o, worst_w <= 1e-6, "max |w - w_logit| = " + num(worst_w) + " (tol 1e-6)");
  note(o, std::to_string(solves) + " points, eta in {0.5,1,2}, n = 2..6");
  return o;
}

Outcome gradient_identity() {
  Outcome o;
  struct Case {
    std::string name;
    ModelPtr model;
    double tol;
  };
  const std::vector<Case> cases{
      {"mnl", mnl_welfare(1.0, 4), 1e-5},
      {"nested_logit", nested_logit_welfare(NestStructure{{{0, 1}, {2, 3}}, {0.5, 0.8}}, 4), 1e-5},
      {"gev_mnl", gev_welfare(mnl_generator(0.7, 3), 3), 1e-5},
      {"paired_logsum", paired_logsum_welfare(), 1e-5},
      {"ram_entropy", ram_welfare(entropy_regularizer(1.0, 3)), 1e-5},
      {"ram_quadratic", ram_welfare(quadratic_regularizer(0.5 * kA)), 1e-5},
      {"ram_logbarrier", ram_welfare(log_barrier_regularizer(3)), 1e-5},
      {"ram_mdm", ram_welfare(mdm_regularizer({Marginal::normal(1), Marginal::uniform(0, 2), Marginal::logistic(1)})),
       1e-5},
      {"ram_mmm", ram_welfare(mmm_regularizer(Vector{{1.0, 2.0, 0.5}})), 1e-5},
      {"ram_cmm", ram_welfare(cmm_regularizer(Matrix{{1.0, 0.3, 0.0}, {0.3, 2.0, -0.4}, {0.0, -0.4, 0.5}})), 1e-3},
  };
  Rng rng(102);
  for (const Case& c : cases) {
    double worst = 0.0;
    const ScalarField f = [&](const Vector& v) { return c.model->value(v); };
    for (int s = 0; s < 100; ++s) {
      const Vector mu = uniform_vector(rng, c.model->size(), -3, 3);
      const Vector q = c.model->gradient(mu);
      const Vector fd = finite_diff_gradient(f, mu, 1e-5);
      worst = std::max(worst, (q - fd).cwiseAbs().maxCoeff() / q.cwiseAbs().maxCoeff());
    }
    require(o, worst <= c.tol, c.name + " " + num(worst));
  }
  return o;
}

Outcome axiom_suite() {
  Outcome o;
  int models = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(spec_dir())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const ModelSpec spec = load_model_spec(path.string());
    const AxiomReport r = check_axioms(*spec.model, 1000, 10.0, 103);
    if (!r.all_pass()) require(o, false, path.filename().string() + " fails the axioms");
    ++models;
  }
  require(o, o.pass, std::to_string(models) + " shipped specs pass (1000 samples, box [-10,10]^n)");

  FunctionWelfare max_plus("max+mu1", 3, [](const Vector& mu) { return mu.maxCoeff() + mu[0]; });
  const AxiomReport a = check_axioms(max_plus, 1000, 10.0, 103);
  require(o, !a.translation_invariant.pass && a.translation_invariant.witness.has_value(),
          "max+mu1 fails translation invariance with witness");
  FunctionWelfare negated("-lse", 3, [](const Vector& mu) { return -log_sum_exp(mu); });
  const AxiomReport b = check_axioms(negated, 1000, 10.0, 103);
  require(o, !b.all_pass() && (b.monotonic.witness || b.convex.witness), "negated welfare fails with witness");
  return o;
}

Outcome three_good_quadratic() {
  Outcome o;
  // Figure data uses V = x^T (A/2) x; see README for the scaling convention.
  const ModelPtr half = ram_welfare(quadratic_regularizer(0.5 * kA));
  auto slope = [](const ModelPtr& m, double mu1) {
    const double h = 1e-4;
    return (m->gradient(Vector{{mu1 + h, 0, 0}})[2] - m->gradient(Vector{{mu1 - h, 0, 0}})[2]) / (2 * h);
  };
  const double up = slope(half, -1.25);
  const double down = slope(half, 1.0);
  require(o, up > 0, "dq3/dmu1 at -1.25 = " + num(up));
  require(o, down < 0, "dq3/dmu1 at 1 = " + num(down));
  note(o, "(with V = x^T A x unscaled: " + num(slope(ram_welfare(quadratic_regularizer(kA)), -1.25)) + " at -1.25)");

  const QuadraticCriterionReport c = quadratic_criterion(kA);
  const double lhs = kA(0, 2) + kA(1, 1);
  const double rhs = kA(0, 1) + kA(1, 2);
  const bool triple_ok = !c.pass && c.worst && c.worst->i == 1 && c.worst->margin == lhs - rhs;
  require(o, triple_ok && lhs < rhs,
          "criterion fails at i=2: A13+A22 = " + num(lhs) + " < A12+A23 = " + num(rhs));

  const ReducedRegularizer vbar = reduced_regularizer(quadratic_regularizer(kA), 1);
  const Matrix Q{{2, -1}, {-1, 2}};
  const Vector lin_displayed{{-2.0, -2.0}};
  double displayed_gap = 0.0;
  double corrected_gap = 0.0;
  Rng rng(104);
  const DomainSampler body = simplex_body_sampler(2);
  std::vector<Vector> zs{Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}, Vector{{0.0, 0.0}}};
  for (int s = 0; s < 200; ++s) zs.push_back(body(rng));
  for (const Vector& z : zs) {
    const double displayed = z.dot(Q * z) - lin_displayed.dot(z) + 3.0;
    const double corrected = z.dot(Q * z) - 2.0 * z.sum() + 3.0;
    displayed_gap = std::max(displayed_gap, std::abs(vbar(z) - displayed));
    corrected_gap = std::max(corrected_gap, std::abs(vbar(z) - corrected));
  }
  require(o, displayed_gap <= 1e-9,
          "reduced V at drop index 2 vs displayed z^T Q z - [-2;-2]^T z + 3: max gap " + num(displayed_gap));
  note(o, "vs z^T Q z - 2 e^T z + 3: max gap " + num(corrected_gap));
  const ModularityReport mod = check_modularity([&](const Vector& z) { return vbar(z); }, body, 2000, 104);
  note(o, "reduced V lattice verdict: " + to_string(mod.verdict));
  return o;
}

Outcome paired_logsum_switch() {
  Outcome o;
  const ModelPtr m = paired_logsum_welfare();
  Rng rng(105);
  int agree = 0;
  int excluded = 0;
  int disagree = 0;
  for (int s = 0; s < 1000; ++s) {
    const Vector mu = uniform_vector(rng, 3, -5, 5);
    const double margin = paired_margin(mu);
    if (std::abs(margin) < 1e-6) {
      ++excluded;
      continue;
    }
    const PairClassification c = classify_pair(*m, mu, 0, 1, 1e-4, 0.0);
    const Relation expected = margin > 0 ? Relation::complementary : Relation::substitutable;
    (c.relation == expected ? agree : disagree)++;
  }
  require(o, disagree == 0,
          std::to_string(agree) + "/1000 signs agree, " + std::to_string(excluded) + " in dead zone");

  const auto rows = scan_line(*m, Vector{{0, 0, 3}}, 0, 1, -10.0, 5.0, 1501);
  double flip = std::nan("");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k - 1].classification.relation == Relation::complementary &&
        rows[k].classification.relation == Relation::substitutable) {
      flip = rows[k].mu_i;
    }
  }
  const double root = 2 * std::log(-2 + std::sqrt(3 + std::exp(3.0)));
  require(o, flip >= 2.05 && flip <= 2.08,
          "switch on the 0.01 grid at mu1 = " + num(flip) + " (analytic root " + std::to_string(root) + ")");
  return o;
}

Outcome binary_construction() {
  Outcome o;
  const BinaryRUMConstruction b = binary_rum_from_welfare(mnl_welfare(1.0, 2));
  double cdf_gap = 0.0;
  double quantile_gap = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double x = -10.0 + 20.0 * k / 999.0;
    cdf_gap = std::max(cdf_gap, std::abs(b.v_prime(x) - 1.0 / (1.0 + std::exp(-x))));
    const double u = (k + 0.5) / 1000.0;
    quantile_gap = std::max(quantile_gap, std::abs(1.0 / (1.0 + std::exp(-b.xi_quantile(u))) - u));
  }
  require(o, cdf_gap <= 1e-10, "cdf sup-distance " + num(cdf_gap) + " on 1000 points");
  require(o, quantile_gap <= 1e-10, "quantile round trip " + num(quantile_gap));

  const NoiseSampler s = b.sampler();
  Rng rng(106);
  double worst_z = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector mu = uniform_vector(rng, 2, -3, 3);
    const MCWelfareResult r = mc_welfare(s, mu, 1000000, 1000 + k);
    const double z = std::abs(r.value - logit_w(mu, 1.0)) / std::max(r.standard_error, 1e-300);
    worst_z = std::max(worst_z, z);
  }
  require(o, worst_z <= 4.0, "MC welfare worst |z| = " + num(worst_z) + " over 20 mu at 1e6 samples");

  const Vector small = mc_abs_mean(s, 100000, 107);
  const Vector large = mc_abs_mean(s, 1000000, 108);
  const double drift = ((small - large).cwiseAbs().array() / large.array()).maxCoeff();
  require(o, large.allFinite() && drift <= 0.02,
          "E|eps| = (" + num(large[0]) + ", " + num(large[1]) + "), relative drift 1e5 vs 1e6 samples " + num(drift));
  return o;
}

Outcome sign_tests() {
  Outcome o;
  const auto points = sign_test_points(3, 50, 109);
  auto passes = [&](const std::string& name, const ModelPtr& m) {
    const SignTestReport r = rum_sign_test(*m, 3, points);
    require(o, r.pass(), name + " passes orders 1-3");
  };
  passes("mnl", mnl_welfare(1.0, 3));
  passes("entropy RAM", ram_welfare(entropy_regularizer(1.0, 3)));
  passes("normal MDM", ram_welfare(mdm_regularizer({Marginal::normal(1), Marginal::normal(2), Marginal::normal(0.5)})));
  passes("logistic MDM", ram_welfare(mdm_regularizer(MarginalSpec(3, Marginal::logistic(1)))));
  passes("MMM", ram_welfare(mmm_regularizer(Vector{{1.0, 2.0, 0.5}})));

  auto violates = [&](const std::string& name, const ModelPtr& m) {
    const SignTestReport r = rum_sign_test(*m, 2, points);
    const SignOrderVerdict& v = r.order(2);
    std::string where;
    if (!v.pass) {
      where = " at mu=(" + num(v.witness_mu[0]) + ", " + num(v.witness_mu[1]) + ", " + num(v.witness_mu[2]) +
              ") indices {" + std::to_string(v.witness_indices[0] + 1) + "," +
              std::to_string(v.witness_indices[1] + 1) + "}";
    }
    require(o, !v.pass && !v.witness_indices.empty(), name + " order-2 violation" + where);
  };
  violates("paired log-sum", paired_logsum_welfare());
  violates("three-good quadratic", ram_welfare(quadratic_regularizer(0.5 * kA)));

  const SignTestReport mixed = rum_sign_test(
      *ram_welfare(mdm_regularizer({Marginal::normal(1), Marginal::uniform(0, 2), Marginal::logistic(1)})), 3, points);
  note(o, std::string("info: mixed-marginal MDM ") + (mixed.pass() ? "passes" : "violates order 3"));
  return o;
}

Outcome quadratic_agreement() {
  Outcome o;
  Rng rng(110);
  int tested = 0;
  int agree = 0;
  int criterion_pass = 0;
  int draws = 0;
  while (tested < 100) {
    ++draws;
    Matrix B(3, 3);
    for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = 2.0 * rng.uniform() - 1.0;
    const Matrix A = B * B.transpose() + 0.05 * Matrix::Identity(3, 3);
    const QuadraticCriterionReport c = quadratic_criterion(A);
    bool clear = true;
    for (const CriterionTriple& t : c.triples) clear = clear && std::abs(t.margin) >= 1e-3;
    if (!clear) continue;
    ++tested;
    criterion_pass += c.pass;
    const SubstitutabilityCheck s = substitutable_model_check(*ram_welfare(quadratic_regularizer(A)), 200, tested);
    agree += s.substitutable_consistent == c.pass;
  }
  require(o, agree == 100,
          std::to_string(agree) + "/100 agree (" + std::to_string(criterion_pass) + " satisfy the criterion, " +
              std::to_string(draws) + " draws)");
  return o;
}

Outcome duality_round_trips() {
  Outcome o;
  Rng rng(111);
  const ModelPtr mnl = mnl_welfare(1.0, 3);
  double entropy_gap = 0.0;
  for (int s = 0; s < 20; ++s) {
    const Vector x = interior_point(rng, 3, 0.01);
    double neg_entropy = 0.0;
    for (double v : x) neg_entropy += v * std::log(v);
    entropy_gap = std::max(entropy_gap, std::abs(conjugate_V(*mnl, x).value - neg_entropy));
  }
  require(o, entropy_gap <= 1e-4, "conjugate vs negative entropy " + num(entropy_gap));

  const std::vector<std::pair<std::string, ModelPtr>> models{
      {"mnl", mnl}, {"quadratic RAM", ram_welfare(quadratic_regularizer(0.5 * kA))}, {"paired", paired_logsum_welfare()}};
  for (const auto& [name, m] : models) {
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      const Vector x = interior_point(rng, 3, 0.01);
      const InversionResult r = invert_choice(*m, x);
      worst = std::max(worst, (m->gradient(r.mu) - x).cwiseAbs().maxCoeff());
    }
    require(o, worst <= 1e-6, name + " inversion residual " + num(worst));
  }

  for (const auto& [name, m] : models) {
    std::vector<UtilityVector> anchors;
    for (int s = 0; s < 30; ++s) anchors.push_back(uniform_vector(rng, 3, -3, 3));
    const auto family = anchor_family(*m, anchors);
    double above = -1e300;
    double at_anchor = 0.0;
    for (int s = 0; s < 300; ++s) {
      const Vector mu = uniform_vector(rng, 3, -4, 4);
      above = std::max(above, semiparametric_sup(family, mu) - m->value(mu));
    }
    for (const UtilityVector& z : anchors) {
      at_anchor = std::max(at_anchor, std::abs(semiparametric_sup(family, z) - m->value(z)));
    }
    require(o, above <= 1e-9 && at_anchor <= 1e-9,
            name + " anchors: max(sup - w) " + num(above) + ", |sup - w| at anchors " + num(at_anchor));
  }
  return o;
}

Outcome transform_identities() {
  Outcome o;
  const ModelPtr crossed = cross(mnl_welfare(1.0, 4), kCross);
  Rng rng(112);
  double cross_gap = 0.0;
  double scale_gap = 0.0;
  const ModelPtr scaled = scale(mnl_welfare(1.0, 3), 2.5);
  for (int s = 0; s < 100; ++s) {
    const Vector mu = uniform_vector(rng, 3, -5, 5);
    cross_gap = std::max(cross_gap, std::abs(crossed->value(mu) - paired_w(mu)));
    scale_gap = std::max(scale_gap, std::abs(scaled->value(mu) - logit_w(mu, 2.5)));
  }
  require(o, cross_gap <= 1e-10, "cross vs paired log-sum " + num(cross_gap));
  require(o, scale_gap <= 1e-10, "scale(mnl(1), 2.5) vs mnl(2.5) " + num(scale_gap));

  const ModelPtr mixed =
      mix({{mnl_welfare(1.0, 2), {0, 1}, 0.5}, {mnl_welfare(1.0, 2), {1, 2}, 0.5}}, 3);
  const Vector q0 = mixed->gradient(Vector::Zero(3));
  require(o, (q0 - Vector{{0.25, 0.5, 0.25}}).cwiseAbs().maxCoeff() <= 1e-12,
          "mix at 0 = (" + num(q0[0]) + ", " + num(q0[1]) + ", " + num(q0[2]) + ")");

  bool axioms = true;
  for (const ModelPtr& m : {crossed, scaled, mixed}) axioms = axioms && check_axioms(*m, 1000, 10.0, 112).all_pass();
  require(o, axioms, "transform outputs pass the axiom suite");
  return o;
}

Outcome mc_determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "welfarechoice_acceptance";
  std::filesystem::create_directories(dir);
  const std::vector<std::vector<std::string>> commands{
      {"rum", "--family", "gumbel", "--param", "1", "--mu", "1,0,0", "--mu", "0.5,-1,2", "--samples", "200000",
       "--seed", "42"},
      {"rum", "--binary-from", spec_dir() + "/mnl2.json", "--mu", "0.3,0", "--samples", "100000", "--seed", "7"}};
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int identical = 0;
  int runs = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::string reference;
    for (const char* threads : {"", "1", "2", "4", "1"}) {
      if (*threads) setenv("WELFARECHOICE_THREADS", threads, 1); else unsetenv("WELFARECHOICE_THREADS");
      const auto path = dir / ("run" + std::to_string(c) + "_" + std::to_string(runs) + ".csv");
      std::vector<std::string> args = commands[c];
      args.push_back("--out");
      args.push_back(path.string());
      std::ostringstream out;
      std::ostringstream err;
      const int code = run_cli(args, out, err);
      const std::string text = read(path);
      if (reference.empty()) reference = text;
      identical += code == kExitOk && !text.empty() && text == reference;
      ++runs;
    }
  }
  unsetenv("WELFARECHOICE_THREADS");
  std::filesystem::remove_all(dir);
  require(o, identical == runs,
          std::to_string(identical) + "/" + std::to_string(runs) + " CSVs byte-identical across thread counts 1,2,4,default");
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria{
      {1, "entropy RAM equals logit", entropy_ram_matches_logit},
      {2, "q equals the gradient of w", gradient_identity},
      {3, "axiom suite and negative controls", axiom_suite},
      {4, "three-good quadratic complementarity", three_good_quadratic},
      {5, "paired log-sum sign condition and switch point", paired_logsum_switch},
      {6, "binary RUM construction", binary_construction},
      {7, "alternating sign tests", sign_tests},
      {8, "quadratic criterion agrees with sampling check", quadratic_agreement},
      {9, "duality round trips", duality_round_trips},
      {10, "transform identities", transform_identities},
      {11, "Monte Carlo determinism", mc_determinism},
  };
  int failed = 0;
  for (const Entry& e : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      note(o, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", e.id, e.name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
