#include "welfarechoice/cli.hpp"

#include "welfarechoice/duality.hpp"
#include "welfarechoice/rum.hpp"
#include "welfarechoice/spec.hpp"
#include "welfarechoice/substitution.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#ifndef WELFARECHOICE_VERSION
#define WELFARECHOICE_VERSION "0.0.0"
#endif

namespace welfarechoice {

namespace {

using json = nlohmann::json;

struct Options {
  std::string spec_path;
  std::vector<std::string> mu;
  std::vector<std::string> x;
  std::string out_path;
  std::uint64_t seed = 1;
  std::size_t samples = 0;  // 0: command default
  bool timestamp = false;
  int example = 0;
  std::string suite;
  std::string direction;
  double grid = 0.02;
  std::string family = "gumbel";
  double param = 1.0;
  std::string binary_from;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_vector(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

Vector parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw ArgumentError("--" + what + ": cannot parse '" + item + "' as a number");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ArgumentError("--" + what + ": empty list");
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<Vector> parse_lists(const std::vector<std::string>& items, const std::string& what,
                                std::size_t n) {
  std::vector<Vector> out;
  for (const auto& s : items) {
    out.push_back(parse_list(s, what));
    if (n && static_cast<std::size_t>(out.back().size()) != n) {
      throw ArgumentError("--" + what + " '" + s + "' has " + std::to_string(out.back().size()) +
                          " entries; the model has " + std::to_string(n) + " alternatives");
    }
  }
  return out;
}

std::string timestamp(bool wall_clock) {
  std::time_t t = 0;
  if (wall_clock) {
    t = std::time(nullptr);
  } else if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(epoch));
    } catch (const std::exception&) {
      return "unset";
    }
  } else {
    return "unset";
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string header(const std::string& command, const json& config, const Options& o) {
  std::string h = "# welfarechoice " WELFARECHOICE_VERSION "\n";
  h += "# command: " + command + "\n";
  h += "# config: " + config.dump() + "\n";
  h += "# seed: " + std::to_string(o.seed) + "\n";
  h += "# version: " WELFARECHOICE_VERSION "\n";
  h += "# timestamp: " + timestamp(o.timestamp) + "\n";
  return h;
}

void emit(const std::string& text, const Options& o, std::ostream& out) {
  if (o.out_path.empty()) {
    out << text;
    return;
  }
  namespace fs = std::filesystem;
  const fs::path target(o.out_path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ArgumentError("cannot write '" + tmp.string() + "'");
    f << text;
    if (!f.flush()) throw ArgumentError("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ArgumentError("cannot move output to '" + o.out_path + "': " + ec.message());
  }
}

std::string csv_header(const std::vector<std::pair<std::string, std::size_t>>& groups) {
  std::string s;
  for (const auto& [name, count] : groups) {
    if (count == 0) {
      s += (s.empty() ? "" : ",") + name;
      continue;
    }
    for (std::size_t i = 1; i <= count; ++i) s += (s.empty() ? "" : ",") + name + "_" + std::to_string(i);
  }
  return s + "\n";
}

void append(std::string& row, double v) {
  row += (row.empty() ? "" : ",") + fmt(v);
}

void append(std::string& row, const Vector& v) {
  for (double c : v) append(row, c);
}

ModelSpec require_spec(const Options& o) {
  if (o.spec_path.empty()) throw ArgumentError("--spec is required");
  return load_model_spec(o.spec_path);
}

json base_config(const ModelSpec& spec, const Options& o) {
  json c;
  c["spec"] = json::parse(spec.canonical);
  c["spec_file"] = o.spec_path;
  return c;
}

// --- commands ----------------------------------------------------------------

int cmd_eval(const Options& o, std::ostream& out) {
  const ModelSpec spec = require_spec(o);
  if (o.mu.empty()) throw ArgumentError("--mu is required (one or more comma-separated lists)");
  const auto mus = parse_lists(o.mu, "mu", spec.n);
  json config = base_config(spec, o);
  config["mu"] = o.mu;
  std::string text = header("eval", config, o);
  text += csv_header({{"mu", spec.n}, {"w", 0}, {"q", spec.n}});
  for (const auto& mu : mus) {
    auto [w, q] = spec.model->evaluate(mu);
    std::string row;
    append(row, mu);
    append(row, w);
    append(row, q);
    text += row + "\n";
  }
  emit(text, o, out);
  return kExitOk;
}

int cmd_figure(const Options& o, std::ostream& out) {
  json config;
  config["example"] = o.example;
  std::string text = header("figure", config, o);
  if (o.example == 2) {
    // V(x) = 0.5 x^T A x with A = [[3,2,0],[2,3,2],[0,2,3]].
    const Matrix A{{3, 2, 0}, {2, 3, 2}, {0, 2, 3}};
    const ModelPtr m = ram_welfare(quadratic_regularizer(0.5 * A));
    text += "mu1,q1,q2,q3\n";
    for (int k = 0; k <= 400; ++k) {
      const double mu1 = -2.0 + 0.01 * k;
      std::string row;
      append(row, mu1);
      append(row, m->gradient(Vector{{mu1, 0.0, 0.0}}));
      text += row + "\n";
    }
  } else if (o.example == 3) {
    const ModelPtr m = paired_logsum_welfare();
    text += "mu1,q2,classification\n";
    for (int k = 0; k <= 1500; ++k) {
      const double mu1 = -10.0 + 0.01 * k;
      const Vector mu{{mu1, 0.0, 3.0}};
      std::string row;
      append(row, mu1);
      append(row, m->gradient(mu)[1]);
      text += row + "," + to_string(classify_pair(*m, mu, 0, 1).relation) + "\n";
    }
  } else {
    throw ArgumentError("--example must be 2 or 3");
  }
  emit(text, o, out);
  return kExitOk;
}

std::string witness_line(const std::optional<Witness>& w) {
  if (!w) return "";
  return "  witness: first=" + fmt_vector(w->first) + " second=" + fmt_vector(w->second) +
         " scalar=" + fmt(w->scalar) + " violation=" + fmt(w->violation) + "\n";
}

int cmd_verify(const Options& o, std::ostream& out) {
  const ModelSpec spec = require_spec(o);
  json config = base_config(spec, o);
  config["suite"] = o.suite;
  std::string report;
  bool pass = true;
  if (o.suite == "axioms") {
    const int samples = o.samples ? static_cast<int>(o.samples) : 1000;
    config["samples"] = samples;
    const AxiomReport r = check_axioms(*spec.model, samples, 10.0, o.seed);
    auto line = [&](const char* name, const AxiomVerdict& v) {
      report += std::string(name) + ": " + (v.pass ? "pass" : "FAIL") + " worst_violation=" + fmt(v.worst_violation) + "\n";
      report += witness_line(v.witness);
    };
    line("monotonic", r.monotonic);
    line("translation_invariant", r.translation_invariant);
    line("convex", r.convex);
    report += "samples: " + std::to_string(r.samples_used) + " (sampling test; a pass means no violation was found)\n";
    pass = r.all_pass();
  } else if (o.suite == "rum-signs") {
    if (spec.n < 2) throw ArgumentError("rum-signs needs at least two alternatives");
    const int samples = o.samples ? static_cast<int>(o.samples) : 50;
    config["samples"] = samples;
    const std::vector<UtilityVector> points = sign_test_points(spec.n, samples, o.seed);
    const std::size_t lattice = points.size() - static_cast<std::size_t>(samples);
    const SignTestReport r = rum_sign_test(*spec.model, 3, points);
    for (const auto& v : r.orders) {
      report += "order " + std::to_string(v.order) + ": " + (v.pass ? "pass" : "FAIL") + " tuples=" +
                std::to_string(v.tuples_tested) + " worst=" + fmt(v.worst_value) + "\n";
      if (!v.pass) {
        std::string idx;
        for (int i : v.witness_indices) idx += (idx.empty() ? "" : ",") + std::to_string(i + 1);
        report += "  witness: mu=" + fmt_vector(v.witness_mu) + " indices={" + idx + "}\n";
      }
    }
    report += "points: " + std::to_string(lattice) + " on the lattice {0,1,2,3}^n, " + std::to_string(samples) +
              " random in [-3,3]^n\n";
    pass = r.pass();
  } else if (o.suite == "substitutable") {
    const int samples = o.samples ? static_cast<int>(o.samples) : 200;
    config["samples"] = samples;
    const SubstitutabilityCheck r = substitutable_model_check(*spec.model, samples, o.seed);
    report += "lattice test on w: " + to_string(r.modularity.verdict) + " (" +
              std::to_string(r.modularity.pairs_tested) + " pairs)\n";
    if (r.modularity.submodular_witness) {
      const auto& w = *r.modularity.submodular_witness;
      report += "  submodularity witness: x=" + fmt_vector(w.x) + " y=" + fmt_vector(w.y) + " gap=" + fmt(w.gap) + "\n";
    }
    report += "pairwise classification: " + std::to_string(r.points_tested) + " points, " +
              (r.witness ? "complementary pair found" : "no complementary pair") + "\n";
    if (r.witness) {
      report += "  witness: mu=" + fmt_vector(r.witness->mu) + " dq_" + std::to_string(r.witness->j + 1) +
                "/dmu_" + std::to_string(r.witness->i + 1) + "=" + fmt(r.witness->cross_partial) + "\n";
    }
    report += "verdict: " + std::string(r.substitutable_consistent ? "substitutable-consistent" : "not substitutable") +
              " (sampling test, not a proof)\n";
    pass = r.substitutable_consistent;
  } else if (o.suite == "superlinear") {
    const int samples = o.samples ? static_cast<int>(o.samples) : 1000;
    config["samples"] = samples;
    const SuperlinearBounds b = resolve_superlinear_bounds(*spec.model);
    const SuperlinearReport r = check_superlinear(*spec.model, b.b, samples, 10.0, o.seed);
    report += "bounds b: " + fmt_vector(b.b) + (b.estimated ? " (estimated)" : " (analytic)") + "\n";
    report += "worst gap min(w - mu_i - b_i): " + fmt(r.worst_gap) + "\n";
    if (r.witness_mu) {
      report += "  witness: mu=" + fmt_vector(*r.witness_mu) + " i=" + std::to_string(r.witness_index + 1) + "\n";
    }
    pass = r.pass;
  } else {
    throw ArgumentError("--suite must be one of axioms, rum-signs, substitutable, superlinear");
  }
  report += std::string("result: ") + (pass ? "pass" : "violation") + "\n";
  emit(header("verify", config, o) + "# suite: " + o.suite + ", model: " + spec.kind + "\n" + report, o, out);
  return pass ? kExitOk : kExitViolation;
}

int cmd_convert(const Options& o, std::ostream& out) {
  const ModelSpec spec = require_spec(o);
  json config = base_config(spec, o);
  config["direction"] = o.direction;
  std::string text;
  if (o.direction == "w-to-v") {
    std::vector<ConjugateGridPoint> points;
    if (!o.x.empty()) {
      config["x"] = o.x;
      for (const auto& x : parse_lists(o.x, "x", spec.n)) {
        if (!on_simplex(x, 1e-9)) throw DomainError("--x " + fmt_vector(x) + " is not on the simplex");
        points.push_back({x, conjugate_V(*spec.model, x).value});
      }
    } else {
      config["grid"] = o.grid;
      points = tabulate_conjugate(*spec.model, o.grid);
    }
    text = header("convert", config, o) + csv_header({{"x", spec.n}, {"V", 0}});
    for (const auto& p : points) {
      std::string row;
      append(row, p.x);
      append(row, p.value);
      text += row + "\n";
    }
  } else if (o.direction == "v-to-w") {
    if (!spec.regularizer) throw ArgumentError("v-to-w needs a regularizer spec (kind ram_*), got " + spec.kind);
    if (o.mu.empty()) throw ArgumentError("--mu is required for v-to-w");
    config["mu"] = o.mu;
    text = header("convert", config, o) + csv_header({{"mu", spec.n}, {"w", 0}, {"q", spec.n}, {"kkt_residual", 0}});
    for (const auto& mu : parse_lists(o.mu, "mu", spec.n)) {
      const SolveResult r = solve_ram(*spec.regularizer, mu);
      if (!r.converged) throw NumericError("solver did not converge at mu=" + fmt_vector(mu));
      std::string row;
      append(row, mu);
      append(row, r.w_value);
      append(row, r.x_star);
      append(row, r.kkt_residual);
      text += row + "\n";
    }
  } else if (o.direction == "w-to-theta") {
    if (o.mu.empty()) throw ArgumentError("--mu is required for w-to-theta (the anchor utilities)");
    config["mu"] = o.mu;
    const auto anchors = parse_lists(o.mu, "mu", spec.n);
    const auto family = anchor_family(*spec.model, anchors);
    text = header("convert", config, o) +
           csv_header({{"anchor", 0}, {"z", spec.n}, {"weight", spec.n}, {"l", 0}, {"M", 0}, {"t_star", 0},
                       {"sup_at_z", 0}, {"w_at_z", 0}});
    for (std::size_t k = 0; k < family.size(); ++k) {
      const auto& a = family[k];
      std::string row = std::to_string(k + 1);
      append(row, a.z);
      append(row, a.weights);
      append(row, a.offset);
      append(row, a.penalty);
      append(row, a.t_star);
      append(row, semiparametric_sup(family, a.z));
      append(row, spec.model->value(a.z));
      text += row + "\n";
    }
  } else {
    throw ArgumentError("--direction must be one of w-to-v, v-to-w, w-to-theta");
  }
  emit(text, o, out);
  return kExitOk;
}

int cmd_rum(const Options& o, std::ostream& out) {
  if (o.mu.empty()) throw ArgumentError("--mu is required");
  const std::size_t samples = o.samples ? o.samples : 100000;
  json config;
  config["samples"] = samples;
  config["mu"] = o.mu;
  NoiseSampler sampler;
  std::vector<Vector> mus;
  if (!o.binary_from.empty()) {
    const ModelSpec spec = load_model_spec(o.binary_from);
    if (spec.n != 2) throw ArgumentError("--binary-from needs a two-alternative model");
    config["binary_from"] = json::parse(spec.canonical);
    sampler = binary_rum_from_welfare(spec.model).sampler();
    mus = parse_lists(o.mu, "mu", 2);
  } else {
    config["family"] = o.family;
    config["param"] = o.param;
    mus = parse_lists(o.mu, "mu", 0);
    const std::size_t n = static_cast<std::size_t>(mus.front().size());
    mus = parse_lists(o.mu, "mu", n);
    if (o.family == "gumbel") {
      sampler = iid_gumbel(o.param, n);
    } else if (o.family == "normal") {
      sampler = iid_normal(o.param, n);
    } else if (o.family == "logistic") {
      sampler = iid_logistic(o.param, n);
    } else if (o.family == "degenerate") {
      sampler = degenerate_noise(n);
    } else {
      throw ArgumentError("--family must be one of gumbel, normal, logistic, degenerate");
    }
  }
  const std::size_t n = sampler.n;
  const MCBatchResult r = mc_batch(sampler, mus, samples, o.seed);
  std::string text = header("rum", config, o);
  text += csv_header({{"mu", n}, {"p", n}, {"se_p", n}, {"w", 0}, {"se_w", 0}});
  for (std::size_t k = 0; k < mus.size(); ++k) {
    std::string row;
    append(row, mus[k]);
    append(row, r.choice[k].probabilities);
    append(row, r.choice[k].standard_error);
    append(row, r.welfare[k].value);
    append(row, r.welfare[k].standard_error);
    text += row + "\n";
  }
  emit(text, o, out);
  return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out) {
  const ModelSpec spec = require_spec(o);
  out << "valid: kind=" << spec.kind << " n=" << spec.n << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"welfarechoice: welfare-based discrete choice models"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", WELFARECHOICE_VERSION);
  Options o;

  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out_path, "Write output to FILE (atomically)"); };
  auto add_spec = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--spec", o.spec_path, "Model specification file (JSON)");
    if (required) opt->required();
  };
  auto add_mu = [&](CLI::App* sub, const std::string& help) {
    sub->add_option("--mu", o.mu, help)->allow_extra_args(false);
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--samples", o.samples, "Sample count");
    sub->add_flag("--timestamp", o.timestamp, "Record the wall-clock time in the manifest");
  };

  CLI::App* eval = app.add_subcommand("eval", "Evaluate w and q at utility vectors");
  add_spec(eval, true);
  add_mu(eval, "Utility vector, comma separated; repeatable");
  add_out(eval);
  add_common(eval);

  CLI::App* figure = app.add_subcommand("figure", "Emit the data behind a worked example");
  figure->add_option("--example", o.example, "2 or 3")->required();
  add_out(figure);
  add_common(figure);

  CLI::App* verify = app.add_subcommand("verify", "Run a property suite on a model");
  add_spec(verify, true);
  verify->add_option("--suite", o.suite, "axioms | rum-signs | substitutable | superlinear")->required();
  add_out(verify);
  add_common(verify);

  CLI::App* convert = app.add_subcommand("convert", "Convert between welfare, regularizer and anchor views");
  add_spec(convert, true);
  convert->add_option("--direction", o.direction, "w-to-v | v-to-w | w-to-theta")->required();
  convert->add_option("--grid", o.grid, "Simplex grid spacing for w-to-v");
  convert->add_option("--x", o.x, "Choice probability vector for w-to-v; repeatable")->allow_extra_args(false);
  add_mu(convert, "Utility vector (v-to-w) or anchor (w-to-theta); repeatable");
  add_out(convert);
  add_common(convert);

  CLI::App* rum = app.add_subcommand("rum", "Monte Carlo random utility simulation");
  rum->add_option("--family", o.family, "gumbel | normal | logistic | degenerate");
  rum->add_option("--param", o.param, "Scale parameter of the noise family");
  rum->add_option("--binary-from", o.binary_from, "Two-alternative welfare spec to build the noise from");
  add_mu(rum, "Utility vector; repeatable");
  add_out(rum);
  add_common(rum);

  CLI::App* validate = app.add_subcommand("validate", "Check a specification file without running it");
  add_spec(validate, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*eval) return cmd_eval(o, out);
    if (*figure) return cmd_figure(o, out);
    if (*verify) return cmd_verify(o, out);
    if (*convert) return cmd_convert(o, out);
    if (*rum) return cmd_rum(o, out);
    if (*validate) return cmd_validate(o, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace welfarechoice
