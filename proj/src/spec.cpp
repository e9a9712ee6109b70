#include "welfarechoice/spec.hpp"

#include "welfarechoice/transforms.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace welfarechoice {

namespace {

using json = nlohmann::json;

std::string at(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

const json& require_field(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SpecError("missing field '" + at(path, key) + "'");
  return *it;
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SpecError("field '" + where + "' must be a number");
  return j.get<double>();
}

double number(const json& obj, const std::string& key, const std::string& path) {
  return as_number(require_field(obj, key, path), at(path, key));
}

double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  return obj.contains(key) ? number(obj, key, path) : fallback;
}

std::size_t count(const json& obj, const std::string& key, const std::string& path) {
  const json& j = require_field(obj, key, path);
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw SpecError("field '" + at(path, key) + "' must be a positive integer");
  }
  return j.get<std::size_t>();
}

Vector vector_field(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SpecError("field '" + where + "' must be a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], at(where, i));
  return v;
}

Matrix matrix_field(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SpecError("field '" + where + "' must be a non-empty array of rows");
  Matrix M;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_field(j[r], at(where, r));
    if (r == 0) M.resize(static_cast<Eigen::Index>(j.size()), row.size());
    if (row.size() != M.cols()) throw SpecError("field '" + at(where, r) + "' has the wrong length");
    M.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return M;
}

// One-based index list as written in spec files, returned zero-based.
std::vector<int> index_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SpecError("field '" + where + "' must be a non-empty array of indices");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 1) {
      throw SpecError("field '" + at(where, i) + "' must be a 1-based index");
    }
    out.push_back(j[i].get<int>() - 1);
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& known_fields() {
  static const std::map<std::string, std::set<std::string>> fields{
      {"mnl", {"n", "eta"}},
      {"nested_logit", {"n", "nests", "lambda"}},
      {"gev_custom", {"n", "eta", "terms"}},
      {"ram_entropy", {"n", "eta"}},
      {"ram_quadratic", {"A"}},
      {"ram_logbarrier", {"n"}},
      {"ram_mdm", {"marginals"}},
      {"ram_mmm", {"sigma"}},
      {"ram_cmm", {"cov"}},
      {"transform_scale", {"eta", "inner"}},
      {"transform_mix", {"n", "components"}},
      {"transform_cross", {"A", "inner"}},
  };
  return fields;
}

Marginal parse_marginal(const json& j, const std::string& where) {
  if (!j.is_object()) throw SpecError("field '" + where + "' must be an object");
  const json& fam = require_field(j, "family", where);
  if (!fam.is_string()) throw SpecError("field '" + at(where, "family") + "' must be a string");
  const std::string family = fam.get<std::string>();
  Marginal m;
  if (family == "uniform") {
    m = Marginal::uniform(number_or(j, "lo", where, 0.0), number_or(j, "hi", where, 1.0));
  } else if (family == "exponential") {
    m = Marginal::exponential(number_or(j, "rate", where, 1.0));
  } else if (family == "logistic") {
    m = Marginal::logistic(number_or(j, "scale", where, 1.0));
  } else if (family == "normal") {
    m = Marginal::normal(number_or(j, "sd", where, 1.0));
  } else {
    throw SpecError("field '" + at(where, "family") + "': unknown family '" + family +
                    "' (expected uniform, exponential, logistic or normal)");
  }
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw SpecError("field '" + where + "': " + e.what());
  }
  return m;
}

ModelSpec build(const json& j, const std::string& path);

ModelSpec build_kind(const std::string& kind, const json& j, const std::string& path) {
  ModelSpec s;
  s.kind = kind;
  if (kind == "mnl") {
    s.model = mnl_welfare(number_or(j, "eta", path, 1.0), count(j, "n", path));
  } else if (kind == "nested_logit") {
    const std::size_t n = count(j, "n", path);
    const json& nests = require_field(j, "nests", path);
    const std::string nests_at = at(path, "nests");
    if (!nests.is_array() || nests.empty()) throw SpecError("field '" + nests_at + "' must be a non-empty array");
    NestStructure ns;
    for (std::size_t k = 0; k < nests.size(); ++k) ns.nests.push_back(index_list(nests[k], at(nests_at, k)));
    if (j.contains("lambda")) {
      const Vector lambda = vector_field(j["lambda"], at(path, "lambda"));
      ns.lambda.assign(lambda.data(), lambda.data() + lambda.size());
    } else {
      ns.lambda.assign(ns.nests.size(), 1.0);
    }
    s.model = nested_logit_welfare(ns, n);
  } else if (kind == "gev_custom") {
    const std::size_t n = count(j, "n", path);
    const double eta = number_or(j, "eta", path, 1.0);
    const json& terms = require_field(j, "terms", path);
    const std::string terms_at = at(path, "terms");
    if (!terms.is_array() || terms.empty()) throw SpecError("field '" + terms_at + "' must be a non-empty array");
    std::vector<double> coef;
    Matrix exponents(static_cast<Eigen::Index>(terms.size()), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const std::string term_at = at(terms_at, t);
      coef.push_back(number(terms[t], "coef", term_at));
      const Vector e = vector_field(require_field(terms[t], "exponents", term_at), at(term_at, "exponents"));
      if (static_cast<std::size_t>(e.size()) != n) {
        throw SpecError("field '" + at(term_at, "exponents") + "' must have n entries");
      }
      exponents.row(static_cast<Eigen::Index>(t)) = e.transpose();
    }
    s.model = gev_welfare(power_sum_generator(eta, coef, exponents), n);
  } else if (kind == "ram_entropy") {
    s.regularizer = entropy_regularizer(number_or(j, "eta", path, 1.0), count(j, "n", path));
  } else if (kind == "ram_quadratic") {
    s.regularizer = quadratic_regularizer(matrix_field(require_field(j, "A", path), at(path, "A")));
  } else if (kind == "ram_logbarrier") {
    s.regularizer = log_barrier_regularizer(count(j, "n", path));
  } else if (kind == "ram_mdm") {
    const json& ms = require_field(j, "marginals", path);
    const std::string ms_at = at(path, "marginals");
    if (!ms.is_array() || ms.empty()) throw SpecError("field '" + ms_at + "' must be a non-empty array");
    MarginalSpec spec;
    for (std::size_t i = 0; i < ms.size(); ++i) spec.push_back(parse_marginal(ms[i], at(ms_at, i)));
    s.regularizer = mdm_regularizer(spec);
  } else if (kind == "ram_mmm") {
    s.regularizer = mmm_regularizer(vector_field(require_field(j, "sigma", path), at(path, "sigma")));
  } else if (kind == "ram_cmm") {
    s.regularizer = cmm_regularizer(matrix_field(require_field(j, "cov", path), at(path, "cov")));
  } else if (kind == "transform_scale") {
    const ModelSpec inner = build(require_field(j, "inner", path), at(path, "inner"));
    s.model = scale(inner.model, number(j, "eta", path));
  } else if (kind == "transform_mix") {
    const std::size_t n = count(j, "n", path);
    const json& cs = require_field(j, "components", path);
    const std::string cs_at = at(path, "components");
    if (!cs.is_array() || cs.empty()) throw SpecError("field '" + cs_at + "' must be a non-empty array");
    std::vector<MixtureComponent> components;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::string c_at = at(cs_at, k);
      MixtureComponent c;
      c.weight = number(cs[k], "weight", c_at);
      c.indices = index_list(require_field(cs[k], "indices", c_at), at(c_at, "indices"));
      c.model = build(require_field(cs[k], "model", c_at), at(c_at, "model")).model;
      components.push_back(std::move(c));
    }
    s.model = mix(std::move(components), n);
  } else if (kind == "transform_cross") {
    const ModelSpec inner = build(require_field(j, "inner", path), at(path, "inner"));
    s.model = cross(inner.model, matrix_field(require_field(j, "A", path), at(path, "A")));
  }
  if (s.regularizer) s.model = ram_welfare(s.regularizer);
  s.n = s.model->size();
  return s;
}

ModelSpec build(const json& j, const std::string& path) {
  const std::string where = path.empty() ? "document" : "'" + path + "'";
  if (!j.is_object()) throw SpecError(where + " must be an object");
  const json& k = require_field(j, "kind", path);
  if (!k.is_string()) throw SpecError("field '" + at(path, "kind") + "' must be a string");
  const std::string kind = k.get<std::string>();
  const auto known = known_fields().find(kind);
  if (known == known_fields().end()) {
    throw SpecError("field '" + at(path, "kind") + "': unknown kind '" + kind + "'");
  }
  for (const auto& item : j.items()) {
    if (item.key() != "kind" && !known->second.count(item.key())) {
      throw SpecError("unknown field '" + at(path, item.key()) + "' for kind " + kind);
    }
  }
  try {
    return build_kind(kind, j, path);
  } catch (const SpecError&) {
    throw;
  } catch (const ArgumentError& e) {
    throw SpecError(where + " (" + kind + "): " + e.what());
  }
}

}  // namespace

ModelSpec parse_model_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError(e.what());
  }
  ModelSpec spec = build(doc, "");
  spec.canonical = doc.dump();
  return spec;
}

ModelSpec load_model_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot read spec file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_spec(buf.str());
}

}  // namespace welfarechoice
