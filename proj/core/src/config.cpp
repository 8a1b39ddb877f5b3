#include "blockcv/config.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace blockcv {

using nlohmann::json;

namespace {

// Collects diagnostics while reading typed fields out of JSON objects.
class Reader {
public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) {
    errors.push_back(path + ": " + msg);
  }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k))
        fail(path + "/" + k, "unknown key");
    return true;
  }

  template <class T>
  void read(const json& j, const char* key, const std::string& path, T& out) {
    if (!j.contains(key))
      return;
    const json& v = j.at(key);
    const std::string p = path + "/" + key;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean())
          return fail(p, "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer())
          return fail(p, "expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number())
          return fail(p, "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string())
          return fail(p, "expected a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(p, e.what());
    }
  }

  template <class T>
  void required(const json& j, const char* key, const std::string& path, T& out) {
    if (!j.contains(key))
      return fail(path + "/" + key, "required");
    read(j, key, path, out);
  }

  template <class E, class Parse>
  void enumeration(const json& j, const char* key, const std::string& path, E& out,
                   Parse parse) {
    std::string name;
    read(j, key, path, name);
    if (name.empty())
      return;
    try {
      out = parse(name);
    } catch (const std::invalid_argument& e) {
      fail(path + "/" + key, e.what());
    }
  }

  void int_list(const json& j, const char* key, const std::string& path,
                std::vector<int>& out) {
    if (!j.contains(key))
      return;
    const json& v = j.at(key);
    if (!v.is_array())
      return fail(path + "/" + key, "expected an array of integers");
    out.clear();
    for (const json& e : v) {
      if (!e.is_number_integer())
        return fail(path + "/" + key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
  }

  void vector(const json& j, const char* key, const std::string& path, Eigen::VectorXd& out) {
    if (!j.contains(key))
      return;
    const json& v = j.at(key);
    if (!v.is_array())
      return fail(path + "/" + key, "expected an array of numbers");
    out.resize(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        return fail(path + "/" + key, "expected an array of numbers");
      out(static_cast<Index>(i)) = v[i].get<double>();
    }
  }
};

void read_priors(Reader& r, const json& j, const std::string& path, PriorSpec& p) {
  if (!r.object(j, path,
                {"beta_mean", "beta_variance", "rho_a", "rho_b", "sigma2_variance",
                 "lambda_variance", "sigma_variance"}))
    return;
  r.read(j, "beta_mean", path, p.beta_mean);
  r.read(j, "beta_variance", path, p.beta_variance);
  r.read(j, "rho_a", path, p.rho_a);
  r.read(j, "rho_b", path, p.rho_b);
  r.read(j, "sigma2_variance", path, p.sigma2_variance);
  r.read(j, "lambda_variance", path, p.lambda_variance);
  r.read(j, "sigma_variance", path, p.sigma_variance);
}

void read_clamp(Reader& r, const json& j, const std::string& path, ParameterClamp& c) {
  if (!r.object(j, path, {"beta", "rho", "sigma2", "lambda", "sigma"}))
    return;
  if (j.contains("beta")) {
    Eigen::VectorXd b;
    r.vector(j, "beta", path, b);
    c.beta = b;
  }
  auto opt = [&](const char* key, std::optional<double>& out) {
    if (!j.contains(key))
      return;
    double v = 0.0;
    r.read(j, key, path, v);
    out = v;
  };
  opt("rho", c.rho);
  opt("sigma2", c.sigma2);
  opt("lambda", c.lambda);
  opt("sigma", c.sigma);
}

ModelSpec read_model(Reader& r, const json& j, const std::string& path,
                     const PriorSpec& default_prior, const std::string& default_name) {
  ModelSpec m;
  m.name = default_name;
  m.prior = default_prior;
  if (!r.object(j, path,
                {"name", "family", "scheme", "order", "standardized", "kernel", "columns",
                 "priors", "clamp"}))
    return m;
  r.read(j, "name", path, m.name);
  r.enumeration(j, "family", path, m.family, parse_family);
  r.enumeration(j, "scheme", path, m.scheme, parse_scheme);
  r.read(j, "order", path, m.order);
  r.read(j, "standardized", path, m.standardized);
  r.enumeration(j, "kernel", path, m.kernel, parse_kernel);
  r.int_list(j, "columns", path, m.columns);
  if (j.contains("priors"))
    read_priors(r, j.at("priors"), path + "/priors", m.prior);
  if (j.contains("clamp"))
    read_clamp(r, j.at("clamp"), path + "/clamp", m.clamp);
  return m;
}

DgpSpec read_dgp(Reader& r, const json& j, const std::string& path) {
  DgpSpec d;
  if (!r.object(j, path,
                {"family", "scheme", "order", "standardized", "kernel", "beta", "rho", "sigma2",
                 "lambda", "sigma"}))
    return d;
  r.enumeration(j, "family", path, d.family, parse_family);
  r.enumeration(j, "scheme", path, d.scheme, parse_scheme);
  r.read(j, "order", path, d.order);
  r.read(j, "standardized", path, d.standardized);
  r.enumeration(j, "kernel", path, d.kernel, parse_kernel);
  r.vector(j, "beta", path, d.beta);
  r.read(j, "rho", path, d.rho);
  r.read(j, "sigma2", path, d.sigma2);
  r.read(j, "lambda", path, d.lambda);
  r.read(j, "sigma", path, d.sigma);
  return d;
}

json clamp_json(const ParameterClamp& c) {
  json j = json::object();
  if (c.beta)
    j["beta"] = std::vector<double>(c.beta->data(), c.beta->data() + c.beta->size());
  if (c.rho)
    j["rho"] = *c.rho;
  if (c.sigma2)
    j["sigma2"] = *c.sigma2;
  if (c.lambda)
    j["lambda"] = *c.lambda;
  if (c.sigma)
    j["sigma"] = *c.sigma;
  return j;
}

json model_json(const ModelSpec& m) {
  json j = {{"name", m.name},
            {"family", std::string(to_string(m.family))},
            {"columns", m.columns},
            {"priors",
             {{"beta_mean", m.prior.beta_mean},
              {"beta_variance", m.prior.beta_variance},
              {"rho_a", m.prior.rho_a},
              {"rho_b", m.prior.rho_b},
              {"sigma2_variance", m.prior.sigma2_variance},
              {"lambda_variance", m.prior.lambda_variance},
              {"sigma_variance", m.prior.sigma_variance}}}};
  if (m.family == Family::kernel) {
    j["kernel"] = std::string(to_string(m.kernel));
  } else {
    j["scheme"] = std::string(to_string(m.scheme));
    j["order"] = m.order;
    j["standardized"] = m.standardized;
  }
  if (m.clamp.any())
    j["clamp"] = clamp_json(m.clamp);
  return j;
}

json dgp_json(const DgpSpec& d) {
  json j = {{"family", std::string(to_string(d.family))}};
  if (d.family == Family::kernel) {
    j["kernel"] = std::string(to_string(d.kernel));
    j["lambda"] = d.lambda;
    j["sigma"] = d.sigma;
  } else {
    j["scheme"] = std::string(to_string(d.scheme));
    j["order"] = d.order;
    j["standardized"] = d.standardized;
    j["beta"] = std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size());
    j["rho"] = d.rho;
    j["sigma2"] = d.sigma2;
  }
  return j;
}

void validate_model(const ModelSpec& m, const ExperimentConfig& c, const std::string& where,
                    std::vector<std::string>& errs) {
  if (m.family == Family::kernel) {
    if (!m.columns.empty())
      errs.push_back(where + ": kernel models take no covariate columns");
  } else {
    if (m.order < 1)
      errs.push_back(where + ": order must be at least 1");
    for (int col : m.columns)
      if (col < 0 || col >= c.covariates)
        errs.push_back(fmt::format("{}: column {} outside design matrix of width {}", where, col,
                                   c.covariates));
  }
  const PriorSpec& p = m.prior;
  if (!(p.beta_variance > 0.0) || !(p.sigma2_variance > 0.0) || !(p.lambda_variance > 0.0) ||
      !(p.sigma_variance > 0.0))
    errs.push_back(where + ": prior variances must be positive");
  if (!(p.rho_a > 0.0) || !(p.rho_b > 0.0))
    errs.push_back(where + ": beta prior shapes must be positive");
  if (m.clamp.beta && m.clamp.beta->size() != static_cast<Index>(m.columns.size()))
    errs.push_back(where + ": clamped beta length must match columns");
}

} // namespace

std::string DgpSpec::describe() const {
  if (family == Family::kernel)
    return std::string(to_string(kernel));
  return fmt::format("rho={:g}", rho);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errs;
  if (c.name.empty())
    errs.push_back("/name: must not be empty");
  if (c.rows < 1 || c.cols < 1)
    errs.push_back("/lattice: dimensions must be positive");
  if (c.replications < 1)
    errs.push_back("/replications: must be at least 1");
  if (c.covariates < 0)
    errs.push_back("/covariates: must be non-negative");
  if (c.trim && !(*c.trim > 0.0 && *c.trim <= 1.0))
    errs.push_back("/trim: must lie in (0, 1]");
  if (!(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0))
    errs.push_back("/max_failure_rate: must lie in [0, 1]");
  if (c.design.values.empty())
    errs.push_back("/design: at least one block size or cluster count is required");
  if (c.design.halo_order < 0)
    errs.push_back("/design/halo_order: must be non-negative");
  const long n = static_cast<long>(c.rows) * c.cols;
  for (int v : c.design.values) {
    if (c.design.type == DesignType::blocked) {
      if (v < 1 || c.rows < 1 || c.cols < 1 || c.rows % v != 0 || c.cols % v != 0)
        errs.push_back(fmt::format("/design/sizes: {} does not divide the {}x{} lattice", v,
                                   c.rows, c.cols));
      else if (static_cast<long>(v) * v == n)
        errs.push_back(fmt::format("/design/sizes: {} leaves no training cells", v));
    } else if (v < 2 || v > n) {
      errs.push_back(fmt::format("/design/clusters: {} outside [2, {}]", v, n));
    }
  }
  if (c.laplace.optimizer.gradient_tolerance <= 0.0 || c.laplace.optimizer.max_iterations < 1)
    errs.push_back("/optimizer: tolerance and iteration cap must be positive");
  if (c.scenarios.empty())
    errs.push_back("/scenarios: at least one scenario is required");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
    const Scenario& s = c.scenarios[i];
    const std::string where = fmt::format("/scenarios/{}", i);
    if (!labels.insert(s.label).second)
      errs.push_back(where + ": duplicate label '" + s.label + "'");
    const DgpSpec& d = s.dgp;
    if (d.family == Family::kernel) {
      if (!(d.lambda > 0.0) || !(d.sigma > 0.0))
        errs.push_back(where + "/dgp: kernel parameters must be positive");
    } else {
      if (d.beta.size() != c.covariates)
        errs.push_back(fmt::format("{}/dgp/beta: length {} but the design matrix has {} columns",
                                   where, d.beta.size(), c.covariates));
      if (!(d.sigma2 > 0.0))
        errs.push_back(where + "/dgp/sigma2: must be positive");
      if (d.order < 1)
        errs.push_back(where + "/dgp/order: must be at least 1");
      if (d.standardized && !(d.rho >= 0.0 && d.rho < 1.0))
        errs.push_back(where + "/dgp/rho: must lie in [0, 1) for standardised weights");
    }
    validate_model(s.a, c, where + "/candidates/A", errs);
    validate_model(s.b, c, where + "/candidates/B", errs);
  }
  return errs;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Reader r;
  ExperimentConfig c;
  if (!r.object(doc, "",
                {"name", "lattice", "replications", "seed", "covariates", "trim", "dgp",
                 "candidates", "priors", "scenarios", "design", "optimizer",
                 "max_failure_rate", "$schema", "description"}))
    throw ConfigError("config: top level must be an object");

  r.required(doc, "name", "", c.name);
  if (!doc.contains("lattice")) {
    r.fail("/lattice", "required");
  } else if (r.object(doc["lattice"], "/lattice", {"rows", "cols"})) {
    r.required(doc["lattice"], "rows", "/lattice", c.rows);
    r.required(doc["lattice"], "cols", "/lattice", c.cols);
  }
  r.required(doc, "replications", "", c.replications);
  r.required(doc, "seed", "", c.seed);
  r.read(doc, "covariates", "", c.covariates);
  r.read(doc, "max_failure_rate", "", c.max_failure_rate);
  if (doc.contains("trim") && !doc["trim"].is_null()) {
    double t = 0.0;
    r.read(doc, "trim", "", t);
    c.trim = t;
  }

  if (!doc.contains("design")) {
    r.fail("/design", "required");
  } else {
    const json& d = doc["design"];
    if (r.object(d, "/design", {"type", "sizes", "clusters", "halo_order", "halo_scheme"})) {
      std::string type = "blocked";
      r.read(d, "type", "/design", type);
      if (type == "blocked") {
        c.design.type = DesignType::blocked;
        r.int_list(d, "sizes", "/design", c.design.values);
      } else if (type == "clustered") {
        c.design.type = DesignType::clustered;
        r.int_list(d, "clusters", "/design", c.design.values);
      } else {
        r.fail("/design/type", "expected 'blocked' or 'clustered'");
      }
      r.read(d, "halo_order", "/design", c.design.halo_order);
      if (d.contains("halo_scheme")) {
        Scheme s = Scheme::rook;
        r.enumeration(d, "halo_scheme", "/design", s, parse_scheme);
        c.design.halo_scheme = s;
      }
    }
  }

  if (doc.contains("optimizer")) {
    const json& o = doc["optimizer"];
    if (r.object(o, "/optimizer",
                 {"gradient_tolerance", "max_iterations", "memory", "hessian_step", "profile",
                  "retries"})) {
      auto& opt = c.laplace.optimizer;
      r.read(o, "gradient_tolerance", "/optimizer", opt.gradient_tolerance);
      r.read(o, "max_iterations", "/optimizer", opt.max_iterations);
      r.read(o, "memory", "/optimizer", opt.memory);
      r.read(o, "hessian_step", "/optimizer", opt.hessian_step);
      r.read(o, "profile", "/optimizer", c.laplace.profile);
      r.read(o, "retries", "/optimizer", c.laplace.retries);
    }
  }

  PriorSpec priors;
  if (doc.contains("priors"))
    read_priors(r, doc["priors"], "/priors", priors);

  // Scenarios are merge patches over the base dgp and candidates.
  json base = json::object();
  base["dgp"] = doc.value("dgp", json::object());
  base["candidates"] = doc.value("candidates", json::object());
  std::vector<std::pair<std::string, json>> patches;
  if (doc.contains("scenarios")) {
    const json& list = doc["scenarios"];
    if (!list.is_array() || list.empty()) {
      r.fail("/scenarios", "expected a non-empty array");
    } else {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = fmt::format("/scenarios/{}", i);
        if (!r.object(list[i], path, {"label", "dgp", "candidates"}))
          continue;
        std::string label = fmt::format("scenario{}", i);
        r.read(list[i], "label", path, label);
        json patch = list[i];
        patch.erase("label");
        patches.emplace_back(label, patch);
      }
    }
  } else {
    patches.emplace_back("base", json::object());
  }

  for (std::size_t i = 0; i < patches.size(); ++i) {
    json merged = base;
    merged.merge_patch(patches[i].second);
    const std::string path = doc.contains("scenarios") ? fmt::format("/scenarios/{}", i) : "";
    Scenario s;
    s.label = patches[i].first;
    if (!merged["dgp"].is_object() || merged["dgp"].empty())
      r.fail(path + "/dgp", "required");
    else
      s.dgp = read_dgp(r, merged["dgp"], path + "/dgp");
    const json& cands = merged["candidates"];
    if (r.object(cands, path + "/candidates", {"A", "B"})) {
      if (!cands.contains("A") || !cands.contains("B")) {
        r.fail(path + "/candidates", "both A and B are required");
      } else {
        s.a = read_model(r, cands["A"], path + "/candidates/A", priors, "A");
        s.b = read_model(r, cands["B"], path + "/candidates/B", priors, "B");
      }
    }
    c.scenarios.push_back(std::move(s));
  }

  std::vector<std::string> errs = std::move(r.errors);
  if (errs.empty())
    errs = validate(c);
  if (!errs.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& e : errs)
      msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c, int indent) {
  json j;
  j["name"] = c.name;
  j["lattice"] = {{"rows", c.rows}, {"cols", c.cols}};
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["covariates"] = c.covariates;
  j["trim"] = c.trim ? json(*c.trim) : json(nullptr);
  j["max_failure_rate"] = c.max_failure_rate;
  json design = {{"type", c.design.type == DesignType::blocked ? "blocked" : "clustered"},
                 {c.design.type == DesignType::blocked ? "sizes" : "clusters", c.design.values},
                 {"halo_order", c.design.halo_order}};
  if (c.design.halo_scheme)
    design["halo_scheme"] = std::string(to_string(*c.design.halo_scheme));
  j["design"] = design;
  const auto& opt = c.laplace.optimizer;
  j["optimizer"] = {{"gradient_tolerance", opt.gradient_tolerance},
                    {"max_iterations", opt.max_iterations},
                    {"memory", opt.memory},
                    {"hessian_step", opt.hessian_step},
                    {"profile", c.laplace.profile},
                    {"retries", c.laplace.retries}};
  json scenarios = json::array();
  for (const Scenario& s : c.scenarios)
    scenarios.push_back({{"label", s.label},
                         {"dgp", dgp_json(s.dgp)},
                         {"candidates", {{"A", model_json(s.a)}, {"B", model_json(s.b)}}}});
  j["scenarios"] = scenarios;
  return j.dump(indent);
}

Scheme halo_scheme_for(const ExperimentConfig& c, const Scenario& s) {
  if (c.design.halo_scheme)
    return *c.design.halo_scheme;
  const bool a_sar = s.a.family != Family::kernel;
  const bool b_sar = s.b.family != Family::kernel;
  if (a_sar && b_sar)
    return s.a.scheme == s.b.scheme ? s.a.scheme : Scheme::queen;
  if (a_sar)
    return s.a.scheme;
  if (b_sar)
    return s.b.scheme;
  return Scheme::rook;
}

std::vector<DesignSpec> design_cells(const ExperimentConfig& c, const Scenario& s) {
  const Scheme scheme = halo_scheme_for(c, s);
  std::vector<DesignSpec> cells;
  for (int v : c.design.values) {
    if (c.design.type == DesignType::blocked)
      cells.emplace_back(BlockedDesign{v, c.design.halo_order, scheme});
    else
      cells.emplace_back(ClusteredDesign{v, c.design.halo_order, scheme});
  }
  return cells;
}

} // namespace blockcv
