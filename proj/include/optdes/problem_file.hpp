#pragma once

// JSON problem files, CSV traces and JSON run summaries.
//
// Problem file layout:
//
//   {
//     "model":        {"type": "linear" | "logistic" | "custom",
//                      "theta_star": [...],            // logistic only
//                      "infos": [[[...], ...], ...]},   // custom only
//     "design_space": {"points": [[...], ...]}
//                  or {"grid": {"intercept": true,
//                               "ranges": [{"start": 1, "count": 20, "divisor": 20}, ...]}},
//     "criterion":    {"type": "D" | "pmean" | "DK" | "pmeanK" | "c",
//                      "p": -1, "K": [[row], ...], "c": [...]},
//     "algorithm":    {"lambda": 1 | [1, 0.5, ...], "delta": 1e-4, "max_iters": 10000,
//                      "w0": "uniform" | [...], "record_weights": false,
//                      "step": "multiplicative" | "centered", "stop_on_oscillation": true}
//   }

#include "optdes/criteria.hpp"
#include "optdes/design.hpp"
#include "optdes/solver.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace optdes {

/// Malformed or inconsistent problem file; the message names the field.
class problem_file_error : public std::runtime_error {
public:
  problem_file_error(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

struct ParsedProblem {
  DesignProblem problem;
  SolverConfig config;
  std::optional<Vector> theta_star;  // logistic models
  bool lambda_defaulted = false;
};

namespace io {

using json = nlohmann::json;

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw problem_file_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw problem_file_error(path + "." + key, "missing required field");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw problem_file_error(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw problem_file_error(path, "must be finite");
  return x;
}

inline long as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw problem_file_error(path, "expected an integer");
  return v.get<long>();
}

inline Vector as_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw problem_file_error(path, "expected a nonempty array of numbers");
  Vector out(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline Matrix as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw problem_file_error(path, "expected a nonempty list of rows");
  const Vector first = as_vector(v[0], path + "[0]");
  Matrix out(Eigen::Index(v.size()), first.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vector row = as_vector(v[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != first.size()) throw problem_file_error(path, "rows differ in length");
    out.row(Eigen::Index(i)) = row.transpose();
  }
  return out;
}

inline std::vector<DesignPoint> expand_grid(const json& grid, const std::string& path) {
  bool intercept = false;
  if (auto it = grid.find("intercept"); it != grid.end()) {
    if (!it->is_boolean()) throw problem_file_error(path + ".intercept", "expected true or false");
    intercept = it->get<bool>();
  }
  const json& ranges = require(grid, "ranges", path);
  if (!ranges.is_array() || ranges.empty()) throw problem_file_error(path + ".ranges", "expected a nonempty array");
  std::vector<std::vector<double>> axes;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const std::string rp = path + ".ranges[" + std::to_string(k) + "]";
    const json& r = ranges[k];
    const long count = as_integer(require(r, "count", rp), rp + ".count");
    if (count < 1) throw problem_file_error(rp + ".count", "must be at least 1");
    long start = 1;
    if (auto it = r.find("start"); it != r.end()) start = as_integer(*it, rp + ".start");
    double divisor = double(count);
    if (auto it = r.find("divisor"); it != r.end()) divisor = as_number(*it, rp + ".divisor");
    if (divisor == 0.0) throw problem_file_error(rp + ".divisor", "must be nonzero");
    std::vector<double> axis;
    for (long i = start; i < start + count; ++i) axis.push_back(double(i) / divisor);
    axes.push_back(std::move(axis));
  }
  // Cartesian product, first axis slowest (lexicographic order).
  std::vector<DesignPoint> points;
  std::vector<std::size_t> idx(axes.size(), 0);
  const Eigen::Index off = intercept ? 1 : 0;
  while (true) {
    DesignPoint x(Eigen::Index(axes.size()) + off);
    if (intercept) x[0] = 1.0;
    for (std::size_t a = 0; a < axes.size(); ++a) x[Eigen::Index(a) + off] = axes[a][idx[a]];
    points.push_back(std::move(x));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
      if (a == 0) return points;
    }
  }
}

inline Criterion parse_criterion(const json& c, Eigen::Index m) {
  const std::string path = "criterion";
  const json& type = require(c, "type", path);
  if (!type.is_string()) throw problem_file_error(path + ".type", "expected a string");
  const std::string tag = type.get<std::string>();
  auto get_p = [&] { return as_number(require(c, "p", path), path + ".p"); };
  auto get_K = [&] {
    Matrix K = as_matrix(require(c, "K", path), path + ".K");
    if (K.rows() != m)
      throw problem_file_error(path + ".K", "has " + std::to_string(K.rows()) + " rows but the model has m=" +
                                                std::to_string(m));
    return K;
  };
  try {
    if (tag == "D") return Criterion::d_optimal();
    if (tag == "pmean") return Criterion::p_mean(get_p());
    if (tag == "DK") return Criterion::dk(get_K());
    if (tag == "pmeanK") return Criterion::p_mean_k(get_p(), get_K());
    if (tag == "c") {
      Vector cv = as_vector(require(c, "c", path), path + ".c");
      if (cv.size() != m)
        throw problem_file_error(path + ".c", "has length " + std::to_string(cv.size()) + " but the model has m=" +
                                                  std::to_string(m));
      return Criterion::c_optimal(std::move(cv));
    }
  } catch (const std::invalid_argument& e) {
    throw problem_file_error(path, e.what());
  }
  throw problem_file_error(path + ".type", "unknown criterion '" + tag + "' (expected D, pmean, DK, pmeanK or c)");
}

inline StepRule parse_step(const json& v) {
  if (!v.is_string()) throw problem_file_error("algorithm.step", "expected a string");
  const auto s = v.get<std::string>();
  if (s == "multiplicative") return StepRule::Multiplicative;
  if (s == "centered") return StepRule::Centered;
  throw problem_file_error("algorithm.step", "unknown step rule '" + s + "'");
}

inline ParsedProblem parse_problem_json(const json& doc) {
  if (!doc.is_object()) throw problem_file_error("<root>", "expected an object");

  // model
  const json& model = require(doc, "model", "<root>");
  const json& mtype = require(model, "type", "model");
  if (!mtype.is_string()) throw problem_file_error("model.type", "expected a string");
  const std::string model_type = mtype.get<std::string>();
  ModelTag tag;
  if (model_type == "linear") tag = ModelTag::Linear;
  else if (model_type == "logistic") tag = ModelTag::Logistic;
  else if (model_type == "custom") tag = ModelTag::Custom;
  else throw problem_file_error("model.type", "unknown model '" + model_type + "' (expected linear, logistic or custom)");

  std::optional<Vector> theta;
  if (tag == ModelTag::Logistic) theta = as_vector(require(model, "theta_star", "model"), "model.theta_star");

  // design space
  // custom models may omit the design space; points default to indices
  const json no_space = json::object();
  const json& space = tag == ModelTag::Custom && !doc.contains("design_space") ? no_space
                                                                                : require(doc, "design_space", "<root>");
  if (!space.is_object()) throw problem_file_error("design_space", "expected an object");
  const bool has_points = space.contains("points");
  const bool has_grid = space.contains("grid");
  std::vector<DesignPoint> points;
  if (has_points && has_grid) throw problem_file_error("design_space", "give exactly one of points or grid");
  if (has_points) {
    const json& pts = space["points"];
    if (!pts.is_array() || pts.empty()) throw problem_file_error("design_space.points", "expected a nonempty array");
    for (std::size_t i = 0; i < pts.size(); ++i)
      points.push_back(as_vector(pts[i], "design_space.points[" + std::to_string(i) + "]"));
  } else if (has_grid) {
    points = expand_grid(space["grid"], "design_space.grid");
  } else if (tag != ModelTag::Custom) {
    throw problem_file_error("design_space", "give exactly one of points or grid");
  }

  std::vector<InfoMatrix> infos;
  if (tag == ModelTag::Custom) {
    const json& inf = require(model, "infos", "model");
    if (!inf.is_array() || inf.empty()) throw problem_file_error("model.infos", "expected a nonempty array");
    for (std::size_t i = 0; i < inf.size(); ++i)
      infos.push_back(as_matrix(inf[i], "model.infos[" + std::to_string(i) + "]"));
    if (points.empty())
      for (std::size_t i = 0; i < infos.size(); ++i) points.push_back(Vector::Constant(1, double(i + 1)));
    if (points.size() != infos.size())
      throw problem_file_error("model.infos", "has " + std::to_string(infos.size()) + " entries but the design space has " +
                                                  std::to_string(points.size()) + " points");
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != points[0].size())
        throw problem_file_error("design_space", "point " + std::to_string(i + 1) + " has length " +
                                                     std::to_string(points[i].size()) + ", expected " +
                                                     std::to_string(points[0].size()));
      if (theta && theta->size() != points[i].size())
        throw problem_file_error("model.theta_star", "has length " + std::to_string(theta->size()) +
                                                         " but design points have length " +
                                                         std::to_string(points[i].size()));
      infos.push_back(tag == ModelTag::Linear ? fisher_info_linear(points[i])
                                              : fisher_info_logistic(points[i], *theta));
    }
  }
  const Eigen::Index m = infos.front().rows();

  Criterion crit = parse_criterion(require(doc, "criterion", "<root>"), m);

  // algorithm
  ParsedProblem out{DesignProblem(points, infos, crit, tag), SolverConfig::defaults_for(crit), theta, true};
  SolverConfig& cfg = out.config;
  if (auto it = doc.find("algorithm"); it != doc.end()) {
    const json& alg = *it;
    if (!alg.is_object()) throw problem_file_error("algorithm", "expected an object");
    if (auto l = alg.find("lambda"); l != alg.end()) {
      out.lambda_defaulted = false;
      cfg.lambda.clear();
      if (l->is_array()) {
        if (l->empty()) throw problem_file_error("algorithm.lambda", "schedule is empty");
        for (std::size_t i = 0; i < l->size(); ++i)
          cfg.lambda.push_back(as_number((*l)[i], "algorithm.lambda[" + std::to_string(i) + "]"));
      } else {
        cfg.lambda.push_back(as_number(*l, "algorithm.lambda"));
      }
      for (double v : cfg.lambda)
        if (!(v > 0.0 && v <= 1.0))
          throw problem_file_error("algorithm.lambda", "value " + std::to_string(v) + " is outside (0, 1]");
    }
    if (auto d = alg.find("delta"); d != alg.end()) {
      cfg.delta = as_number(*d, "algorithm.delta");
      if (!(cfg.delta > 0.0)) throw problem_file_error("algorithm.delta", "must be positive");
    }
    if (auto mi = alg.find("max_iters"); mi != alg.end()) {
      cfg.max_iters = as_integer(*mi, "algorithm.max_iters");
      if (cfg.max_iters < 1) throw problem_file_error("algorithm.max_iters", "must be at least 1");
    }
    if (auto w0 = alg.find("w0"); w0 != alg.end()) {
      if (w0->is_string()) {
        if (w0->get<std::string>() != "uniform")
          throw problem_file_error("algorithm.w0", "expected \"uniform\" or an array of weights");
      } else {
        const Vector w = as_vector(*w0, "algorithm.w0");
        if (w.size() != Eigen::Index(points.size()))
          throw problem_file_error("algorithm.w0", "has " + std::to_string(w.size()) + " weights, expected " +
                                                       std::to_string(points.size()));
        try {
          const DesignMeasure checked(w, 1e-9);
          cfg.w0 = DesignMeasure::normalized(checked.weights());
        } catch (const std::invalid_argument& e) {
          throw problem_file_error("algorithm.w0", e.what());
        }
      }
    }
    if (auto rw = alg.find("record_weights"); rw != alg.end()) {
      if (!rw->is_boolean()) throw problem_file_error("algorithm.record_weights", "expected true or false");
      cfg.record_weights = rw->get<bool>();
    }
    if (auto st = alg.find("step"); st != alg.end()) cfg.step = parse_step(*st);
    if (auto so = alg.find("stop_on_oscillation"); so != alg.end()) {
      if (!so->is_boolean()) throw problem_file_error("algorithm.stop_on_oscillation", "expected true or false");
      cfg.stop_on_oscillation = so->get<bool>();
    }
  }
  return out;
}

}  // namespace io

/// Parses a problem document; every failure is a problem_file_error.
inline ParsedProblem parse_problem_json(const nlohmann::json& doc) {
  try {
    return io::parse_problem_json(doc);
  } catch (const problem_file_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw problem_file_error("design_space", e.what());
  }
}

inline ParsedProblem parse_problem_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw problem_file_error("<document>", std::string("malformed JSON: ") + e.what());
  }
  return parse_problem_json(doc);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw problem_file_error("<file>", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ParsedProblem parse_problem(const std::string& path) { return parse_problem_string(read_file(path)); }

namespace io {

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

inline json criterion_json(const Criterion& crit) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criterion::D>) return {{"type", "D"}};
        else if constexpr (std::is_same_v<T, criterion::PMean>) return {{"type", "pmean"}, {"p", c.p}};
        else if constexpr (std::is_same_v<T, criterion::DK>) return {{"type", "DK"}, {"K", matrix_json(c.K)}};
        else if constexpr (std::is_same_v<T, criterion::PMeanK>)
          return {{"type", "pmeanK"}, {"p", c.p}, {"K", matrix_json(c.K)}};
        else return {{"type", "c"}, {"c", vector_json(c.c)}};
      },
      crit.variant());
}

}  // namespace io

/// Canonical document: explicit points, explicit algorithm settings.
inline nlohmann::json problem_to_json(const ParsedProblem& pp) {
  using io::json;
  const DesignProblem& p = pp.problem;
  json model = {{"type", to_string(p.model_tag())}};
  if (pp.theta_star) model["theta_star"] = io::vector_json(*pp.theta_star);
  if (p.model_tag() == ModelTag::Custom) {
    json infos = json::array();
    for (const auto& a : p.infos()) infos.push_back(io::matrix_json(a));
    model["infos"] = infos;
  }
  json points = json::array();
  for (const auto& x : p.points()) points.push_back(io::vector_json(x));
  const SolverConfig& c = pp.config;
  json alg = {{"delta", c.delta},
              {"max_iters", c.max_iters},
              {"record_weights", c.record_weights},
              {"step", c.step == StepRule::Centered ? "centered" : "multiplicative"},
              {"stop_on_oscillation", c.stop_on_oscillation}};
  alg["lambda"] = c.lambda.size() == 1 ? json(c.lambda[0]) : json(c.lambda);
  alg["w0"] = c.w0 ? io::vector_json(c.w0->weights()) : json("uniform");
  return {{"model", model},
          {"design_space", {{"points", points}}},
          {"criterion", io::criterion_json(p.criterion())},
          {"algorithm", alg}};
}

// ---------------------------------------------------------------------------
// Output formats

/// %.{digits}g formatting.
inline std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// CSV header `iter,phi,max_d,dbar,ratio[,w_1..w_n]`, one row per record,
/// 17 significant digits.
inline void write_trace_csv(std::ostream& os, const RunTrace& trace, bool with_weights) {
  std::size_t n = 0;
  if (with_weights && !trace.records.empty()) n = std::size_t(trace.records.front().w.size());
  os << "iter,phi,max_d,dbar,ratio";
  for (std::size_t i = 0; i < n; ++i) os << ",w_" << (i + 1);
  os << '\n';
  for (const auto& r : trace.records) {
    os << r.t << ',' << format_number(r.phi, 17) << ',' << format_number(r.max_d, 17) << ','
       << format_number(r.dbar, 17) << ',' << format_number(r.ratio, 17);
    for (std::size_t i = 0; i < n; ++i) os << ',' << format_number(r.w[Eigen::Index(i)], 17);
    os << '\n';
  }
}

/// Support map keyed by 1-based point index; weights <= support_tol are dropped.
inline nlohmann::json support_json(const DesignMeasure& w, double support_tol) {
  nlohmann::json s = nlohmann::json::object();
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > support_tol) s[std::to_string(i + 1)] = w[i];
  return s;
}

}  // namespace optdes
