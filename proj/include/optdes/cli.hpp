#pragma once

// Batch commands behind the `optdes` executable. Each returns a process exit
// code and writes human-readable output to the given streams.

#include "optdes/problem_file.hpp"
#include "optdes/solver.hpp"
#include "optdes/verify.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace optdes::cli {

enum ExitCode : int {
  kOk = 0,
  kCertificateFailed = 1,
  kMaxIters = 2,
  kNumericalFailure = 3,
  kUsage = 64,
};

inline constexpr double kMonotoneTol = 1e-9;

inline int exit_code_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return kOk;
    case SolveStatus::MaxIters:
    case SolveStatus::Oscillating: return kMaxIters;
    case SolveStatus::SingularM: return kNumericalFailure;
  }
  return kNumericalFailure;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

/// Parses "a,b,c" where each entry is a number or a fraction "x/y".
inline std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    try {
      std::size_t used = 0;
      const auto slash = item.find('/');
      double v;
      if (slash == std::string::npos) {
        v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        const std::string num = item.substr(0, slash), den = item.substr(slash + 1);
        std::size_t u1 = 0, u2 = 0;
        v = std::stod(num, &u1) / std::stod(den, &u2);
        if (u1 != num.size() || u2 != den.size()) throw std::invalid_argument(item);
      }
      out.push_back(v);
    } catch (const std::exception&) {
      throw problem_file_error(flag, "cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

/// Weights as a JSON array or whitespace/comma separated numbers.
inline Vector read_weights(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<double> vals;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw problem_file_error("weights", std::string("malformed JSON: ") + e.what());
    }
    return io::as_vector(doc, "weights");
  }
  std::string cleaned = text;
  for (char& c : cleaned)
    if (c == ',') c = ' ';
  std::istringstream in(cleaned);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw problem_file_error("weights", "cannot parse '" + tok + "' as a number");
    }
  }
  if (vals.empty()) throw problem_file_error("weights", "no weights found");
  return Eigen::Map<const Vector>(vals.data(), Eigen::Index(vals.size()));
}

inline std::string support_text(const DesignMeasure& w, double tol) {
  std::string s = "{";
  bool first = true;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > tol) {
      s += (first ? "" : ", ") + std::to_string(i + 1) + ": " + format_number(w[i], 6);
      first = false;
    }
  return s + "}";
}

/// Maps input errors to kUsage and unexpected numerical errors to
/// kNumericalFailure, reporting either on `err`.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const problem_file_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

// ---------------------------------------------------------------------------

struct SolveOptions {
  std::optional<std::string> trace_path;
  std::optional<std::string> summary_path;
  double support_tol = 1e-4;
};

inline nlohmann::json solve_summary(const SolveResult& res, double support_tol) {
  const auto& last = res.trace.records;
  return {{"status", to_string(res.trace.status)},
          {"iterations", res.iterations},
          {"phi", res.phi},
          {"ratio", last.empty() ? nlohmann::json(nullptr) : nlohmann::json(last.back().ratio)},
          {"monotone", monotonicity_audit(res.trace, kMonotoneTol).monotone},
          {"support", support_json(res.w, support_tol)}};
}

inline int cmd_solve(const std::string& problem_path, const SolveOptions& opts, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&]() -> int {
    const ParsedProblem pp = parse_problem(problem_path);
    const SolveResult res = solve(pp.problem, pp.config);
    if (opts.trace_path) {
      std::ostringstream csv;
      write_trace_csv(csv, res.trace, pp.config.record_weights);
      write_text_file(*opts.trace_path, csv.str());
    }
    if (opts.summary_path) write_text_file(*opts.summary_path, solve_summary(res, opts.support_tol).dump(2) + "\n");
    const double ratio = res.trace.records.empty() ? 0.0 : res.trace.records.back().ratio;
    out << to_string(res.trace.status) << " after " << res.iterations << " iterations: phi=" << format_number(res.phi, 6)
        << " ratio=" << format_number(ratio, 6) << " support=" << support_text(res.w, opts.support_tol) << '\n';
    return exit_code_for(res.trace.status);
  });
}

inline int cmd_certify(const std::string& problem_path, const std::string& weights_path,
                       std::optional<double> delta, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const ParsedProblem pp = parse_problem(problem_path);
    const Vector raw = read_weights(weights_path);
    if (raw.size() != pp.problem.size())
      throw problem_file_error("weights", "has " + std::to_string(raw.size()) + " entries, expected " +
                                              std::to_string(pp.problem.size()));
    DesignMeasure w;
    try {
      w = DesignMeasure::normalized(DesignMeasure(raw, 1e-9).weights());
    } catch (const std::invalid_argument& e) {
      throw problem_file_error("weights", e.what());
    }
    const double d = delta.value_or(pp.config.delta);
    if (!(d > 0.0)) throw problem_file_error("--delta", "must be positive");
    const OptimalityCertificate cert = equivalence_certificate(pp.problem, w, d);
    out << (cert.passed ? "passed" : "failed") << ": ratio=" << format_number(cert.ratio, 6)
        << " max_d=" << format_number(cert.max_d, 6) << " dbar=" << format_number(cert.dbar, 6)
        << " worst_point=" << (cert.worst_point_index + 1) << " delta=" << format_number(d, 6) << '\n';
    return cert.passed ? kOk : kCertificateFailed;
  });
}

struct AuditOptions {
  bool chain = false;
  std::optional<std::string> summary_path;
  std::optional<std::string> trace_path;
};

inline int cmd_audit(const std::string& problem_path, const AuditOptions& opts, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&]() -> int {
    ParsedProblem pp = parse_problem(problem_path);
    if (opts.chain && !pp.problem.criterion().monotone_certified()) {
      err << "--chain requires a certified criterion (psi increasing and concave); criterion "
          << pp.problem.criterion().tag() << " is outside that class\n";
      return kUsage;
    }
    pp.config.record_weights = true;
    const SolveResult res = solve(pp.problem, pp.config);
    if (opts.trace_path) {
      std::ostringstream csv;
      write_trace_csv(csv, res.trace, true);
      write_text_file(*opts.trace_path, csv.str());
    }

    const MonotonicityReport mon = monotonicity_audit(res.trace, kMonotoneTol);
    const auto cycle = oscillation_detect(res.trace);

    nlohmann::json report;
    report["status"] = to_string(res.trace.status);
    report["iterations"] = res.iterations;
    report["phi"] = res.phi;
    report["monotonicity"] = {{"monotone", mon.monotone},
                              {"violations", mon.violations},
                              {"worst_drop", mon.worst_drop},
                              {"first_violation_iter", mon.first_violation_iter ? nlohmann::json(*mon.first_violation_iter)
                                                                                 : nlohmann::json(nullptr)}};
    report["oscillation"] = cycle ? nlohmann::json{{"start_iter", cycle->start_iter},
                                                   {"a", io::vector_json(cycle->a)},
                                                   {"b", io::vector_json(cycle->b)}}
                                  : nlohmann::json(nullptr);
    nlohmann::json min_eigs = nlohmann::json::array();
    for (const auto& r : res.trace.records) min_eigs.push_back(r.min_eig);
    report["min_eigenvalue"] = min_eigs;

    bool chain_ok = true;
    if (opts.chain) {
      long pairs = 0;
      double max_wls = 0.0;
      std::optional<long> first_fail;
      const auto& recs = res.trace.records;
      try {
        for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
          const double lambda = pp.config.step == StepRule::Centered ? 1.0 : lambda_schedule_eval(pp.config, recs[k].t);
          const auto rep = auxiliary_chain_audit(pp.problem, DesignMeasure(recs[k].w), DesignMeasure(recs[k + 1].w), lambda);
          ++pairs;
          max_wls = std::max(max_wls, rep.wls_gap);
          if (!rep.chain_ok && !first_fail) first_fail = recs[k].t;
        }
      } catch (const std::domain_error& e) {
        err << "chain audit failed: " << e.what() << '\n';
        return kNumericalFailure;
      }
      chain_ok = !first_fail;
      report["chain"] = {{"chain_ok", chain_ok},
                         {"pairs", pairs},
                         {"max_wls_gap", max_wls},
                         {"first_failure_iter", first_fail ? nlohmann::json(*first_fail) : nlohmann::json(nullptr)}};
    }

    if (opts.summary_path) write_text_file(*opts.summary_path, report.dump(2) + "\n");
    out << "audit: status=" << to_string(res.trace.status) << " iterations=" << res.iterations
        << " monotone=" << (mon.monotone ? "true" : "false") << " cycle=" << (cycle ? "yes" : "no");
    if (opts.chain) out << " chain_ok=" << (chain_ok ? "true" : "false");
    out << '\n';
    return mon.monotone && chain_ok ? kOk : kCertificateFailed;
  });
}

struct ScanOptions {
  std::vector<double> p_values;
  std::vector<double> lambda_values;
  long iters = 2000;
  std::optional<std::string> output_path;
};

inline int cmd_scan(const std::string& family_path, const ScanOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const nlohmann::json doc = [&] {
      try {
        return nlohmann::json::parse(read_file(family_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw problem_file_error("<family>", std::string("malformed JSON: ") + e.what());
      }
    }();
    const auto& list = io::require(doc, "problems", "<family>");
    if (!list.is_array()) throw problem_file_error("<family>.problems", "expected an array of paths");
    const auto base = std::filesystem::path(family_path).parent_path();
    std::vector<std::string> names;
    std::vector<DesignProblem> family;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_string()) throw problem_file_error("<family>.problems[" + std::to_string(i) + "]", "expected a path");
      const std::string name = list[i].get<std::string>();
      std::filesystem::path p(name);
      if (p.is_relative()) p = base / p;
      family.push_back(parse_problem(p.string()).problem);
      names.push_back(name);
    }
    for (double l : opts.lambda_values)
      if (!(l > 0.0 && l <= 1.0)) throw problem_file_error("--lambda-list", "value " + std::to_string(l) + " is outside (0, 1]");
    for (double p : opts.p_values)
      if (!(p < 0.0)) throw problem_file_error("--p-list", "value " + std::to_string(p) + " must be negative");

    const auto rows = conjecture_scan(family, opts.p_values, opts.lambda_values, opts.iters);
    std::ostringstream csv;
    csv << "p,lambda,problem,monotone\n";
    for (const auto& r : rows)
      csv << format_number(r.p, 17) << ',' << format_number(r.lambda, 17) << ',' << names[r.problem] << ','
          << (r.monotone ? "true" : "false") << '\n';
    if (opts.output_path) write_text_file(*opts.output_path, csv.str());
    out << csv.str();
    return kOk;
  });
}

}  // namespace optdes::cli
