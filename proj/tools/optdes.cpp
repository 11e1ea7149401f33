// optdes: optimal designs on finite design spaces by multiplicative iteration.
//
//   optdes solve   PROBLEM [--trace PATH] [--summary PATH] [--support-tol X]
//   optdes certify PROBLEM WEIGHTS [--delta X]
//   optdes audit   PROBLEM [--chain] [--summary PATH] [--trace PATH]
//   optdes scan    FAMILY --p-list=-1,-2 --lambda-list=1/3,1/2,1 [--iters N] [--output PATH]

#include "optdes/cli.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  using namespace optdes::cli;

  CLI::App app{"Optimal experimental designs by multiplicative weight iteration"};
  app.require_subcommand(1);

  std::string problem, weights, family;
  std::string trace, summary, output;
  double support_tol = 1e-4;
  double delta = 0.0;
  bool chain = false;
  std::string p_list, lambda_list;
  long iters = 2000;

  auto* solve = app.add_subcommand("solve", "Run the iteration and write trace/summary files");
  solve->add_option("problem", problem, "Problem file (JSON)")->required();
  solve->add_option("--trace", trace, "Write the per-iteration trace as CSV");
  solve->add_option("--summary", summary, "Write a JSON run summary");
  solve->add_option("--support-tol", support_tol, "Weights at or below this are reported as 0");

  auto* certify = app.add_subcommand("certify", "Check a design with the equivalence-theorem certificate");
  certify->add_option("problem", problem, "Problem file (JSON)")->required();
  certify->add_option("weights", weights, "Weights file (JSON array or whitespace separated)")->required();
  auto* delta_opt = certify->add_option("--delta", delta, "Certificate tolerance (default: the problem's delta)");

  auto* audit = app.add_subcommand("audit", "Solve with weight snapshots and run the monotonicity audits");
  audit->add_option("problem", problem, "Problem file (JSON)")->required();
  audit->add_flag("--chain", chain, "Also check the auxiliary-variable inequality chain at every step");
  audit->add_option("--summary", summary, "Write the JSON audit report");
  audit->add_option("--trace", trace, "Write the per-iteration trace as CSV");

  auto* scan = app.add_subcommand("scan", "Tabulate p-mean monotonicity over (p, lambda)");
  scan->add_option("family", family, "Family file: {\"problems\": [paths...]}")->required();
  scan->add_option("--p-list", p_list, "Comma separated p values (< 0)");
  scan->add_option("--lambda-list", lambda_list, "Comma separated lambda values in (0, 1]; fractions allowed");
  scan->add_option("--iters", iters, "Iterations per run");
  scan->add_option("--output", output, "Also write the table to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };

  if (*solve) return cmd_solve(problem, {opt(trace), opt(summary), support_tol}, std::cout, std::cerr);
  if (*certify)
    return cmd_certify(problem, weights, delta_opt->count() ? std::optional<double>(delta) : std::nullopt, std::cout,
                       std::cerr);
  if (*audit) return cmd_audit(problem, {chain, opt(summary), opt(trace)}, std::cout, std::cerr);
  return guarded(std::cerr, [&] {
    ScanOptions so;
    so.p_values = parse_number_list(p_list, "--p-list");
    so.lambda_values = parse_number_list(lambda_list, "--lambda-list");
    so.iters = iters;
    so.output_path = opt(output);
    return cmd_scan(family, so, std::cout, std::cerr);
  });
}
