// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "chaincraft/suites.hpp"

using namespace chaincraft;

namespace {

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--pattern", c.pattern, "pattern JSON file (default depends on the command)");
  sub->add_option("--seed", c.seed, "seed of every random draw")->capture_default_str();
  sub->add_option("--trials", c.trials, "random points / trials / spaces");
  sub->add_option("--samples-per-level", c.samples_per_level, "sampled witnesses per level for diagonal blocks")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--h-max", c.h_max, "last chain level")->capture_default_str()->check(CLI::Range(0, 60));
  sub->add_option("--out", c.out, "report path (default stdout)");
  sub->add_option("--format", c.format, "report format")->capture_default_str()->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--dim", c.dim, "dimension of the default pattern");
  sub->add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str();
}

int emit(const RunConfig& c, const Report& r, const McSummary* batch) {
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) {
      std::cerr << "chaincraft: cannot write " << c.out << "\n";
      return 3;
    }
  }
  std::ostream& os = c.out.empty() ? std::cout : file;
  if (c.format == "csv") {
    if (batch)
      write_batch_csv(os, batch->batch);
    else
      write_report_csv(os, r);
  } else {
    os << report_json(r).dump(2) << "\n";
  }
  const int code = r.exit_code();
  if (code == 3)
    std::cerr << r.command << ": precondition failed: " << r.precondition << "\n";
  else if (const Check* f = r.first_failure())
    std::cerr << r.command << ": FAIL " << f->name << " observed " << f->observed << " bound " << f->bound
              << (f->detail.empty() ? "" : " (" + f->detail + ")") << "\n";
  else
    std::cerr << r.command << ": pass (" << r.checks.size() << " checks)\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaincraft: explicit chaining witnesses for Gaussian matrix norms"};
  app.require_subcommand(1);
  RunConfig c;

  auto* diag = app.add_subcommand("verify-diagonal", "diagonal series over a point battery");
  add_common(diag, c);
  diag->add_flag("--inject-fault", c.inject_fault, "replace witnesses from level 3 on by e_1 (tests the failure path)");

  auto* full = app.add_subcommand("verify-full", "end-to-end series and internal budgets");
  add_common(full, c);
  full->add_flag("--zoo", c.zoo, "run the built-in seeded pattern zoo instead of --pattern");

  auto* counts = app.add_subcommand("counts", "sizes of the dyadic families");
  add_common(counts, c);
  auto* dec = app.add_subcommand("decompose", "split a pattern into far and block-diagonal parts");
  add_common(dec, c);
  auto* mc = app.add_subcommand("mc", "Monte-Carlo operator and column norms");
  add_common(mc, c);
  auto* oracle = app.add_subcommand("oracle", "exact gamma_2 on a tiny metric space");
  add_common(oracle, c);
  oracle->add_option("--n", c.n, "equidistant space size")->capture_default_str();
  oracle->add_option("--delta", c.delta, "equidistant spacing")->capture_default_str();
  oracle->add_option("--metric", c.metric, "metric JSON {\"n\": k, \"d\": k x k rows}");

  CLI11_PARSE(app, argc, argv);

  c.command = app.get_subcommands().front()->get_name();
  try {
    if (c.command == "mc") {
      McSummary batch;
      const Report r = run_mc(c, &batch);
      return emit(c, r, r.precondition.empty() ? &batch : nullptr);
    }
    Report r;
    if (c.command == "verify-diagonal") r = run_verify_diagonal(c);
    if (c.command == "verify-full") r = run_verify_full(c);
    if (c.command == "counts") r = run_counts(c);
    if (c.command == "decompose") r = run_decompose(c);
    if (c.command == "oracle") r = run_oracle(c);
    return emit(c, r, nullptr);
  } catch (const std::exception& e) {
    std::cerr << "chaincraft: " << e.what() << "\n";
    return 3;
  }
}
