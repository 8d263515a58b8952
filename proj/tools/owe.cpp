// Command-line driver: one subcommand per experiment.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "owe/error.hpp"
#include "owe/scenario.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2, kUnstable = 3 };

struct Args {
  std::string scenario;
  std::string out = "out";
  std::string format = "both";
  std::optional<std::uint64_t> seed;
  std::optional<double> margin;
  bool quiet = false;
};

int run(const std::string& sub, const Args& a) {
  owe::Scenario s = owe::load_scenario(a.scenario);
  s.kind = owe::parse_kind(sub);
  if (a.seed) s.optimizer.schedule.rng_seed = *a.seed;
  if (a.margin) {
    s.numerics.margin = *a.margin;
    s.optimizer.bounds.margin = *a.margin;
  }
  s.validate();
  const owe::ReportFormat fmt = a.format == "csv" ? owe::ReportFormat::Csv
                                : a.format == "text" ? owe::ReportFormat::Text
                                                     : owe::ReportFormat::Both;
  const owe::RunReport r = owe::run_scenario(s);
  const auto files = owe::emit_report(r, a.out, fmt);
  if (!a.quiet) {
    for (const auto& line : r.summary) std::cout << line << "\n";
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical ether simulator"};
  app.set_version_flag("--version", owe::kToolVersion);
  app.require_subcommand(1);
  Args args;
  std::string chosen;

  std::string defaults_kind;
  auto* emit = app.add_subcommand("defaults", "Print a fully defaulted scenario for an experiment");
  emit->add_option("experiment", defaults_kind, "Experiment kind")->required();

  for (const char* name : {"coverage", "single-bss", "multi-bss", "sweep", "blockage", "probe"}) {
    auto* sub = app.add_subcommand(name, fmt::format("Run the {} experiment", name));
    sub->add_option("--scenario,-s", args.scenario, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", args.out, "Output directory");
    sub->add_option("--format", args.format, "csv, text or both")->check(CLI::IsMember({"csv", "text", "both"}));
    sub->add_option("--seed", args.seed, "Override the optimizer RNG seed");
    sub->add_option("--margin", args.margin, "Override the stability margin");
    sub->add_flag("--quiet,-q", args.quiet, "Suppress the summary");
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (emit->parsed()) {
      owe::Scenario s;
      s.kind = owe::parse_kind(defaults_kind);
      std::cout << owe::emit_scenario(s);
      return kOk;
    }
    return run(chosen, args);
  } catch (const owe::ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return kInvalid;
  } catch (const owe::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const owe::InstabilityError& e) {
    std::cerr << "unstable: " << e.what() << "\n";
    return kUnstable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
