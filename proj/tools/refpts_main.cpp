#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "refpts/harness.hpp"

namespace {

struct RunArgs {
  std::string config;
  refpts::cli::Overrides overrides;
  refpts::cli::RunPaths paths{"scenario_report.json", "", ""};
};

void add_override_flags(CLI::App* cmd, refpts::cli::Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed override");
  cmd->add_option("--fps", o.fps, "Frame rate override");
  cmd->add_option("--tau-d", o.tau_d, "Association gate override, meters");
  cmd->add_option("--lambda", o.lambda, "Query fusion scaling coefficient");
  cmd->add_option("--k", o.k, "Top-K query transmission count");
  cmd->add_option("--attrs", o.attrs, "Transmitted attributes: p, pv, ps or pvs");
  cmd->add_option("--fn-rate", o.fn_rate, "Sender false-negative rate override");
  cmd->add_option("--fp-rate", o.fp_rate, "Sender false-positive rate override");
  cmd->add_option("--duration", o.duration, "Duration override, frames");
  cmd->add_option("--points", o.points, "Query capacity (max points per frame)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-point cooperative perception harness"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Execute a scenario and write its report");
  run->add_option("--config", run_args.config, "Scenario config (JSON)")->required();
  add_override_flags(run, run_args.overrides);
  run->add_option("--out", run_args.paths.report, "Report output path");
  run->add_option("--events", run_args.paths.events, "Tracker event log output (JSONL)");
  run->add_option("--csv", run_args.paths.csv, "Per-frame metric series output (CSV)");

  refpts::cli::SweepSpec sweep_spec;
  std::string sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a parameter grid, one report row per cell");
  sweep->add_option("--config", sweep_spec.config_path, "Base scenario config (JSON)")
      ->required();
  add_override_flags(sweep, sweep_spec.base);
  sweep->add_option("--fn-rates", sweep_spec.fn_rates, "FN-rate grid values")
      ->delimiter(',');
  sweep->add_option("--fp-rates", sweep_spec.fp_rates, "FP-rate grid values")
      ->delimiter(',');
  sweep->add_option("--k-values", sweep_spec.k_values, "Top-K grid values")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV output path (stdout when omitted)");

  double table_fps = 5.0;
  CLI::App* table =
      app.add_subcommand("bandwidth-table", "Print the payload/bandwidth comparison table");
  table->add_option("--fps", table_fps, "Frame rate, frames per second");

  std::string decode_in;
  bool decode_hex = false;
  CLI::App* decode = app.add_subcommand("decode", "Decode and hex-dump a wire message");
  decode->add_option("--in", decode_in, "Message file")->required();
  decode->add_flag("--hex", decode_hex, "Treat the input file as hex text");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return refpts::cli::cmd_run(run_args.config, run_args.overrides, run_args.paths,
                                std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    return refpts::cli::cmd_sweep(sweep_spec, sweep_out, std::cout, std::cerr);
  }
  if (table->parsed()) {
    return refpts::cli::cmd_bandwidth_table(table_fps, std::cout);
  }
  if (decode->parsed()) {
    return refpts::cli::cmd_decode(decode_in, decode_hex, std::cout, std::cerr);
  }
  return 1;
}
