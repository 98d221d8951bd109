#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "refpts/sim.hpp"

namespace refpts::cli {

/// Command-line overrides applied on top of a parsed scenario config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> fps;
  std::optional<double> tau_d;
  std::optional<double> lambda;
  std::optional<std::uint64_t> k;
  std::optional<std::string> attrs;  // p | pv | ps | pvs
  std::optional<double> fn_rate;     // applied to all sender detectors
  std::optional<double> fp_rate;
  std::optional<std::uint64_t> duration;
  std::optional<std::uint64_t> points;  // query capacity
};

void apply_overrides(sim::ScenarioConfig& cfg, const Overrides& overrides);
sim::ScenarioConfig load_config(const std::string& config_path, const Overrides& overrides);

struct RunPaths {
  std::string report;  // empty = skip
  std::string events;
  std::string csv;
};

/// Executes the scenario and writes the report (plus optional event log and
/// per-frame CSV). Returns 0 on success, nonzero with a diagnostic on config
/// or IO errors.
int cmd_run(const std::string& config_path, const Overrides& overrides,
            const RunPaths& paths, std::ostream& out, std::ostream& err);

struct SweepSpec {
  std::string config_path;
  Overrides base;
  std::vector<double> fn_rates;
  std::vector<double> fp_rates;
  std::vector<std::uint64_t> k_values;
};

/// Runs every grid cell with a sub-seed derived from (master seed, cell
/// index) and emits one CSV row per cell. Failures are reported per cell and
/// do not stop the sweep; the exit code is nonzero if any cell failed.
int cmd_sweep(const SweepSpec& spec, const std::string& out_csv, std::ostream& out,
              std::ostream& err);

/// Payload / bandwidth comparison table: the two dense-fusion baselines and
/// the four reference-point variants at the given frame rate.
int cmd_bandwidth_table(double fps, std::ostream& out);

/// Decodes a serialized message (binary file, or hex text with hex_input) and
/// prints the parsed header, records, and a hex dump.
int cmd_decode(const std::string& path, bool hex_input, std::ostream& out, std::ostream& err);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string fingerprint_hex(const std::string& text);

/// KiB rendering used by the bandwidth table (1 KB = 1024 B).
std::string format_kib(double bytes, int decimals = 1);

}  // namespace refpts::cli
