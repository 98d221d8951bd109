#include "refpts/harness.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <sstream>

#include "refpts/io.hpp"

namespace refpts::cli {

void apply_overrides(sim::ScenarioConfig& cfg, const Overrides& overrides) {
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.fps) cfg.channel.fps = *overrides.fps;
  if (overrides.tau_d) cfg.fusion.tau_d = *overrides.tau_d;
  if (overrides.duration) cfg.duration_frames = *overrides.duration;
  if (overrides.points) cfg.query_capacity = *overrides.points;
  if (overrides.lambda || overrides.k) {
    QueryFusionConfig qf = cfg.query_fusion.value_or(QueryFusionConfig{});
    if (overrides.lambda) qf.lambda = *overrides.lambda;
    if (overrides.k) qf.k = *overrides.k;
    cfg.query_fusion = qf;
  }
  if (overrides.attrs) {
    const std::string& attrs = *overrides.attrs;
    if (attrs.empty() || attrs[0] != 'p' ||
        attrs.find_first_not_of("pvs") != std::string::npos) {
      throw std::invalid_argument("overrides: --attrs must be one of p, pv, ps, pvs");
    }
    cfg.wire_attrs.velocity = attrs.find('v') != std::string::npos;
    cfg.wire_attrs.size = attrs.find('s') != std::string::npos;
    cfg.wire_attrs.confidence = false;  // the pure P/V/S payload variants
    cfg.fusion.use_velocity = cfg.wire_attrs.velocity;
    cfg.fusion.use_size = cfg.wire_attrs.size;
  }
  if (overrides.fn_rate || overrides.fp_rate) {
    for (sim::AgentSpec& agent : cfg.agents) {
      if (agent.is_ego) continue;
      if (overrides.fn_rate) agent.detector.fn_rate = *overrides.fn_rate;
      if (overrides.fp_rate) agent.detector.fp_rate = *overrides.fp_rate;
    }
  }
}

sim::ScenarioConfig load_config(const std::string& config_path, const Overrides& overrides) {
  sim::ScenarioConfig cfg = io::load_scenario_config(config_path);
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

int cmd_run(const std::string& config_path, const Overrides& overrides,
            const RunPaths& paths, std::ostream& out, std::ostream& err) {
  try {
    const sim::ScenarioConfig cfg = load_config(config_path, overrides);
    std::vector<track::FrameEvents> events;
    const sim::ScenarioReport report = sim::run_scenario(cfg, &events);

    if (!paths.report.empty()) io::save_text(paths.report, io::report_to_json(report));
    if (!paths.events.empty()) io::save_text(paths.events, io::events_to_jsonl(events));
    if (!paths.csv.empty()) io::save_text(paths.csv, io::metrics_csv(report));

    out << "frames: " << cfg.duration_frames
        << "  fused_detection_recall: " << report.metrics.fused_detection_recall
        << "  recall: " << report.metrics.recall
        << "  precision: " << report.metrics.precision
        << "  id_switches: " << report.metrics.id_switches << '\n';
    out << "payload/frame: " << report.bandwidth.mean_payload_bytes_per_frame
        << " B mean, max " << report.bandwidth.max_payload_bytes_per_frame << " B ("
        << format_kib(static_cast<double>(report.bandwidth.max_payload_bytes_per_frame))
        << ")  bandwidth: " << format_kib(report.bandwidth.payload_bytes_per_second)
        << "/s\n";
    if (!paths.report.empty()) out << "report: " << paths.report << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "run: " << e.what() << '\n';
    return 1;
  }
}

namespace {

struct SweepCell {
  std::size_t index = 0;
  std::optional<double> fn_rate;
  std::optional<double> fp_rate;
  std::optional<std::uint64_t> k;
};

std::vector<SweepCell> expand_grid(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  if (spec.fn_rates.empty() && spec.fp_rates.empty() && spec.k_values.empty()) {
    return cells;  // empty grid, empty table
  }
  const auto fn = spec.fn_rates.empty() ? std::vector<double>{-1.0} : spec.fn_rates;
  const auto fp = spec.fp_rates.empty() ? std::vector<double>{-1.0} : spec.fp_rates;
  const auto ks = spec.k_values.empty() ? std::vector<std::uint64_t>{UINT64_MAX}
                                        : spec.k_values;
  std::size_t index = 0;
  for (double f1 : fn) {
    for (double f2 : fp) {
      for (std::uint64_t k : ks) {
        SweepCell cell;
        cell.index = index++;
        if (f1 >= 0.0) cell.fn_rate = f1;
        if (f2 >= 0.0) cell.fp_rate = f2;
        if (k != UINT64_MAX) cell.k = k;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

std::string opt_to_string(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << *v;
  return s.str();
}

}  // namespace

int cmd_sweep(const SweepSpec& spec, const std::string& out_csv, std::ostream& out,
              std::ostream& err) {
  std::ostringstream csv;
  csv << "cell,fn_rate,fp_rate,k,seed,recall,precision,id_switches,"
         "mean_track_persistence,fused_detection_recall,"
         "mean_payload_bytes_per_frame,payload_bytes_per_second,"
         "max_payload_bytes_per_frame,mean_effective_points,status\n";

  int failures = 0;
  std::uint64_t master_seed = 0;
  std::vector<SweepCell> cells;
  try {
    const sim::ScenarioConfig base = load_config(spec.config_path, spec.base);
    master_seed = base.seed;
    cells = expand_grid(spec);
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << '\n';
    return 1;
  }

  for (const SweepCell& cell : cells) {
    Overrides overrides = spec.base;
    if (cell.fn_rate) overrides.fn_rate = cell.fn_rate;
    if (cell.fp_rate) overrides.fp_rate = cell.fp_rate;
    if (cell.k) overrides.k = cell.k;
    const std::uint64_t cell_seed = mix_seed(master_seed, cell.index);
    overrides.seed = cell_seed;

    csv << cell.index << ',' << opt_to_string(cell.fn_rate) << ','
        << opt_to_string(cell.fp_rate) << ',' << (cell.k ? std::to_string(*cell.k) : "")
        << ',' << cell_seed << ',';
    try {
      const sim::ScenarioConfig cfg = load_config(spec.config_path, overrides);
      const sim::ScenarioReport report = sim::run_scenario(cfg);
      double mean_effective = 0.0;
      if (!report.per_frame.empty()) {
        std::uint64_t total = 0;
        for (const sim::FrameStats& fs : report.per_frame) total += fs.transmitted_points;
        mean_effective = static_cast<double>(total) / report.per_frame.size();
      }
      csv << report.metrics.recall << ',' << report.metrics.precision << ','
          << report.metrics.id_switches << ',' << report.metrics.mean_track_persistence
          << ',' << report.metrics.fused_detection_recall << ','
          << report.bandwidth.mean_payload_bytes_per_frame << ','
          << report.bandwidth.payload_bytes_per_second << ','
          << report.bandwidth.max_payload_bytes_per_frame << ',' << mean_effective
          << ",ok\n";
    } catch (const std::exception& e) {
      ++failures;
      csv << ",,,,,,,,,error: " << e.what() << '\n';
      err << "sweep: cell " << cell.index << " failed: " << e.what() << '\n';
    }
  }

  const std::string table = csv.str();
  if (out_csv.empty()) {
    out << table;
  } else {
    try {
      io::save_text(out_csv, table);
      out << "sweep table: " << out_csv << " (" << cells.size() << " cells)\n";
    } catch (const std::exception& e) {
      err << "sweep: " << e.what() << '\n';
      return 1;
    }
  }
  return failures == 0 ? 0 : 2;
}

std::string format_kib(double bytes, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f KB", decimals, bytes / 1024.0);
  return buf;
}

int cmd_bandwidth_table(double fps, std::ostream& out) {
  const wire::BaselineTable baselines = wire::baseline_payloads();

  struct Row {
    std::string name;
    double payload_bytes;
    double bandwidth_bytes;
  };
  std::vector<Row> rows;
  // Baseline bandwidth columns are reported figures at 5 FPS; at any other
  // rate they are recomputed from the payload.
  for (const wire::BaselinePayload& b :
       {baselines.bev_feature_fusion, baselines.full_query_fusion}) {
    const double bandwidth = (fps == 5.0) ? b.bandwidth_bytes_per_s
                                          : wire::bandwidth_at_fps(
                                                static_cast<double>(b.payload_bytes_per_frame),
                                                fps);
    rows.push_back({b.name, static_cast<double>(b.payload_bytes_per_frame), bandwidth});
  }

  const struct {
    const char* label;
    bool velocity;
    bool size;
  } variants[] = {
      {"Reference points (P)", false, false},
      {"Reference points (P+V)", true, false},
      {"Reference points (P+S)", false, true},
      {"Reference points (P+V+S)", true, true},
  };
  for (const auto& v : variants) {
    wire::PayloadFlags flags;
    flags.has_velocity = v.velocity;
    flags.has_size = v.size;
    const auto payload =
        static_cast<double>(wire::payload_bytes(kDefaultQueryCapacity, flags));
    rows.push_back({v.label, payload, wire::bandwidth_at_fps(payload, fps)});
  }

  out << std::left << std::setw(28) << "fusion method" << std::right << std::setw(18)
      << "payload/frame" << std::setw(18) << "bandwidth" << "\n";
  for (const Row& r : rows) {
    out << std::left << std::setw(28) << r.name << std::right << std::setw(18)
        << format_kib(r.payload_bytes) << std::setw(18)
        << format_kib(r.bandwidth_bytes) + "/s" << "\n";
  }
  return 0;
}

namespace {

std::vector<std::uint8_t> parse_hex(const std::string& text) {
  std::vector<std::uint8_t> bytes;
  int hi = -1;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    int v;
    if (c >= '0' && c <= '9') {
      v = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      v = c - 'a' + 10;
    } else if (c >= 'A' && c <= 'F') {
      v = c - 'A' + 10;
    } else {
      throw std::invalid_argument("decode: invalid hex character");
    }
    if (hi < 0) {
      hi = v;
    } else {
      bytes.push_back(static_cast<std::uint8_t>((hi << 4) | v));
      hi = -1;
    }
  }
  if (hi >= 0) {
    throw std::invalid_argument("decode: odd number of hex digits");
  }
  return bytes;
}

void hex_dump(std::span<const std::uint8_t> bytes, std::ostream& out) {
  char line[16];
  for (std::size_t i = 0; i < bytes.size(); i += 16) {
    std::snprintf(line, sizeof(line), "%06zx  ", i);
    out << line;
    for (std::size_t j = i; j < std::min(bytes.size(), i + 16); ++j) {
      std::snprintf(line, sizeof(line), "%02x ", bytes[j]);
      out << line;
    }
    out << '\n';
  }
}

}  // namespace

int cmd_decode(const std::string& path, bool hex_input, std::ostream& out,
               std::ostream& err) {
  try {
    const std::string raw = io::load_text(path);
    std::vector<std::uint8_t> bytes;
    if (hex_input) {
      bytes = parse_hex(raw);
    } else {
      bytes.assign(raw.begin(), raw.end());
    }
    const wire::WireMessage msg = wire::decode(bytes);
    out << "agent_id: " << msg.agent_id << "  frame_index: " << msg.frame_index
        << "  timestamp_us: " << msg.timestamp_us << '\n';
    out << "flags: velocity=" << msg.flags.has_velocity << " size=" << msg.flags.has_size
        << " confidence=" << msg.flags.has_confidence
        << " semantics=" << msg.flags.has_semantics << "  embed_dim: " << msg.embed_dim
        << "  records: " << msg.records.size() << '\n';
    out << "record width: " << wire::record_width(msg.flags, msg.embed_dim)
        << " B  payload: " << wire::payload_bytes(msg.records.size(), msg.flags, msg.embed_dim)
        << " B (+" << wire::kHeaderBytes << " B header)\n";
    for (std::size_t i = 0; i < msg.records.size(); ++i) {
      const wire::WireRecord& r = msg.records[i];
      out << "  [" << i << "] p=(" << r.position[0] << ", " << r.position[1] << ", "
          << r.position[2] << ")";
      if (msg.flags.has_velocity) {
        out << " v=(" << r.velocity[0] << ", " << r.velocity[1] << ")";
      }
      if (msg.flags.has_size) {
        out << " s=(" << r.size[0] << ", " << r.size[1] << ", " << r.size[2] << ")";
      }
      if (msg.flags.has_confidence) out << " c=" << r.confidence;
      if (msg.flags.has_semantics) out << " sem[" << r.semantics.size() << "]";
      out << '\n';
    }
    out << "hex:\n";
    hex_dump(bytes, out);
    return 0;
  } catch (const std::exception& e) {
    err << "decode: " << e.what() << '\n';
    return 1;
  }
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::string fingerprint_hex(const std::string& text) {
  const std::uint64_t h = fnv1a64(
      {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace refpts::cli
