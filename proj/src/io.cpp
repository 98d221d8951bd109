#include "refpts/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace refpts::io {

using nlohmann::json;

namespace {

json rect_to_json(const BevRect& r) {
  return json{{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max}};
}

BevRect rect_from_json(const json& j, const BevRect& fallback) {
  BevRect r = fallback;
  r.x_min = j.value("x_min", r.x_min);
  r.x_max = j.value("x_max", r.x_max);
  r.y_min = j.value("y_min", r.y_min);
  r.y_max = j.value("y_max", r.y_max);
  return r;
}

const char* policy_name(MatchingPolicy p) {
  return p == MatchingPolicy::greedy_distance ? "greedy_distance" : "optimal_assignment";
}

MatchingPolicy policy_from_name(const std::string& name) {
  if (name == "greedy_distance") return MatchingPolicy::greedy_distance;
  if (name == "optimal_assignment") return MatchingPolicy::optimal_assignment;
  throw std::invalid_argument("config: unknown matching_policy '" + name + "'");
}

json fusion_to_json(const FusionConfig& f) {
  return json{{"tau_d", f.tau_d},
              {"visible_range", rect_to_json(f.visible_range)},
              {"use_velocity", f.use_velocity},
              {"use_size", f.use_size},
              {"matching_policy", policy_name(f.matching_policy)},
              {"planar_distance", f.planar_distance}};
}

FusionConfig fusion_from_json(const json& j) {
  FusionConfig f;
  f.tau_d = j.value("tau_d", f.tau_d);
  if (j.contains("visible_range")) {
    f.visible_range = rect_from_json(j.at("visible_range"), f.visible_range);
  }
  f.use_velocity = j.value("use_velocity", f.use_velocity);
  f.use_size = j.value("use_size", f.use_size);
  if (j.contains("matching_policy")) {
    f.matching_policy = policy_from_name(j.at("matching_policy").get<std::string>());
  }
  f.planar_distance = j.value("planar_distance", f.planar_distance);
  return f;
}

json detector_to_json(const sim::DetectorProfile& d) {
  json misses = json::array();
  for (const sim::ForcedMiss& m : d.forced_misses) {
    misses.push_back(json{{"gt_id", m.gt_id}, {"from_frame", m.from_frame},
                          {"to_frame", m.to_frame}});
  }
  return json{{"fov", rect_to_json(d.fov_range)},
              {"position_noise_sigma", d.position_noise_sigma},
              {"fn_rate", d.fn_rate},
              {"fp_rate", d.fp_rate},
              {"tp_confidence", {d.tp_confidence_range[0], d.tp_confidence_range[1]}},
              {"fp_confidence", {d.fp_confidence_range[0], d.fp_confidence_range[1]}},
              {"provides_velocity", d.provides_velocity},
              {"provides_size", d.provides_size},
              {"forced_misses", misses}};
}

sim::DetectorProfile detector_from_json(const json& j) {
  sim::DetectorProfile d;
  if (j.contains("fov")) d.fov_range = rect_from_json(j.at("fov"), d.fov_range);
  d.position_noise_sigma = j.value("position_noise_sigma", d.position_noise_sigma);
  d.fn_rate = j.value("fn_rate", d.fn_rate);
  d.fp_rate = j.value("fp_rate", d.fp_rate);
  if (j.contains("tp_confidence")) {
    d.tp_confidence_range = {j.at("tp_confidence").at(0).get<double>(),
                             j.at("tp_confidence").at(1).get<double>()};
  }
  if (j.contains("fp_confidence")) {
    d.fp_confidence_range = {j.at("fp_confidence").at(0).get<double>(),
                             j.at("fp_confidence").at(1).get<double>()};
  }
  d.provides_velocity = j.value("provides_velocity", d.provides_velocity);
  d.provides_size = j.value("provides_size", d.provides_size);
  if (j.contains("forced_misses")) {
    for (const json& m : j.at("forced_misses")) {
      d.forced_misses.push_back({m.at("gt_id").get<std::uint64_t>(),
                                 m.at("from_frame").get<std::uint64_t>(),
                                 m.at("to_frame").get<std::uint64_t>()});
    }
  }
  return d;
}

json agent_to_json(const sim::AgentSpec& a) {
  return json{{"agent_id", a.agent_id},
              {"ego", a.is_ego},
              {"start", {{"x", a.start.x}, {"y", a.start.y}, {"z", a.start.z}}},
              {"yaw", a.yaw},
              {"velocity", {{"vx", a.velocity.vx}, {"vy", a.velocity.vy}}},
              {"detector", detector_to_json(a.detector)}};
}

sim::AgentSpec agent_from_json(const json& j) {
  sim::AgentSpec a;
  a.agent_id = j.value("agent_id", a.agent_id);
  a.is_ego = j.value("ego", a.is_ego);
  if (j.contains("start")) {
    const json& s = j.at("start");
    a.start = {s.value("x", 0.0), s.value("y", 0.0), s.value("z", 0.0)};
  }
  a.yaw = j.value("yaw", a.yaw);
  if (j.contains("velocity")) {
    const json& v = j.at("velocity");
    a.velocity = {v.value("vx", 0.0), v.value("vy", 0.0)};
  }
  if (j.contains("detector")) a.detector = detector_from_json(j.at("detector"));
  return a;
}

json gt_object_to_json(const sim::GroundTruthObject& o) {
  return json{{"gt_id", o.gt_id},
              {"position", {{"x", o.position.x}, {"y", o.position.y}, {"z", o.position.z}}},
              {"velocity", {{"vx", o.velocity.vx}, {"vy", o.velocity.vy}}},
              {"size",
               {{"length", o.size.length}, {"width", o.size.width}, {"height", o.size.height}}},
              {"class_label", o.class_label}};
}

sim::GroundTruthObject gt_object_from_json(const json& j) {
  sim::GroundTruthObject o;
  o.gt_id = j.at("gt_id").get<std::uint64_t>();
  if (j.contains("position")) {
    const json& p = j.at("position");
    o.position = {p.value("x", 0.0), p.value("y", 0.0), p.value("z", 0.0)};
  }
  if (j.contains("velocity")) {
    const json& v = j.at("velocity");
    o.velocity = {v.value("vx", 0.0), v.value("vy", 0.0)};
  }
  if (j.contains("size")) {
    const json& s = j.at("size");
    o.size = {s.value("length", o.size.length), s.value("width", o.size.width),
              s.value("height", o.size.height)};
  }
  o.class_label = j.value("class_label", 0);
  return o;
}

json config_to_json_obj(const sim::ScenarioConfig& cfg) {
  json agents = json::array();
  for (const sim::AgentSpec& a : cfg.agents) agents.push_back(agent_to_json(a));
  json explicit_objects = json::array();
  for (const sim::GroundTruthObject& o : cfg.world.explicit_objects) {
    explicit_objects.push_back(gt_object_to_json(o));
  }
  json j{{"seed", cfg.seed},
         {"duration_frames", cfg.duration_frames},
         {"query_capacity", cfg.query_capacity},
         {"world",
          {{"object_count", cfg.world.object_count},
           {"area", rect_to_json(cfg.world.area)},
           {"speed_min", cfg.world.speed_min},
           {"speed_max", cfg.world.speed_max},
           {"class_count", cfg.world.class_count},
           {"objects", explicit_objects}}},
         {"agents", agents},
         {"fusion", fusion_to_json(cfg.fusion)},
         {"channel",
          {{"drop_probability", cfg.channel.drop_probability},
           {"latency_frames", cfg.channel.latency_frames},
           {"fps", cfg.channel.fps}}},
         {"wire",
          {{"velocity", cfg.wire_attrs.velocity},
           {"size", cfg.wire_attrs.size},
           {"confidence", cfg.wire_attrs.confidence}}},
         {"tracker",
          {{"gate_distance", cfg.tracker.gate_distance},
           {"max_misses", cfg.tracker.max_misses},
           {"confidence_decay", cfg.tracker.confidence_decay}}}};
  if (cfg.query_fusion) {
    j["query_fusion"] = json{{"k", cfg.query_fusion->k},
                             {"lambda", cfg.query_fusion->lambda},
                             {"embed_dim", cfg.query_fusion->embed_dim}};
  }
  return j;
}

sim::ScenarioConfig config_from_json_obj(const json& j) {
  sim::ScenarioConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.duration_frames = j.value("duration_frames", cfg.duration_frames);
  cfg.query_capacity = j.value("query_capacity", cfg.query_capacity);
  if (j.contains("world")) {
    const json& w = j.at("world");
    cfg.world.object_count = w.value("object_count", cfg.world.object_count);
    if (w.contains("area")) cfg.world.area = rect_from_json(w.at("area"), cfg.world.area);
    cfg.world.speed_min = w.value("speed_min", cfg.world.speed_min);
    cfg.world.speed_max = w.value("speed_max", cfg.world.speed_max);
    cfg.world.class_count = w.value("class_count", cfg.world.class_count);
    if (w.contains("objects")) {
      for (const json& o : w.at("objects")) {
        cfg.world.explicit_objects.push_back(gt_object_from_json(o));
      }
    }
  }
  if (j.contains("agents")) {
    cfg.agents.clear();
    for (const json& a : j.at("agents")) cfg.agents.push_back(agent_from_json(a));
  }
  if (j.contains("fusion")) cfg.fusion = fusion_from_json(j.at("fusion"));
  if (j.contains("query_fusion") && !j.at("query_fusion").is_null()) {
    const json& q = j.at("query_fusion");
    QueryFusionConfig qf;
    qf.k = q.value("k", qf.k);
    qf.lambda = q.value("lambda", qf.lambda);
    qf.embed_dim = q.value("embed_dim", qf.embed_dim);
    cfg.query_fusion = qf;
  }
  if (j.contains("channel")) {
    const json& c = j.at("channel");
    cfg.channel.drop_probability = c.value("drop_probability", cfg.channel.drop_probability);
    cfg.channel.latency_frames = c.value("latency_frames", cfg.channel.latency_frames);
    cfg.channel.fps = c.value("fps", cfg.channel.fps);
  }
  if (j.contains("wire")) {
    const json& w = j.at("wire");
    cfg.wire_attrs.velocity = w.value("velocity", cfg.wire_attrs.velocity);
    cfg.wire_attrs.size = w.value("size", cfg.wire_attrs.size);
    cfg.wire_attrs.confidence = w.value("confidence", cfg.wire_attrs.confidence);
  }
  if (j.contains("tracker")) {
    const json& t = j.at("tracker");
    cfg.tracker.gate_distance = t.value("gate_distance", cfg.tracker.gate_distance);
    cfg.tracker.max_misses = t.value("max_misses", cfg.tracker.max_misses);
    cfg.tracker.confidence_decay = t.value("confidence_decay", cfg.tracker.confidence_decay);
  }
  return cfg;
}

json frame_stats_to_json(const sim::FrameStats& fs) {
  return json{{"frame", fs.frame},
              {"gt_visible", fs.gt_visible},
              {"ego_detections", fs.ego_detections},
              {"fused_points", fs.fused_points},
              {"detection_matched_gt", fs.detection_matched_gt},
              {"tracks_alive", fs.tracks_alive},
              {"transmitted_points", fs.transmitted_points},
              {"sent_payload_bytes", fs.sent_payload_bytes},
              {"valid_sender_detections", fs.valid_sender_detections},
              {"valid_transmitted", fs.valid_transmitted}};
}

sim::FrameStats frame_stats_from_json(const json& j) {
  sim::FrameStats fs;
  fs.frame = j.at("frame").get<std::uint64_t>();
  fs.gt_visible = j.at("gt_visible").get<std::uint64_t>();
  fs.ego_detections = j.at("ego_detections").get<std::uint64_t>();
  fs.fused_points = j.at("fused_points").get<std::uint64_t>();
  fs.detection_matched_gt = j.at("detection_matched_gt").get<std::uint64_t>();
  fs.tracks_alive = j.at("tracks_alive").get<std::uint64_t>();
  fs.transmitted_points = j.at("transmitted_points").get<std::uint64_t>();
  fs.sent_payload_bytes = j.at("sent_payload_bytes").get<std::uint64_t>();
  fs.valid_sender_detections = j.at("valid_sender_detections").get<std::uint64_t>();
  fs.valid_transmitted = j.at("valid_transmitted").get<std::uint64_t>();
  return fs;
}

}  // namespace

sim::ScenarioConfig parse_scenario_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  try {
    return config_from_json_obj(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad field: ") + e.what());
  }
}

sim::ScenarioConfig load_scenario_config(const std::string& path) {
  return parse_scenario_config(load_text(path));
}

std::string scenario_config_to_json(const sim::ScenarioConfig& cfg, int indent) {
  return config_to_json_obj(cfg).dump(indent) + "\n";
}

std::string report_to_json(const sim::ScenarioReport& report, int indent) {
  json per_frame = json::array();
  for (const sim::FrameStats& fs : report.per_frame) per_frame.push_back(frame_stats_to_json(fs));

  json histogram = json::object();
  for (const auto& [count, frames] : report.effective_points_histogram) {
    histogram[std::to_string(count)] = frames;
  }
  json per_object = json::object();
  for (const auto& [gt_id, stats] : report.per_object) {
    per_object[std::to_string(gt_id)] = json{{"matched_frames", stats.matched_frames},
                                             {"present_frames", stats.present_frames},
                                             {"id_switches", stats.id_switches},
                                             {"mean_persistence", stats.mean_persistence}};
  }

  const json j{
      {"config", config_to_json_obj(report.config)},
      {"aggregate",
       {{"recall", report.metrics.recall},
        {"precision", report.metrics.precision},
        {"id_switches", report.metrics.id_switches},
        {"mean_track_persistence", report.metrics.mean_track_persistence},
        {"fused_detection_recall", report.metrics.fused_detection_recall}}},
      {"bandwidth",
       {{"total_payload_bytes", report.bandwidth.total_payload_bytes},
        {"total_header_bytes", report.bandwidth.total_header_bytes},
        {"messages_sent", report.bandwidth.messages_sent},
        {"messages_dropped", report.bandwidth.messages_dropped},
        {"messages_delivered", report.bandwidth.messages_delivered},
        {"mean_payload_bytes_per_frame", report.bandwidth.mean_payload_bytes_per_frame},
        {"payload_bytes_per_second", report.bandwidth.payload_bytes_per_second},
        {"max_payload_bytes_per_frame", report.bandwidth.max_payload_bytes_per_frame}}},
      {"topk",
       {{"valid_total", report.topk.valid_total},
        {"valid_captured", report.topk.valid_captured},
        {"capture_ratio", report.topk.capture_ratio},
        {"mean_valid_per_frame", report.topk.mean_valid_per_frame}}},
      {"effective_points_histogram", histogram},
      {"per_object", per_object},
      {"per_frame", per_frame}};
  return j.dump(indent) + "\n";
}

sim::ScenarioReport parse_report(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report: JSON parse error: ") + e.what());
  }
  sim::ScenarioReport report;
  report.config = config_from_json_obj(j.at("config"));
  const json& agg = j.at("aggregate");
  report.metrics.recall = agg.at("recall").get<double>();
  report.metrics.precision = agg.at("precision").get<double>();
  report.metrics.id_switches = agg.at("id_switches").get<std::uint64_t>();
  report.metrics.mean_track_persistence = agg.at("mean_track_persistence").get<double>();
  report.metrics.fused_detection_recall = agg.at("fused_detection_recall").get<double>();
  const json& bw = j.at("bandwidth");
  report.bandwidth.total_payload_bytes = bw.at("total_payload_bytes").get<std::uint64_t>();
  report.bandwidth.total_header_bytes = bw.at("total_header_bytes").get<std::uint64_t>();
  report.bandwidth.messages_sent = bw.at("messages_sent").get<std::uint64_t>();
  report.bandwidth.messages_dropped = bw.at("messages_dropped").get<std::uint64_t>();
  report.bandwidth.messages_delivered = bw.at("messages_delivered").get<std::uint64_t>();
  report.bandwidth.mean_payload_bytes_per_frame =
      bw.at("mean_payload_bytes_per_frame").get<double>();
  report.bandwidth.payload_bytes_per_second = bw.at("payload_bytes_per_second").get<double>();
  report.bandwidth.max_payload_bytes_per_frame =
      bw.at("max_payload_bytes_per_frame").get<std::uint64_t>();
  const json& topk = j.at("topk");
  report.topk.valid_total = topk.at("valid_total").get<std::uint64_t>();
  report.topk.valid_captured = topk.at("valid_captured").get<std::uint64_t>();
  report.topk.capture_ratio = topk.at("capture_ratio").get<double>();
  report.topk.mean_valid_per_frame = topk.at("mean_valid_per_frame").get<double>();
  for (const auto& [key, value] : j.at("effective_points_histogram").items()) {
    report.effective_points_histogram[std::stoull(key)] = value.get<std::uint64_t>();
  }
  for (const auto& [key, value] : j.at("per_object").items()) {
    track::PerObjectStats stats;
    stats.matched_frames = value.at("matched_frames").get<std::uint64_t>();
    stats.present_frames = value.at("present_frames").get<std::uint64_t>();
    stats.id_switches = value.at("id_switches").get<std::uint64_t>();
    stats.mean_persistence = value.at("mean_persistence").get<double>();
    report.per_object[std::stoull(key)] = stats;
  }
  for (const json& fs : j.at("per_frame")) {
    report.per_frame.push_back(frame_stats_from_json(fs));
  }
  return report;
}

sim::ScenarioReport load_report(const std::string& path) {
  return parse_report(load_text(path));
}

std::string events_to_jsonl(const std::vector<track::FrameEvents>& events) {
  std::string out;
  for (const track::FrameEvents& e : events) {
    json births = json::array();
    for (const auto& b : e.births) {
      births.push_back(json{{"track_id", b.track_id},
                            {"detection", b.detection_index},
                            {"source", b.source == track::TrackSource::ego ? "ego" : "sender"}});
    }
    json matches = json::array();
    for (const auto& m : e.matches) {
      matches.push_back(json{{"track_id", m.track_id},
                             {"detection", m.detection_index},
                             {"distance", m.distance}});
    }
    const json line{{"frame", e.frame_index},
                    {"births", births},
                    {"deaths", e.deaths},
                    {"matches", matches}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string metrics_csv(const sim::ScenarioReport& report) {
  std::ostringstream out;
  out << "frame,gt_visible,ego_detections,fused_points,detection_matched_gt,"
         "tracks_alive,transmitted_points,sent_payload_bytes,"
         "valid_sender_detections,valid_transmitted\n";
  for (const sim::FrameStats& fs : report.per_frame) {
    out << fs.frame << ',' << fs.gt_visible << ',' << fs.ego_detections << ','
        << fs.fused_points << ',' << fs.detection_matched_gt << ',' << fs.tracks_alive << ','
        << fs.transmitted_points << ',' << fs.sent_payload_bytes << ','
        << fs.valid_sender_detections << ',' << fs.valid_transmitted << '\n';
  }
  return out.str();
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("io: cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::invalid_argument("io: cannot write " + path);
  }
  out << text;
  if (!out) {
    throw std::invalid_argument("io: write failed for " + path);
  }
}

}  // namespace refpts::io
