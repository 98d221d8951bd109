#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "refpts/rng.hpp"
#include "refpts/wire.hpp"

using namespace refpts;
using namespace refpts::wire;

namespace {

std::vector<std::uint8_t> read_hex_file(const std::string& name) {
  std::ifstream in(std::string(REFPTS_GOLDEN_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::vector<std::uint8_t> bytes;
  int hi = -1;
  for (char c : buf.str()) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    const int v = (c >= '0' && c <= '9') ? c - '0' : (std::toupper(c) - 'A' + 10);
    if (hi < 0) {
      hi = v;
    } else {
      bytes.push_back(static_cast<std::uint8_t>((hi << 4) | v));
      hi = -1;
    }
  }
  return bytes;
}

WireMessage canonical_header(PayloadFlags flags, std::uint16_t embed_dim = 0) {
  WireMessage msg;
  msg.flags = flags;
  msg.agent_id = 7;
  msg.frame_index = 42;
  msg.timestamp_us = 1600000;
  msg.embed_dim = embed_dim;
  return msg;
}

WireMessage random_message(Rng& rng, const PayloadFlags& flags) {
  WireMessage msg;
  msg.flags = flags;
  msg.agent_id = static_cast<std::uint32_t>(rng.next_u64());
  msg.frame_index = rng.next_u64() % 100000;
  msg.timestamp_us = rng.next_u64() % 1000000000;
  msg.embed_dim = flags.has_semantics ? static_cast<std::uint16_t>(1 + rng.next_u64() % 8) : 0;
  const std::size_t count = rng.next_u64() % 40;
  for (std::size_t i = 0; i < count; ++i) {
    WireRecord r;
    for (auto& v : r.position) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    if (flags.has_velocity) {
      for (auto& v : r.velocity) v = static_cast<float>(rng.uniform(-30.0, 30.0));
    }
    if (flags.has_size) {
      for (auto& v : r.size) v = static_cast<float>(rng.uniform(0.1, 6.0));
    }
    if (flags.has_confidence) r.confidence = static_cast<float>(rng.uniform01());
    if (flags.has_semantics) {
      r.semantics.resize(msg.embed_dim);
      for (auto& v : r.semantics) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    msg.records.push_back(std::move(r));
  }
  return msg;
}

}  // namespace

TEST_CASE("record width and payload arithmetic") {
  const PayloadFlags p{};
  const PayloadFlags pv{.has_velocity = true};
  const PayloadFlags ps{.has_size = true};
  const PayloadFlags pvs{.has_velocity = true, .has_size = true};
  const PayloadFlags pvsc{.has_velocity = true, .has_size = true, .has_confidence = true};

  CHECK(record_width(p, 0) == 12);
  CHECK(record_width(pv, 0) == 20);
  CHECK(record_width(ps, 0) == 24);
  CHECK(record_width(pvs, 0) == 32);
  CHECK(record_width(pvsc, 0) == 36);

  CHECK(payload_bytes(900, p) == 10800);
  CHECK(payload_bytes(900, pv) == 18000);
  CHECK(payload_bytes(900, ps) == 21600);
  CHECK(payload_bytes(900, pvs) == 28800);
  CHECK(payload_bytes(0, pvsc) == 0);

  // Affine in count with slope == record width.
  for (std::size_t n : {1, 7, 450, 900}) {
    CHECK(payload_bytes(n, pvs) == n * record_width(pvs, 0));
  }

  CHECK(encoded_size(0, p) == 32);
  CHECK(encoded_size(900, p) == 32 + 10800);

  const PayloadFlags query{.has_confidence = true, .has_semantics = true};
  CHECK(record_width(query, 128) == 12 + 4 + 512);
  CHECK(payload_bytes(10, query, 128) == 5280);
}

TEST_CASE("bandwidth_at_fps") {
  CHECK(bandwidth_at_fps(10800, 5.0) == 54000.0);
  CHECK(bandwidth_at_fps(28800, 5.0) == 144000.0);
  CHECK(bandwidth_at_fps(12345, 1.0) == 12345.0);
  const double eps = 1e-6;
  CHECK(bandwidth_at_fps(10800, eps) == doctest::Approx(10800 * eps));
  CHECK_THROWS_AS(bandwidth_at_fps(1, 0.0), std::invalid_argument);
}

TEST_CASE("baseline payloads reproduce the grid arithmetic") {
  const BaselineTable t = baseline_payloads();
  // Independent re-derivation of the dense-feature payload.
  const std::uint64_t want = 200ull * 200ull * 256ull * 4ull;
  CHECK(want == 40960000ull);
  CHECK(t.bev_feature_fusion.payload_bytes_per_frame == want);
  CHECK(t.bev_feature_fusion.payload_bytes_per_frame % 1024 == 0);
  CHECK(t.bev_feature_fusion.payload_bytes_per_frame / 1024 == 40000);
  CHECK(t.full_query_fusion.payload_bytes_per_frame == 961536ull);
  CHECK(t.full_query_fusion.payload_bytes_per_frame % 1024 == 0);
  CHECK(t.full_query_fusion.payload_bytes_per_frame / 1024 == 939);

  // Ten effective points with all attributes at 5 FPS vs the dense baseline:
  // at least five orders of magnitude apart.
  const PayloadFlags pvsc{.has_velocity = true, .has_size = true, .has_confidence = true};
  const double effective = bandwidth_at_fps(static_cast<double>(payload_bytes(10, pvsc)), 5.0);
  const double dense = bandwidth_at_fps(
      static_cast<double>(t.bev_feature_fusion.payload_bytes_per_frame), 5.0);
  CHECK(dense / effective >= 1e5);
}

TEST_CASE("empty frame encodes to a bare 32-byte header") {
  const WireMessage msg = canonical_header(PayloadFlags{});
  const auto bytes = encode(msg);
  CHECK(bytes.size() == 32);
  CHECK(decode(bytes) == msg);
}

TEST_CASE("golden fixtures: encode matches the hand-written layout") {
  SUBCASE("empty") {
    const auto want = read_hex_file("msg_empty.hex");
    CHECK(encode(canonical_header(PayloadFlags{})) == want);
  }
  SUBCASE("positions only") {
    WireMessage msg = canonical_header(PayloadFlags{});
    msg.records.push_back({{1.5f, -2.25f, 0.0f}, {}, {}, 0.0f, {}});
    msg.records.push_back({{10.0f, 20.0f, -1.0f}, {}, {}, 0.0f, {}});
    msg.records.push_back({{0.125f, 0.25f, 0.5f}, {}, {}, 0.0f, {}});
    const auto want = read_hex_file("msg_p.hex");
    CHECK(encode(msg) == want);
    CHECK(decode(want) == msg);
  }
  SUBCASE("velocity + size + confidence") {
    WireMessage msg = canonical_header(
        PayloadFlags{.has_velocity = true, .has_size = true, .has_confidence = true});
    msg.records.push_back(
        {{0.0f, 0.0f, 0.0f}, {1.0f, -1.0f}, {4.5f, 2.0f, 1.5f}, 0.75f, {}});
    msg.records.push_back(
        {{100.0f, -50.0f, 2.0f}, {0.0f, 0.0f}, {1.0f, 1.0f, 1.0f}, 0.5f, {}});
    const auto want = read_hex_file("msg_pvsc.hex");
    CHECK(encode(msg) == want);
    CHECK(decode(want) == msg);
  }
  SUBCASE("query payload, embed_dim 4") {
    WireMessage msg =
        canonical_header(PayloadFlags{.has_confidence = true, .has_semantics = true}, 4);
    msg.records.push_back(
        {{1.0f, 2.0f, 3.0f}, {}, {}, 1.0f, {0.5f, -0.5f, 2.0f, -2.0f}});
    msg.records.push_back(
        {{-1.0f, -2.0f, -3.0f}, {}, {}, 0.25f, {1.0f, 2.0f, 3.0f, 4.0f}});
    const auto want = read_hex_file("msg_query_d4.hex");
    CHECK(encode(msg) == want);
    CHECK(decode(want) == msg);
  }
}

TEST_CASE("randomized round trips across all flag combinations") {
  Rng rng(401);
  int combo = 0;
  for (int iter = 0; iter < 2000; ++iter, ++combo) {
    PayloadFlags flags;
    flags.has_velocity = (combo & 1) != 0;
    flags.has_size = (combo & 2) != 0;
    flags.has_confidence = (combo & 4) != 0;
    flags.has_semantics = (combo & 8) != 0;
    const WireMessage msg = random_message(rng, flags);
    const auto bytes = encode(msg);
    CHECK(bytes.size() == encoded_size(msg.records.size(), flags, msg.embed_dim));
    const WireMessage back = decode(bytes);
    CHECK(back == msg);
    CHECK(encode(back) == bytes);
  }
}

TEST_CASE("decode error kinds are distinct and specific") {
  WireMessage msg = canonical_header(PayloadFlags{});
  msg.records.push_back({{1.0f, 2.0f, 3.0f}, {}, {}, 0.0f, {}});
  const auto good = encode(msg);

  SUBCASE("truncated body") {
    auto bad = good;
    bad.resize(bad.size() - 5);
    CHECK_THROWS_WITH_AS(decode(bad), doctest::Contains("truncated"), WireError);
    try {
      decode(bad);
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::truncated);
    }
  }
  SUBCASE("truncated header") {
    std::vector<std::uint8_t> bad(good.begin(), good.begin() + 10);
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::truncated);
    }
  }
  SUBCASE("corrupted magic") {
    auto bad = good;
    bad[0] = 'X';
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::bad_magic);
    }
  }
  SUBCASE("unsupported version") {
    auto bad = good;
    bad[4] = 9;
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::unsupported_version);
    }
  }
  SUBCASE("reserved flag bits") {
    auto bad = good;
    bad[5] |= 0x40;
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::reserved_bits);
    }
  }
  SUBCASE("reserved header bytes") {
    auto bad = good;
    bad[6] = 1;
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::reserved_bits);
    }
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(0);
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::trailing_bytes);
    }
  }
  SUBCASE("embed_dim without semantics flag") {
    auto bad = good;
    bad[30] = 4;  // embed_dim low byte
    try {
      decode(bad);
      FAIL("expected WireError");
    } catch (const WireError& e) {
      CHECK(e.kind() == WireErrorKind::malformed_header);
    }
  }
}

TEST_CASE("message_from_frame enforces attribute consistency and capacity") {
  AgentFrame frame;
  ReferencePoint with_velocity;
  with_velocity.position = {1, 2, 0};
  with_velocity.velocity = Velocity2{3, 4};
  with_velocity.instance_id = 0;
  ReferencePoint without_velocity;
  without_velocity.position = {5, 6, 0};
  without_velocity.instance_id = 1;
  frame.points = {with_velocity, without_velocity};

  const PayloadFlags want_velocity{.has_velocity = true};
  try {
    message_from_frame(frame, want_velocity);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind() == WireErrorKind::inconsistent_attributes);
  }

  // Positions-only always encodes.
  CHECK_NOTHROW(message_from_frame(frame, PayloadFlags{}));

  AgentFrame big;
  for (int i = 0; i < 10; ++i) {
    ReferencePoint p;
    p.position = {static_cast<double>(i), 0, 0};
    p.instance_id = static_cast<std::uint64_t>(i);
    big.points.push_back(p);
  }
  try {
    message_from_frame(big, PayloadFlags{}, 5);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind() == WireErrorKind::count_overflow);
  }
}

TEST_CASE("frame/message round trip preserves transmitted attributes") {
  Rng rng(402);
  for (int iter = 0; iter < 100; ++iter) {
    AgentFrame frame;
    frame.agent_id = 3;
    frame.frame_index = static_cast<std::uint64_t>(iter);
    frame.timestamp = iter * 0.2;
    const std::size_t n = rng.next_u64() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      ReferencePoint p;
      // float-representable doubles so the f32 wire trip is lossless
      p.position = {static_cast<float>(rng.uniform(-50, 50)),
                    static_cast<float>(rng.uniform(-50, 50)), 0.0};
      p.velocity = Velocity2{static_cast<float>(rng.uniform(-10, 10)),
                             static_cast<float>(rng.uniform(-10, 10))};
      p.size = Size3{1.0, 2.0, 3.0};
      p.confidence = static_cast<float>(rng.uniform01());
      p.instance_id = i;
      frame.points.push_back(p);
    }
    const PayloadFlags flags{.has_velocity = true, .has_size = true, .has_confidence = true};
    const AgentFrame back = frame_from_message(decode(encode(message_from_frame(frame, flags))));
    REQUIRE(back.points.size() == frame.points.size());
    CHECK(back.agent_id == frame.agent_id);
    CHECK(back.frame_index == frame.frame_index);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(back.points[i].position == frame.points[i].position);
      CHECK(back.points[i].velocity == frame.points[i].velocity);
      CHECK(back.points[i].size == frame.points[i].size);
      CHECK(back.points[i].confidence == frame.points[i].confidence);
      CHECK(back.points[i].instance_id == i);
      CHECK(back.points[i].class_label == 0);  // labels are not transmitted
    }
  }
}

TEST_CASE("confidence defaults to 1.0 when not transmitted") {
  AgentFrame frame;
  ReferencePoint p;
  p.position = {1, 2, 0};
  p.confidence = 0.3;
  frame.points.push_back(p);
  const AgentFrame back = frame_from_message(decode(encode(message_from_frame(frame, {}))));
  CHECK(back.points[0].confidence == 1.0);
}

TEST_CASE("query payload round trip") {
  std::vector<Query> queries;
  for (std::uint64_t i = 0; i < 5; ++i) {
    Query q;
    q.reference_point = {static_cast<double>(i), 1.0, 0.0};
    q.confidence = 0.5;
    q.pos_embed = {0.0, 0.0, 0.0};
    q.sem_embed = {1.0, 2.0, 3.0};
    q.instance_id = i;
    queries.push_back(q);
  }
  const WireMessage msg = message_from_queries(queries, 9, 4, 800000, true);
  CHECK(msg.embed_dim == 3);
  CHECK(payload_bytes(msg.records.size(), msg.flags, msg.embed_dim) == 5 * (12 + 4 + 12));
  const std::vector<Query> back = queries_from_message(decode(encode(msg)));
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].reference_point == queries[i].reference_point);
    CHECK(back[i].sem_embed == queries[i].sem_embed);
    CHECK(back[i].confidence == queries[i].confidence);
    CHECK(back[i].pos_embed == std::vector<double>{0.0, 0.0, 0.0});
  }
}
