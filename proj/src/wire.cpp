#include "refpts/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace refpts::wire {

namespace {

constexpr std::uint8_t kReservedFlagMask = 0xF0;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] |
                                                       (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw WireError(WireErrorKind::truncated, "wire: message truncated");
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint8_t PayloadFlags::to_byte() const {
  std::uint8_t b = 0;
  if (has_velocity) b |= 0x01;
  if (has_size) b |= 0x02;
  if (has_confidence) b |= 0x04;
  if (has_semantics) b |= 0x08;
  return b;
}

PayloadFlags PayloadFlags::from_byte(std::uint8_t b) {
  if (b & kReservedFlagMask) {
    throw WireError(WireErrorKind::reserved_bits, "wire: reserved flag bits set");
  }
  PayloadFlags f;
  f.has_velocity = (b & 0x01) != 0;
  f.has_size = (b & 0x02) != 0;
  f.has_confidence = (b & 0x04) != 0;
  f.has_semantics = (b & 0x08) != 0;
  return f;
}

std::size_t record_width(const PayloadFlags& flags, std::size_t embed_dim) {
  std::size_t w = 12;
  if (flags.has_velocity) w += 8;
  if (flags.has_size) w += 12;
  if (flags.has_confidence) w += 4;
  if (flags.has_semantics) w += 4 * embed_dim;
  return w;
}

std::size_t payload_bytes(std::size_t count, const PayloadFlags& flags,
                          std::size_t embed_dim) {
  return count * record_width(flags, embed_dim);
}

std::size_t encoded_size(std::size_t count, const PayloadFlags& flags,
                         std::size_t embed_dim) {
  return kHeaderBytes + payload_bytes(count, flags, embed_dim);
}

double bandwidth_at_fps(double bytes_per_frame, double fps) {
  if (!(fps > 0.0)) {
    throw std::invalid_argument("bandwidth_at_fps: fps must be > 0");
  }
  return bytes_per_frame * fps;
}

namespace {

void check_message(const WireMessage& msg) {
  if (msg.records.size() > kMaxRecordCount) {
    throw WireError(WireErrorKind::count_overflow,
                    "wire: record count exceeds 65535");
  }
  if (msg.flags.has_semantics) {
    if (msg.embed_dim == 0) {
      throw WireError(WireErrorKind::malformed_header,
                      "wire: semantics flag set with embed_dim 0");
    }
  } else if (msg.embed_dim != 0) {
    throw WireError(WireErrorKind::malformed_header,
                    "wire: embed_dim must be 0 without the semantics flag");
  }
  for (const WireRecord& r : msg.records) {
    const std::size_t want = msg.flags.has_semantics ? msg.embed_dim : 0;
    if (r.semantics.size() != want) {
      throw WireError(WireErrorKind::inconsistent_attributes,
                      "wire: record semantics length inconsistent with header");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode(const WireMessage& msg) {
  check_message(msg);
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(msg.records.size(), msg.flags, msg.embed_dim));

  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(kVersion);
  out.push_back(msg.flags.to_byte());
  put_u16(out, 0);  // reserved
  put_u32(out, msg.agent_id);
  put_u64(out, msg.frame_index);
  put_u64(out, msg.timestamp_us);
  put_u16(out, static_cast<std::uint16_t>(msg.records.size()));
  put_u16(out, msg.embed_dim);

  for (const WireRecord& r : msg.records) {
    for (float v : r.position) put_f32(out, v);
    if (msg.flags.has_velocity) {
      for (float v : r.velocity) put_f32(out, v);
    }
    if (msg.flags.has_size) {
      for (float v : r.size) put_f32(out, v);
    }
    if (msg.flags.has_confidence) put_f32(out, r.confidence);
    if (msg.flags.has_semantics) {
      for (float v : r.semantics) put_f32(out, v);
    }
  }
  return out;
}

WireMessage decode(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  std::array<std::uint8_t, 4> magic{};
  for (auto& b : magic) b = in.u8();
  if (magic != kMagic) {
    throw WireError(WireErrorKind::bad_magic, "wire: bad magic");
  }
  const std::uint8_t version = in.u8();
  if (version != kVersion) {
    throw WireError(WireErrorKind::unsupported_version,
                    "wire: unsupported version " + std::to_string(version));
  }
  WireMessage msg;
  msg.flags = PayloadFlags::from_byte(in.u8());
  if (in.u16() != 0) {
    throw WireError(WireErrorKind::reserved_bits, "wire: reserved header bytes set");
  }
  msg.agent_id = in.u32();
  msg.frame_index = in.u64();
  msg.timestamp_us = in.u64();
  const std::uint16_t count = in.u16();
  msg.embed_dim = in.u16();
  if (msg.flags.has_semantics) {
    if (msg.embed_dim == 0) {
      throw WireError(WireErrorKind::malformed_header,
                      "wire: semantics flag set with embed_dim 0");
    }
  } else if (msg.embed_dim != 0) {
    throw WireError(WireErrorKind::malformed_header,
                    "wire: embed_dim must be 0 without the semantics flag");
  }

  msg.records.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    WireRecord r;
    for (auto& v : r.position) v = in.f32();
    if (msg.flags.has_velocity) {
      for (auto& v : r.velocity) v = in.f32();
    }
    if (msg.flags.has_size) {
      for (auto& v : r.size) v = in.f32();
    }
    if (msg.flags.has_confidence) r.confidence = in.f32();
    if (msg.flags.has_semantics) {
      r.semantics.resize(msg.embed_dim);
      for (auto& v : r.semantics) v = in.f32();
    }
    msg.records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    throw WireError(WireErrorKind::trailing_bytes,
                    "wire: " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return msg;
}

WireMessage message_from_frame(const AgentFrame& frame, const PayloadFlags& flags,
                               std::size_t capacity) {
  if (flags.has_semantics) {
    throw WireError(WireErrorKind::inconsistent_attributes,
                    "wire: reference-point payloads cannot carry semantics");
  }
  if (frame.points.size() > capacity || frame.points.size() > kMaxRecordCount) {
    throw WireError(WireErrorKind::count_overflow,
                    "wire: frame exceeds transmission capacity");
  }
  WireMessage msg;
  msg.flags = flags;
  msg.agent_id = frame.agent_id;
  msg.frame_index = frame.frame_index;
  msg.timestamp_us = static_cast<std::uint64_t>(std::llround(frame.timestamp * 1e6));
  for (const ReferencePoint& p : frame.points) {
    WireRecord r;
    r.position = {static_cast<float>(p.position.x), static_cast<float>(p.position.y),
                  static_cast<float>(p.position.z)};
    if (flags.has_velocity) {
      if (!p.velocity) {
        throw WireError(WireErrorKind::inconsistent_attributes,
                        "wire: velocity flag set but a point has no velocity");
      }
      r.velocity = {static_cast<float>(p.velocity->vx), static_cast<float>(p.velocity->vy)};
    }
    if (flags.has_size) {
      if (!p.size) {
        throw WireError(WireErrorKind::inconsistent_attributes,
                        "wire: size flag set but a point has no size");
      }
      r.size = {static_cast<float>(p.size->length), static_cast<float>(p.size->width),
                static_cast<float>(p.size->height)};
    }
    if (flags.has_confidence) r.confidence = static_cast<float>(p.confidence);
    msg.records.push_back(std::move(r));
  }
  return msg;
}

AgentFrame frame_from_message(const WireMessage& msg) {
  AgentFrame frame;
  frame.agent_id = msg.agent_id;
  frame.frame_index = msg.frame_index;
  frame.timestamp = static_cast<double>(msg.timestamp_us) * 1e-6;
  frame.in_ego_frame = false;
  std::uint64_t next_id = 0;
  for (const WireRecord& r : msg.records) {
    ReferencePoint p;
    p.position = {r.position[0], r.position[1], r.position[2]};
    if (msg.flags.has_velocity) p.velocity = Velocity2{r.velocity[0], r.velocity[1]};
    if (msg.flags.has_size) p.size = Size3{r.size[0], r.size[1], r.size[2]};
    p.confidence = msg.flags.has_confidence ? r.confidence : 1.0;
    p.instance_id = next_id++;
    frame.points.push_back(p);
  }
  return frame;
}

WireMessage message_from_queries(const std::vector<Query>& queries,
                                 std::uint32_t agent_id, std::uint64_t frame_index,
                                 std::uint64_t timestamp_us, bool include_confidence) {
  WireMessage msg;
  msg.flags.has_confidence = include_confidence;
  msg.flags.has_semantics = true;
  msg.agent_id = agent_id;
  msg.frame_index = frame_index;
  msg.timestamp_us = timestamp_us;
  std::size_t dim = 0;
  for (const Query& q : queries) {
    if (dim == 0) dim = q.sem_embed.size();
    if (q.sem_embed.size() != dim || dim == 0) {
      throw WireError(WireErrorKind::inconsistent_attributes,
                      "wire: query semantic embeddings must share one nonzero dimension");
    }
  }
  if (queries.empty()) dim = 1;  // header needs a nonzero embed_dim
  if (dim > kMaxRecordCount) {
    throw WireError(WireErrorKind::count_overflow, "wire: embed_dim exceeds 65535");
  }
  if (queries.size() > kMaxRecordCount) {
    throw WireError(WireErrorKind::count_overflow, "wire: record count exceeds 65535");
  }
  msg.embed_dim = static_cast<std::uint16_t>(dim);
  for (const Query& q : queries) {
    WireRecord r;
    r.position = {static_cast<float>(q.reference_point.x),
                  static_cast<float>(q.reference_point.y),
                  static_cast<float>(q.reference_point.z)};
    if (include_confidence) r.confidence = static_cast<float>(q.confidence);
    r.semantics.reserve(dim);
    for (double v : q.sem_embed) r.semantics.push_back(static_cast<float>(v));
    msg.records.push_back(std::move(r));
  }
  return msg;
}

std::vector<Query> queries_from_message(const WireMessage& msg) {
  if (!msg.flags.has_semantics) {
    throw WireError(WireErrorKind::inconsistent_attributes,
                    "wire: message carries no semantics");
  }
  std::vector<Query> out;
  std::uint64_t next_id = 0;
  for (const WireRecord& r : msg.records) {
    Query q;
    q.reference_point = {r.position[0], r.position[1], r.position[2]};
    q.confidence = msg.flags.has_confidence ? r.confidence : 1.0;
    q.pos_embed.assign(msg.embed_dim, 0.0);
    q.sem_embed.reserve(msg.embed_dim);
    for (float v : r.semantics) q.sem_embed.push_back(v);
    q.instance_id = next_id++;
    out.push_back(std::move(q));
  }
  return out;
}

BaselineTable baseline_payloads() {
  constexpr std::uint64_t bev_bytes = static_cast<std::uint64_t>(kBevGridCellsPerSide) *
                                      kBevGridCellsPerSide * kBevChannels * kFloatBytes;
  return BaselineTable{
      // 200*200*256*4 = 40,960,000 B = exactly 40,000 KiB; x5 FPS = 200,000 KiB/s.
      {"BEV feature fusion", bev_bytes, static_cast<double>(bev_bytes) * 5.0},
      // Reported constants; the internal query layout is not modeled, and the
      // reported bandwidth (4,693 KiB/s) is kept verbatim rather than derived.
      {"Query fusion (full set)", 961536, 4693.0 * 1024.0},
  };
}

}  // namespace refpts::wire
