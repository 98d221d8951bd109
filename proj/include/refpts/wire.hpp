#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "refpts/core.hpp"
#include "refpts/query.hpp"

namespace refpts::wire {

// Binary layout (all multi-byte fields little-endian, reals IEEE-754 binary32):
//
//   offset  size  field
//        0     4  magic "RPF1"
//        4     1  version (currently 1)
//        5     1  flags: bit0 velocity, bit1 size, bit2 confidence,
//                 bit3 semantics, bits 4..7 reserved (must be zero)
//        6     2  reserved (must be zero)
//        8     4  agent_id
//       12     8  frame_index
//       20     8  timestamp_us
//       28     2  count
//       30     2  embed_dim (zero unless the semantics flag is set)
//       32     -  count fixed-width records
//
//   record: position f32[3], then per flags: velocity f32[2], size f32[3],
//   confidence f32, semantics f32[embed_dim].
//
// record width = 12 + 8*velocity + 12*size + 4*confidence + 4*embed_dim*semantics.

inline constexpr std::array<std::uint8_t, 4> kMagic{'R', 'P', 'F', '1'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kMaxRecordCount = 65535;

struct PayloadFlags {
  bool has_velocity = false;
  bool has_size = false;
  bool has_confidence = false;
  bool has_semantics = false;

  std::uint8_t to_byte() const;
  /// Throws WireError{reserved_bits} if bits 4..7 are set.
  static PayloadFlags from_byte(std::uint8_t b);

  bool operator==(const PayloadFlags&) const = default;
};

enum class WireErrorKind {
  bad_magic,
  unsupported_version,
  truncated,
  reserved_bits,
  trailing_bytes,
  malformed_header,
  count_overflow,
  inconsistent_attributes,
};

class WireError : public std::runtime_error {
 public:
  WireError(WireErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  WireErrorKind kind() const { return kind_; }

 private:
  WireErrorKind kind_;
};

struct WireRecord {
  std::array<float, 3> position{};
  std::array<float, 2> velocity{};   // meaningful iff flags.has_velocity
  std::array<float, 3> size{};       // meaningful iff flags.has_size
  float confidence = 0.0f;           // meaningful iff flags.has_confidence
  std::vector<float> semantics;      // length embed_dim iff flags.has_semantics

  bool operator==(const WireRecord&) const = default;
};

struct WireMessage {
  PayloadFlags flags;
  std::uint32_t agent_id = 0;
  std::uint64_t frame_index = 0;
  std::uint64_t timestamp_us = 0;
  std::uint16_t embed_dim = 0;
  std::vector<WireRecord> records;

  bool operator==(const WireMessage&) const = default;
};

std::size_t record_width(const PayloadFlags& flags, std::size_t embed_dim);

/// Exact record-body length (header excluded, matching per-frame payload
/// reporting) without materializing bytes.
std::size_t payload_bytes(std::size_t count, const PayloadFlags& flags,
                          std::size_t embed_dim = 0);

/// payload_bytes plus the 32-byte header.
std::size_t encoded_size(std::size_t count, const PayloadFlags& flags,
                         std::size_t embed_dim = 0);

/// bytes_per_frame * fps. fps must be > 0.
double bandwidth_at_fps(double bytes_per_frame, double fps);

/// Deterministic byte sequence per the layout above. Throws WireError on
/// count overflow or records inconsistent with the flags.
std::vector<std::uint8_t> encode(const WireMessage& msg);

/// Exact inverse of encode on valid input. Throws WireError with a distinct
/// kind for bad magic, unsupported version, truncation, nonzero reserved
/// bits, trailing bytes, and malformed header fields.
WireMessage decode(std::span<const std::uint8_t> bytes);

/// Builds a message from a frame, transmitting exactly the attributes named
/// by `flags`. Throws WireError{inconsistent_attributes} if any point lacks a
/// flagged attribute, and WireError{count_overflow} past `capacity`.
WireMessage message_from_frame(const AgentFrame& frame, const PayloadFlags& flags,
                               std::size_t capacity = kDefaultQueryCapacity);

/// Reconstructs a frame from a decoded message. Untransmitted attributes get
/// defaults: class_label 0, instance_id = record index, confidence 1.0 when
/// the confidence flag is off.
AgentFrame frame_from_message(const WireMessage& msg);

/// Query payload: reference point + confidence (optional) + semantic
/// embedding. Positional embeddings are never transmitted; the receiver does
/// not use them.
WireMessage message_from_queries(const std::vector<Query>& queries,
                                 std::uint32_t agent_id, std::uint64_t frame_index,
                                 std::uint64_t timestamp_us, bool include_confidence);

/// Receiver-side queries from a semantics-flagged message. pos_embed is a
/// zero placeholder of the embedding dimension.
std::vector<Query> queries_from_message(const WireMessage& msg);

// Reference payload model of the BEV feature-fusion baseline:
// a 200x200 cell grid with 256 float32 channels per cell.
inline constexpr std::size_t kBevGridCellsPerSide = 200;
inline constexpr std::size_t kBevChannels = 256;
inline constexpr std::size_t kFloatBytes = 4;

struct BaselinePayload {
  const char* name;
  std::uint64_t payload_bytes_per_frame;
  double bandwidth_bytes_per_s;  // reported figure at 5 FPS
};

struct BaselineTable {
  BaselinePayload bev_feature_fusion;
  BaselinePayload full_query_fusion;
};

/// Per-frame payload constants of the dense-fusion baselines. The BEV figure
/// is derived from the grid model above; the full-query figure is an opaque
/// reported constant (its internal layout is not modeled), as is its
/// bandwidth column.
BaselineTable baseline_payloads();

}  // namespace refpts::wire
