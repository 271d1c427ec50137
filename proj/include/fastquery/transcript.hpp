#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fastquery/errors.hpp"

namespace fastquery::proto {

enum class MessageKind : uint8_t {
  QueryCiphertexts = 1,
  ResponseCiphertexts = 2,
  ShareSync = 3,
  AlignRequest = 4,
  AlignResponse = 5,
  Config = 6,
};

inline const char* kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::QueryCiphertexts: return "query_ciphertexts";
    case MessageKind::ResponseCiphertexts: return "response_ciphertexts";
    case MessageKind::ShareSync: return "share_sync";
    case MessageKind::AlignRequest: return "align_request";
    case MessageKind::AlignResponse: return "align_response";
    case MessageKind::Config: return "config";
  }
  return "?";
}

enum class Direction : uint8_t {
  ClientToServer,
  ServerToClient,
  DealerToClient,
  DealerToServer,
  ClientToDealer,
  ServerToDealer,
};

inline const char* direction_name(Direction d) {
  switch (d) {
    case Direction::ClientToServer: return "client->server";
    case Direction::ServerToClient: return "server->client";
    case Direction::DealerToClient: return "dealer->client";
    case Direction::DealerToServer: return "dealer->server";
    case Direction::ClientToDealer: return "client->dealer";
    case Direction::ServerToDealer: return "server->dealer";
  }
  return "?";
}

/// Frame: 4-byte LE payload length | 1-byte kind | 4-byte LE sequence | payload.
inline constexpr size_t kFrameHeaderLen = 9;

struct Message {
  MessageKind kind = MessageKind::Config;
  uint32_t seq = 0;
  std::vector<uint8_t> payload;

  uint64_t byte_len() const { return payload.size() + kFrameHeaderLen; }
};

inline std::vector<uint8_t> encode_frame(const Message& msg) {
  std::vector<uint8_t> out;
  out.reserve(msg.byte_len());
  uint32_t len = static_cast<uint32_t>(msg.payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(len >> (8 * i)));
  out.push_back(static_cast<uint8_t>(msg.kind));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(msg.seq >> (8 * i)));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

inline Message decode_frame(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kFrameHeaderLen) throw ProtocolError("frame shorter than header");
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(bytes[i]) << (8 * i);
  if (bytes.size() != kFrameHeaderLen + len)
    throw ProtocolError("frame length field " + std::to_string(len) + " disagrees with " +
                        std::to_string(bytes.size() - kFrameHeaderLen) + " payload bytes");
  uint8_t kind = bytes[4];
  if (kind < 1 || kind > 6) throw ProtocolError("unknown frame kind " + std::to_string(kind));
  Message msg;
  msg.kind = static_cast<MessageKind>(kind);
  for (int i = 0; i < 4; ++i) msg.seq |= static_cast<uint32_t>(bytes[5 + i]) << (8 * i);
  msg.payload.assign(bytes.begin() + kFrameHeaderLen, bytes.end());
  return msg;
}

struct TranscriptEntry {
  Direction direction;
  MessageKind kind;
  uint32_t seq;
  uint64_t byte_len;
  std::string phase;
};

/// Append-only byte-exact log of a protocol run.
struct Transcript {
  std::vector<TranscriptEntry> entries;

  void log(Direction direction, const Message& msg, const std::string& phase) {
    entries.push_back(TranscriptEntry{direction, msg.kind, msg.seq, msg.byte_len(), phase});
  }

  uint64_t total_bytes() const {
    uint64_t t = 0;
    for (const auto& e : entries) t += e.byte_len;
    return t;
  }

  std::map<std::string, uint64_t> phase_bytes() const {
    std::map<std::string, uint64_t> sub;
    for (const auto& e : entries) sub[e.phase] += e.byte_len;
    return sub;
  }

  uint64_t bytes_of_kind(MessageKind k) const {
    uint64_t t = 0;
    for (const auto& e : entries)
      if (e.kind == k) t += e.byte_len;
    return t;
  }

  size_t count_of_kind(MessageKind k) const {
    size_t c = 0;
    for (const auto& e : entries)
      if (e.kind == k) ++c;
    return c;
  }

  /// Per-message metadata only; payloads never leave the parties.
  nlohmann::json to_json() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& e : entries) {
      msgs.push_back({{"direction", direction_name(e.direction)},
                      {"kind", kind_name(e.kind)},
                      {"seq", e.seq},
                      {"byte_len", e.byte_len},
                      {"phase", e.phase}});
    }
    nlohmann::json sub = nlohmann::json::object();
    for (const auto& [phase, bytes] : phase_bytes()) sub[phase] = bytes;
    return nlohmann::json{
        {"messages", msgs}, {"phase_bytes", sub}, {"total_bytes", total_bytes()}};
  }

  static Transcript from_json(const nlohmann::json& j) {
    Transcript t;
    for (const auto& m : j.at("messages")) {
      TranscriptEntry e;
      std::string dir = m.at("direction");
      std::string kind = m.at("kind");
      e.direction = Direction::ClientToServer;
      for (int d = 0; d <= 5; ++d)
        if (dir == direction_name(static_cast<Direction>(d)))
          e.direction = static_cast<Direction>(d);
      e.kind = MessageKind::Config;
      for (int k = 1; k <= 6; ++k)
        if (kind == kind_name(static_cast<MessageKind>(k))) e.kind = static_cast<MessageKind>(k);
      e.seq = m.at("seq");
      e.byte_len = m.at("byte_len");
      e.phase = m.at("phase");
      t.entries.push_back(std::move(e));
    }
    return t;
  }
};

}  // namespace fastquery::proto
