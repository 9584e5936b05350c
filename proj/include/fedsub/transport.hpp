// Copyright 2026 The fedsub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Length-prefixed framing, the carrier abstraction and the accounting
// channel the local machine talks through.
//
// Frame: length (4, BE, payload bytes) | tag (1) | payload.
//
// Databases only ever hold a FrameHandler; there is no route from one
// database to another.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/ledger.hpp"

namespace fedsub {

enum class MessageKind : std::uint8_t {
  kGetShare = 1,
  kShareResp = 2,
  kPirQuery = 3,
  kPirAnswer = 4,
  kUploadShare = 5,
  kUploadCombos = 6,
  kAck = 7,
  kNaiveGet = 8,
  kNaiveResp = 9,
  kNaivePush = 10,
  kError = 255,
};

inline bool is_known_kind(std::uint8_t tag) { return (tag >= 1 && tag <= 10) || tag == 255; }

inline const char* kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::kGetShare: return "GetShare";
    case MessageKind::kShareResp: return "ShareResp";
    case MessageKind::kPirQuery: return "PirQuery";
    case MessageKind::kPirAnswer: return "PirAnswer";
    case MessageKind::kUploadShare: return "UploadShare";
    case MessageKind::kUploadCombos: return "UploadCombos";
    case MessageKind::kAck: return "Ack";
    case MessageKind::kNaiveGet: return "NaiveGet";
    case MessageKind::kNaiveResp: return "NaiveResp";
    case MessageKind::kNaivePush: return "NaivePush";
    case MessageKind::kError: return "Error";
  }
  return "?";
}

// The one response kind each request expects (Error aside).
inline MessageKind response_kind(MessageKind request) {
  switch (request) {
    case MessageKind::kGetShare: return MessageKind::kShareResp;
    case MessageKind::kPirQuery: return MessageKind::kPirAnswer;
    case MessageKind::kUploadShare:
    case MessageKind::kUploadCombos:
    case MessageKind::kNaivePush: return MessageKind::kAck;
    case MessageKind::kNaiveGet: return MessageKind::kNaiveResp;
    default: throw ProtocolError(std::string("not a request kind: ") + kind_name(request));
  }
}

struct Frame {
  MessageKind kind = MessageKind::kAck;
  Bytes payload;

  static Frame error(const std::string& reason) { return {MessageKind::kError, Bytes(reason.begin(), reason.end())}; }
  std::string text() const { return std::string(payload.begin(), payload.end()); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderLen = 5;
inline constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 30;

inline Bytes frame_encode(const Frame& f) {
  if (f.payload.size() > UINT32_MAX) throw ProtocolError("frame payload too large");
  ByteWriter w;
  w.reserve(kFrameHeaderLen + f.payload.size());
  w.u32(static_cast<std::uint32_t>(f.payload.size()));
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.raw(f.payload);
  return std::move(w).bytes();
}

// Parses a 5-byte header; returns (payload length, kind).
inline std::pair<std::uint32_t, MessageKind> frame_header(std::span<const std::uint8_t> header) {
  ByteReader r(header);
  const std::uint32_t len = r.u32();
  const std::uint8_t tag = r.u8();
  if (!is_known_kind(tag)) throw DecodeError("unknown frame tag " + std::to_string(tag));
  return {len, static_cast<MessageKind>(tag)};
}

inline Frame frame_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderLen) throw DecodeError("truncated frame header");
  auto [len, kind] = frame_header(bytes.first(kFrameHeaderLen));
  if (bytes.size() - kFrameHeaderLen != len) {
    throw DecodeError("frame length mismatch: header says " + std::to_string(len) + ", have " +
                      std::to_string(bytes.size() - kFrameHeaderLen));
  }
  return {kind, Bytes(bytes.begin() + kFrameHeaderLen, bytes.end())};
}

// Number of field symbols a payload carries. Queries carry indices, not
// symbols, and count zero.
inline std::uint64_t symbols_in(const Frame& f) {
  ByteReader r(f.payload);
  switch (f.kind) {
    case MessageKind::kShareResp:
    case MessageKind::kUploadShare:
      r.raw(9);
      return r.u32();
    case MessageKind::kPirAnswer:
      r.raw(4);
      return r.u32();
    case MessageKind::kNaiveResp:
      r.raw(12);
      return r.u32();
    case MessageKind::kUploadCombos:
    case MessageKind::kNaivePush: {
      const std::uint64_t rows = r.u16();
      return rows * r.u32();
    }
    default: return 0;
  }
}

class FrameHandler {
 public:
  virtual ~FrameHandler() = default;
  virtual Frame handle(const Frame& request) = 0;
  // Session boundaries; a carrier brackets each iteration with these.
  virtual void open_session() {}
  virtual void close_session() {}
};

class Carrier {
 public:
  virtual ~Carrier() = default;
  virtual std::size_t n_dbs() const = 0;
  virtual void begin_session() = 0;
  virtual void end_session() = 0;
  // Delivers the frame to exactly one database and returns its response.
  virtual Frame exchange(std::size_t db, const Frame& request) = 0;
};

// In-process carrier. Each database is reached only through its own handler.
// Frames still go through encode/decode so both carriers see identical bytes.
class SimCarrier : public Carrier {
 public:
  explicit SimCarrier(std::vector<FrameHandler*> dbs) : dbs_(std::move(dbs)) {}

  std::size_t n_dbs() const override { return dbs_.size(); }
  void begin_session() override {
    for (auto* d : dbs_) d->open_session();
  }
  void end_session() override {
    for (auto* d : dbs_) d->close_session();
  }
  Frame exchange(std::size_t db, const Frame& request) override {
    if (db >= dbs_.size()) throw TransportError("no database " + std::to_string(db));
    Frame delivered = frame_decode(frame_encode(request));
    return frame_decode(frame_encode(dbs_[db]->handle(delivered)));
  }

 private:
  std::vector<FrameHandler*> dbs_;
};

struct Exchange {
  Bytes request;
  Bytes response;
  friend bool operator==(const Exchange&, const Exchange&) = default;
};

// Per-database ordered list of encoded request/response frames.
using Transcript = std::vector<std::vector<Exchange>>;

// Accounting wrapper used by local machines. Every frame crossing the
// carrier is counted once: requests as upload, responses as download.
class Channel {
 public:
  explicit Channel(Carrier& carrier) : carrier_(carrier), ledger_(carrier.n_dbs()), transcript_(carrier.n_dbs()) {}

  std::size_t n_dbs() const { return carrier_.n_dbs(); }

  // Sends a request and returns the payload of the expected response kind.
  // An Error frame becomes a ProtocolError carrying its reason.
  Bytes send(std::size_t db, MessageKind kind, Bytes payload) {
    Frame req{kind, std::move(payload)};
    Frame resp = carrier_.exchange(db, req);
    std::lock_guard lock(mu_);
    account(db, req, /*upload=*/true);
    account(db, resp, /*upload=*/false);
    transcript_[db].push_back({frame_encode(req), frame_encode(resp)});
    if (resp.kind == MessageKind::kError) {
      throw ProtocolError(std::string("database ") + std::to_string(db) + " rejected " + kind_name(kind) + ": " +
                          resp.text());
    }
    if (resp.kind != response_kind(kind)) {
      throw ProtocolError(std::string("unexpected response ") + kind_name(resp.kind) + " to " + kind_name(kind));
    }
    return std::move(resp.payload);
  }

  void begin_session() { carrier_.begin_session(); }
  void end_session() { carrier_.end_session(); }

  OverheadLedger& ledger() { return ledger_; }
  const Transcript& transcript() const { return transcript_; }

 private:
  void account(std::size_t db, const Frame& f, bool upload) {
    const std::uint64_t symbols = symbols_in(f);
    const std::uint64_t bytes = kFrameHeaderLen + f.payload.size();
    (upload ? ledger_.bytes_up : ledger_.bytes_down) += bytes;
    PhaseCounts delta;
    switch (f.kind) {
      case MessageKind::kShareResp: delta.download_shares = symbols; break;
      case MessageKind::kPirAnswer: delta.download_pir = symbols; break;
      case MessageKind::kUploadShare: delta.upload_shares = symbols; break;
      case MessageKind::kUploadCombos: delta.upload_combos = symbols; break;
      case MessageKind::kNaiveResp: delta.naive_download = symbols; break;
      case MessageKind::kNaivePush: delta.naive_upload = symbols; break;
      default: break;
    }
    ledger_.total += delta;
    ledger_.per_db[db] += delta;
  }

  Carrier& carrier_;
  std::mutex mu_;
  OverheadLedger ledger_;
  Transcript transcript_;
};

}  // namespace fedsub
