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

// One database: holds its replicated matrix and its exclusive share, and
// answers frames. The same class serves the naive baseline, where the matrix
// is stored unmasked and no share exists.

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/mdscode.hpp"
#include "fedsub/pir.hpp"
#include "fedsub/protocol.hpp"
#include "fedsub/transport.hpp"

namespace fedsub {

enum class Scheme { kProposed, kNaive };

inline const char* scheme_name(Scheme s) { return s == Scheme::kProposed ? "proposed" : "naive"; }

class DatabaseServer : public FrameHandler {
 public:
  DatabaseServer(const ProtocolConfig& cfg, DatabaseState initial, Scheme scheme = Scheme::kProposed)
      : cfg_(cfg), state_(std::move(initial)), scheme_(scheme) {}

  DatabaseServer(const DatabaseServer& o) : cfg_(o.cfg_), state_(o.state_), scheme_(o.scheme_), staged_(o.staged_), observed_(o.observed_) {}

  // Databases for a fresh run. Naive databases hold B_0 in the clear.
  static std::vector<DatabaseServer> create_all(const ProtocolConfig& cfg, const Matrix& initial, Scheme scheme) {
    std::vector<DatabaseServer> out;
    if (scheme == Scheme::kProposed) {
      for (auto& st : bootstrap(cfg, initial)) out.emplace_back(cfg, std::move(st), scheme);
    } else {
      check_shape(initial, cfg.n_submodels, cfg.submodel_len, "naive bootstrap");
      for (std::size_t i = 0; i < cfg.n_dbs; ++i) {
        out.emplace_back(cfg, DatabaseState{i, {initial, 1}, {static_cast<std::uint8_t>(i), 0, {}}}, scheme);
      }
    }
    return out;
  }

  Frame handle(const Frame& request) override {
    std::lock_guard lock(mu_);
    Frame response;
    try {
      response = dispatch(request);
    } catch (const Error& e) {
      response = Frame::error(e.what());
    }
    observed_.push_back({frame_encode(request), frame_encode(response)});
    return response;
  }

  void open_session() override {
    std::lock_guard lock(mu_);
    staged_.reset();
  }
  void close_session() override {
    std::lock_guard lock(mu_);
    staged_.reset();
  }

  const DatabaseState& state() const { return state_; }
  Scheme scheme() const { return scheme_; }
  const ProtocolConfig& config() const { return cfg_; }

  // Every exchange this database has taken part in, in order. This is the
  // database's whole view of the local machines.
  const std::vector<Exchange>& observed() const { return observed_; }

  // Serialized stored state: matrix rows, then the share.
  Bytes snapshot(bool with_share = true) const {
    ByteWriter w(encode_bundle(state_.encoded.rows));
    w.u64(state_.encoded.iteration);
    if (with_share) write_share(w, state_.share);
    return std::move(w).bytes();
  }

 private:
  Frame dispatch(const Frame& req) {
    if (scheme_ == Scheme::kProposed) {
      switch (req.kind) {
        case MessageKind::kGetShare: return get_share(req);
        case MessageKind::kPirQuery: return pir_query(req);
        case MessageKind::kUploadShare: return upload_share(req);
        case MessageKind::kUploadCombos: return upload_combos(req);
        default: break;
      }
    } else {
      switch (req.kind) {
        case MessageKind::kNaiveGet: return naive_get(req);
        case MessageKind::kNaivePush: return naive_push(req);
        default: break;
      }
    }
    throw ProtocolError(std::string("unsupported request ") + kind_name(req.kind) + " in " + scheme_name(scheme_) +
                        " mode");
  }

  Frame get_share(const Frame& req) {
    if (!req.payload.empty()) throw ProtocolError("GetShare carries no payload");
    return {MessageKind::kShareResp, encode_share(state_.share)};
  }

  Frame pir_query(const Frame& req) {
    auto [group, sums] = decode_pir_query(req.payload);
    const PirConfig pir = cfg_.pir();
    if (group >= pir.groups()) throw ProtocolError("PIR group " + std::to_string(group) + " out of range");
    Vec answer = pir_answer(sums, state_.encoded.rows, group, pir.subpacket_len());
    return {MessageKind::kPirAnswer, encode_pir_answer(group, answer)};
  }

  Frame upload_share(const Frame& req) {
    ExclusiveShare share = decode_share(req.payload, cfg_.modulus);
    if (share.db_index != state_.db_index) throw ProtocolError("share addressed to another database");
    if (share.iteration != state_.encoded.iteration) throw ProtocolError("share for the wrong iteration");
    auto [b, e] = share_bounds(cfg_.message_len(), cfg_.n_dbs, state_.db_index);
    if (share.symbols.size() != e - b) throw ProtocolError("share has the wrong length");
    staged_ = std::move(share);
    return {MessageKind::kAck, {}};
  }

  Frame upload_combos(const Frame& req) {
    if (!staged_) throw ProtocolError("UploadCombos before UploadShare");
    UploadBundle bundle{decode_bundle(req.payload, cfg_.modulus)};
    state_ = db_apply_upload(state_, bundle, *staged_);
    staged_.reset();
    return {MessageKind::kAck, {}};
  }

  // NaiveGet: offset (4) | count (4) into the row-major flattened matrix.
  // NaiveResp: iteration (8) | offset (4) | count (4) | symbols.
  Frame naive_get(const Frame& req) {
    ByteReader r(req.payload);
    const std::uint64_t offset = r.u32();
    const std::uint64_t count = r.u32();
    r.expect_done("NaiveGet");
    const std::uint64_t total = cfg_.n_submodels * cfg_.submodel_len;
    if (offset + count > total) throw ProtocolError("NaiveGet range out of bounds");
    ByteWriter w;
    w.u64(state_.encoded.iteration);
    w.u32(static_cast<std::uint32_t>(offset));
    w.u32(static_cast<std::uint32_t>(count));
    for (std::uint64_t k = offset; k < offset + count; ++k) {
      write_element(w, state_.encoded.rows[k / cfg_.submodel_len][k % cfg_.submodel_len]);
    }
    return {MessageKind::kNaiveResp, std::move(w).bytes()};
  }

  Frame naive_push(const Frame& req) {
    Matrix updates = decode_bundle(req.payload, cfg_.modulus);
    check_shape(updates, cfg_.n_submodels, cfg_.submodel_len, "NaivePush");
    for (std::size_t l = 0; l < updates.size(); ++l) {
      state_.encoded.rows[l] = add(state_.encoded.rows[l], updates[l]);
    }
    state_.encoded.iteration += 1;
    return {MessageKind::kAck, {}};
  }

  ProtocolConfig cfg_;
  DatabaseState state_;
  Scheme scheme_;
  std::optional<ExclusiveShare> staged_;
  std::vector<Exchange> observed_;
  std::mutex mu_;
};

}  // namespace fedsub
