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

// What a single database observes in one iteration: the frames it received
// and answered, then its stored state.

#include <cstdint>
#include <string>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/database.hpp"
#include "fedsub/transport.hpp"

namespace fedsub {

enum class ViewScope {
  kFull,           // queries, uploads, shares and stored state
  kWithoutShares,  // drops GetShare/UploadShare traffic and the stored share
};

struct ViewSegment {
  std::vector<Exchange> exchanges;
  Bytes snapshot;
  friend bool operator==(const ViewSegment&, const ViewSegment&) = default;
};

inline bool share_traffic(const Exchange& e) {
  if (e.request.size() < kFrameHeaderLen) return false;
  const auto kind = static_cast<MessageKind>(e.request[4]);
  return kind == MessageKind::kGetShare || kind == MessageKind::kUploadShare;
}

// Segment covering db.observed()[from, end) plus the current state.
inline ViewSegment view_segment(const DatabaseServer& db, std::size_t from, ViewScope scope) {
  ViewSegment seg;
  const auto& obs = db.observed();
  for (std::size_t k = from; k < obs.size(); ++k) {
    if (scope == ViewScope::kWithoutShares && share_traffic(obs[k])) continue;
    seg.exchanges.push_back(obs[k]);
  }
  seg.snapshot = db.snapshot(scope == ViewScope::kFull);
  return seg;
}

// Length-prefixed concatenation; used as a map key.
inline void append_key(std::string& key, const ViewSegment& seg) {
  auto put = [&](const Bytes& b) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(b.size()));
    key.append(w.bytes().begin(), w.bytes().end());
    key.append(b.begin(), b.end());
  };
  put(Bytes{static_cast<std::uint8_t>(seg.exchanges.size())});
  for (const auto& e : seg.exchanges) {
    put(e.request);
    put(e.response);
  }
  put(seg.snapshot);
}

}  // namespace fedsub
