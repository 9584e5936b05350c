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

#include <cstdint>
#include <vector>

#include "fedsub/mdscode.hpp"

namespace fedsub {

// Field symbols moved in each phase of an iteration.
struct PhaseCounts {
  std::uint64_t download_shares = 0;
  std::uint64_t download_pir = 0;
  std::uint64_t upload_shares = 0;
  std::uint64_t upload_combos = 0;
  std::uint64_t naive_download = 0;
  std::uint64_t naive_upload = 0;

  std::uint64_t download() const { return download_shares + download_pir + naive_download; }
  std::uint64_t upload() const { return upload_shares + upload_combos + naive_upload; }
  std::uint64_t overall() const { return download() + upload(); }

  PhaseCounts& operator+=(const PhaseCounts& o) {
    download_shares += o.download_shares;
    download_pir += o.download_pir;
    upload_shares += o.upload_shares;
    upload_combos += o.upload_combos;
    naive_download += o.naive_download;
    naive_upload += o.naive_upload;
    return *this;
  }
  friend bool operator==(const PhaseCounts&, const PhaseCounts&) = default;
};

struct OverheadLedger {
  PhaseCounts total;
  std::vector<PhaseCounts> per_db;
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t trainer_calls = 0;
  CodecCounter codec;

  explicit OverheadLedger(std::size_t n_dbs = 0) : per_db(n_dbs) {}

  std::uint64_t download() const { return total.download(); }
  std::uint64_t upload() const { return total.upload(); }
  std::uint64_t overall() const { return total.overall(); }

  OverheadLedger& operator+=(const OverheadLedger& o) {
    total += o.total;
    if (per_db.size() < o.per_db.size()) per_db.resize(o.per_db.size());
    for (std::size_t i = 0; i < o.per_db.size(); ++i) per_db[i] += o.per_db[i];
    bytes_down += o.bytes_down;
    bytes_up += o.bytes_up;
    trainer_calls += o.trainer_calls;
    codec += o.codec;
    return *this;
  }
  friend bool operator==(const OverheadLedger&, const OverheadLedger&) = default;
};

}  // namespace fedsub
