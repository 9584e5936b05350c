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

// Square, non-systematic MDS code over F_q and the partition of a codeword
// into per-database exclusive shares.
//
// The code is rate 1: an n-symbol message maps to an n-symbol codeword
// through an invertible public matrix. Secrecy of a single share rests on the
// share being a strict subset of the codeword, not on the matrix.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/field.hpp"

namespace fedsub {

// Multiply-accumulate counters for the codec; the computation column of the
// overhead ledger reads these.
struct CodecCounter {
  std::uint64_t encodes = 0;
  std::uint64_t decodes = 0;
  std::uint64_t encode_macs = 0;
  std::uint64_t decode_macs = 0;

  CodecCounter& operator+=(const CodecCounter& o) {
    encodes += o.encodes;
    decodes += o.decodes;
    encode_macs += o.encode_macs;
    decode_macs += o.decode_macs;
    return *this;
  }
  friend bool operator==(const CodecCounter&, const CodecCounter&) = default;
};

// Row-major dense square matrix with small helpers; used for the mixing
// matrix and for rank checks.
class SquareMatrix {
 public:
  SquareMatrix(std::size_t n, const Modulus& m) : n_(n), m_(m), a_(n * n, Element::zero(m)) {}

  std::size_t dim() const { return n_; }
  const Modulus& modulus() const { return m_; }
  Element& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const Element& at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  std::span<const Element> row(std::size_t i) const { return {a_.data() + i * n_, n_}; }

  // Gauss-Jordan inverse; nullopt when singular.
  std::optional<SquareMatrix> inverse() const {
    SquareMatrix work = *this;
    SquareMatrix inv(n_, m_);
    for (std::size_t i = 0; i < n_; ++i) inv.at(i, i) = Element::one(m_);
    for (std::size_t col = 0; col < n_; ++col) {
      std::size_t pivot = col;
      while (pivot < n_ && work.at(pivot, col).is_zero()) ++pivot;
      if (pivot == n_) return std::nullopt;
      if (pivot != col) {
        for (std::size_t j = 0; j < n_; ++j) {
          std::swap(work.at(pivot, j), work.at(col, j));
          std::swap(inv.at(pivot, j), inv.at(col, j));
        }
      }
      const Element scale_by = work.at(col, col).inv();
      for (std::size_t j = 0; j < n_; ++j) {
        work.at(col, j) *= scale_by;
        inv.at(col, j) *= scale_by;
      }
      for (std::size_t i = 0; i < n_; ++i) {
        if (i == col || work.at(i, col).is_zero()) continue;
        const Element f = work.at(i, col);
        for (std::size_t j = 0; j < n_; ++j) {
          work.at(i, j) -= f * work.at(col, j);
          inv.at(i, j) -= f * inv.at(col, j);
        }
      }
    }
    return inv;
  }

 private:
  std::size_t n_;
  Modulus m_;
  Vec a_;
};

// Rank of an arbitrary list of equal-length rows.
inline std::size_t rank_of(std::vector<Vec> rows) {
  if (rows.empty()) return 0;
  const std::size_t cols = rows.front().size();
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows.size(); ++c) {
    std::size_t p = rank;
    while (p < rows.size() && rows[p][c].is_zero()) ++p;
    if (p == rows.size()) continue;
    std::swap(rows[p], rows[rank]);
    const Element inv = rows[rank][c].inv();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == rank || rows[i][c].is_zero()) continue;
      const Element f = rows[i][c] * inv;
      for (std::size_t j = 0; j < cols; ++j) rows[i][j] -= f * rows[rank][j];
    }
    ++rank;
  }
  return rank;
}

class MixingMatrix {
 public:
  enum class Kind : std::uint8_t { kVandermonde, kIdentityPlusOnes };

  // entry(i, j) = points[j]^i. Points must be distinct and q >= n.
  static MixingMatrix vandermonde(std::span<const Element> points) {
    const std::size_t n = points.size();
    if (n == 0) throw ConfigError("mixing matrix: empty point set");
    const Modulus m = points.front().modulus();
    if (m.value() < n) {
      throw ConfigError("mixing matrix: q=" + std::to_string(m.value()) + " < n=" + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (points[i] == points[j]) {
          throw ConfigError("mixing matrix: duplicate evaluation point " +
                            std::to_string(points[i].value()));
        }
      }
    }
    SquareMatrix a(n, m);
    for (std::size_t j = 0; j < n; ++j) {
      Element x = Element::one(m);
      for (std::size_t i = 0; i < n; ++i) {
        a.at(i, j) = x;
        x *= points[j];
      }
    }
    return MixingMatrix(std::move(a), Kind::kVandermonde);
  }

  // Points 1, 2, ..., n; requires q > n.
  static MixingMatrix vandermonde(std::size_t n, const Modulus& m) {
    if (m.value() <= n) {
      throw ConfigError("mixing matrix: default points 1.." + std::to_string(n) + " need q > " +
                        std::to_string(n) + ", got q=" + std::to_string(m.value()));
    }
    Vec pts;
    for (std::size_t i = 1; i <= n; ++i) pts.emplace_back(i, m);
    return vandermonde(pts);
  }

  // I + J (J all ones). Invertible iff n + 1 is nonzero mod q; used for tiny
  // audit fields where q <= n rules out a Vandermonde matrix.
  static MixingMatrix identity_plus_ones(std::size_t n, const Modulus& m) {
    if ((n + 1) % m.value() == 0) {
      throw ConfigError("mixing matrix: I+J is singular when q divides n+1");
    }
    SquareMatrix a(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) = Element(i == j ? 2 : 1, m);
    }
    return MixingMatrix(std::move(a), Kind::kIdentityPlusOnes);
  }

  std::size_t dim() const { return a_.dim(); }
  Kind kind() const { return kind_; }
  const Modulus& modulus() const { return a_.modulus(); }
  const SquareMatrix& matrix() const { return a_; }
  const SquareMatrix& inverse() const { return inv_; }

  // mds_encode: codeword = A * message; n^2 multiply-accumulates.
  Vec encode(std::span<const Element> message, CodecCounter* counter = nullptr) const {
    Vec out = apply(a_, message, "mds_encode");
    if (counter) {
      counter->encodes += 1;
      counter->encode_macs += dim() * dim();
    }
    return out;
  }

  // mds_decode: message = A^{-1} * codeword with the inverse precomputed at
  // construction; n^2 multiply-accumulates per call.
  Vec decode(std::span<const Element> codeword, CodecCounter* counter = nullptr) const {
    Vec out = apply(inv_, codeword, "mds_decode");
    if (counter) {
      counter->decodes += 1;
      counter->decode_macs += dim() * dim();
    }
    return out;
  }

 private:
  MixingMatrix(SquareMatrix a, Kind kind) : a_(std::move(a)), inv_(a_.dim(), a_.modulus()), kind_(kind) {
    auto inv = a_.inverse();
    if (!inv) throw ConfigError("mixing matrix is singular");
    inv_ = std::move(*inv);
    for (std::size_t i = 0; i < dim(); ++i) {
      if (is_basis_vector(a_.row(i))) {
        throw ConfigError("mixing matrix is systematic: row " + std::to_string(i) + " is a unit vector");
      }
    }
  }

  static bool is_basis_vector(std::span<const Element> row) {
    std::size_t nonzero = 0;
    bool unit = false;
    for (const auto& e : row) {
      if (!e.is_zero()) {
        ++nonzero;
        unit = e.value() == 1;
      }
    }
    return nonzero == 1 && unit;
  }

  static Vec apply(const SquareMatrix& a, std::span<const Element> x, const char* what) {
    if (x.size() != a.dim()) {
      throw ProtocolError(std::string(what) + ": length " + std::to_string(x.size()) + " != " +
                          std::to_string(a.dim()));
    }
    Vec out;
    out.reserve(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
      Element acc = Element::zero(a.modulus());
      for (std::size_t j = 0; j < a.dim(); ++j) acc += a.at(i, j) * x[j];
      out.push_back(acc);
    }
    return out;
  }

  SquareMatrix a_;
  SquareMatrix inv_;
  Kind kind_;
};

// c_{t,i}: block i of the codeword of the iteration-t message.
struct ExclusiveShare {
  std::uint8_t db_index = 0;  // 0-based
  std::uint64_t iteration = 0;
  Vec symbols;

  friend bool operator==(const ExclusiveShare&, const ExclusiveShare&) = default;
};

// Contiguous near-equal blocks: the first (n mod N) blocks hold one extra
// symbol. When N divides n every block holds exactly n/N symbols.
inline std::pair<std::size_t, std::size_t> share_bounds(std::size_t n, std::size_t n_dbs, std::size_t i) {
  const std::size_t base = n / n_dbs;
  const std::size_t extra = n % n_dbs;
  const std::size_t begin = i * base + std::min(i, extra);
  const std::size_t len = base + (i < extra ? 1 : 0);
  return {begin, begin + len};
}

inline std::vector<ExclusiveShare> split_shares(std::span<const Element> codeword, std::size_t n_dbs,
                                                std::uint64_t iteration) {
  if (n_dbs == 0 || n_dbs > 255) throw ConfigError("split_shares: N must be in [1, 255]");
  if (n_dbs > codeword.size()) throw ConfigError("split_shares: more databases than symbols");
  std::vector<ExclusiveShare> out;
  out.reserve(n_dbs);
  for (std::size_t i = 0; i < n_dbs; ++i) {
    auto [b, e] = share_bounds(codeword.size(), n_dbs, i);
    out.push_back({static_cast<std::uint8_t>(i), iteration, Vec(codeword.begin() + b, codeword.begin() + e)});
  }
  return out;
}

// Exact inverse of split_shares. Shares may arrive in any order.
inline Vec join_shares(std::span<const ExclusiveShare> shares, std::size_t n_dbs) {
  std::vector<const ExclusiveShare*> slot(n_dbs, nullptr);
  for (const auto& s : shares) {
    if (s.db_index >= n_dbs) throw ProtocolError("join_shares: db index out of range");
    if (slot[s.db_index]) throw ProtocolError("join_shares: duplicate share");
    slot[s.db_index] = &s;
  }
  Vec out;
  for (std::size_t i = 0; i < n_dbs; ++i) {
    if (!slot[i]) throw ProtocolError("incomplete share set");
    if (slot[i]->iteration != slot[0]->iteration) throw ProtocolError("join_shares: iteration mismatch");
    out.insert(out.end(), slot[i]->symbols.begin(), slot[i]->symbols.end());
  }
  for (std::size_t i = 0; i < n_dbs; ++i) {
    auto [b, e] = share_bounds(out.size(), n_dbs, i);
    if (slot[i]->symbols.size() != e - b) throw ProtocolError("join_shares: share length mismatch");
  }
  return out;
}

// Wire: db_index (1) | iteration (8) | count (4) | count * symbol (4 each).
inline void write_share(ByteWriter& w, const ExclusiveShare& s) {
  w.u8(s.db_index);
  w.u64(s.iteration);
  w.u32(static_cast<std::uint32_t>(s.symbols.size()));
  write_vec(w, s.symbols);
}

inline ExclusiveShare read_share(ByteReader& r, const Modulus& m) {
  ExclusiveShare s;
  s.db_index = r.u8();
  s.iteration = r.u64();
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * 4 > r.remaining()) throw DecodeError("share: truncated symbols");
  s.symbols = read_vec(r, count, m);
  return s;
}

inline Bytes encode_share(const ExclusiveShare& s) {
  ByteWriter w;
  write_share(w, s);
  return std::move(w).bytes();
}

inline ExclusiveShare decode_share(std::span<const std::uint8_t> b, const Modulus& m) {
  ByteReader r(b);
  ExclusiveShare s = read_share(r, m);
  r.expect_done("share");
  return s;
}

}  // namespace fedsub
