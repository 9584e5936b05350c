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

// Download-optimal private information retrieval of one message out of K
// from N replicated, non-colluding databases.
//
// Each message is cut into subpacket groups of L = N^K symbols; every group
// is retrieved by an independent plan. A plan is built in rounds
// k = 1..K. In round k every database receives, for each k-subset S of
// messages, (N-1)^(k-1) sums over exactly S:
//   - if S excludes the desired message, each sum takes fresh symbols;
//   - if S contains it, each sum is one fresh desired symbol plus an
//     undesired (k-1)-sum that some other database answered in round k-1.
// All indices are pushed through independent uniform permutations, one per
// message, so each database sees the same query shape whatever the desired
// index is. Total download per group is N(N^K - 1)/(N - 1) = (1 + beta) L.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/field.hpp"
#include "fedsub/rng.hpp"

namespace fedsub {

inline std::uint64_t checked_pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (out > UINT32_MAX / base) throw ConfigError("PIR subpacketization N^K exceeds 2^32");
    out *= base;
  }
  return out;
}

struct PirConfig {
  std::size_t n_dbs = 2;
  std::size_t n_messages = 1;
  std::uint64_t message_len = 2;

  // Throws ConfigError unless N >= 2, 1 <= K <= 16 and N^K divides s.
  static PirConfig make(std::size_t n_dbs, std::size_t n_messages, std::uint64_t message_len) {
    if (n_dbs < 2) throw ConfigError("PIR needs N >= 2 databases");
    if (n_messages < 1 || n_messages > 16) throw ConfigError("PIR needs 1 <= K <= 16 messages");
    PirConfig c{n_dbs, n_messages, message_len};
    const std::uint64_t l = c.subpacket_len();
    if (message_len == 0 || message_len % l != 0) {
      throw ConfigError("s=" + std::to_string(message_len) + " is not a positive multiple of N^K=" +
                        std::to_string(l));
    }
    return c;
  }

  // L = N^K.
  std::uint64_t subpacket_len() const { return checked_pow(n_dbs, n_messages); }
  std::uint64_t groups() const { return message_len / subpacket_len(); }
  // (N^K - 1)/(N - 1) sums per database per group.
  std::uint64_t sums_per_db() const { return (subpacket_len() - 1) / (n_dbs - 1); }
  std::uint64_t download_per_group() const { return n_dbs * sums_per_db(); }
};

// Symbols downloaded for one full message: (1 + beta) s.
inline std::uint64_t pir_download_count(const PirConfig& cfg) { return cfg.download_per_group() * cfg.groups(); }

struct SumTerm {
  std::uint16_t message = 0;
  std::uint32_t symbol = 0;
  friend bool operator==(const SumTerm&, const SumTerm&) = default;
  friend auto operator<=>(const SumTerm&, const SumTerm&) = default;
};

// A k-sum: at most one term per message, terms ordered by message.
struct SumSpec {
  std::vector<SumTerm> terms;
  friend bool operator==(const SumSpec&, const SumSpec&) = default;

  std::uint32_t mask() const {
    std::uint32_t m = 0;
    for (const auto& t : terms) m |= 1u << t.message;
    return m;
  }
};

// How one desired symbol comes out of the answers.
struct Recovery {
  std::uint32_t logical = 0;  // pre-permutation index of the desired symbol
  std::size_t db = 0;
  std::size_t pos = 0;
  std::optional<std::pair<std::size_t, std::size_t>> side;  // (db, pos) to subtract
};

struct DecodeState {
  std::size_t desired = 0;
  std::vector<std::vector<std::uint32_t>> perms;  // perms[m][logical] = symbol index
  std::vector<Recovery> recovery;
};

struct QueryPlan {
  std::uint32_t group = 0;
  std::vector<std::vector<SumSpec>> per_db;
  DecodeState state;
};

namespace detail {

// Nonempty subsets of [K] as bitmasks, by size then lexicographically.
inline std::vector<std::uint32_t> canonical_subsets(std::size_t k) {
  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 1; m < (1u << k); ++m) masks.push_back(m);
  auto elems = [](std::uint32_t m) {
    std::vector<int> e;
    for (int i = 0; i < 32; ++i) {
      if (m & (1u << i)) e.push_back(i);
    }
    return e;
  };
  std::sort(masks.begin(), masks.end(), [&](std::uint32_t a, std::uint32_t b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    if (pa != pb) return pa < pb;
    return elems(a) < elems(b);
  });
  return masks;
}

}  // namespace detail

// Deterministic core: builds the plan for one group from explicit
// permutations. perms[m] must be a permutation of [0, L).
inline QueryPlan pir_plan_with_permutations(std::size_t desired, const PirConfig& cfg, std::uint32_t group,
                                            std::vector<std::vector<std::uint32_t>> perms) {
  const std::size_t n = cfg.n_dbs;
  const std::size_t k_total = cfg.n_messages;
  const std::uint64_t l = cfg.subpacket_len();
  if (desired >= k_total) {
    throw ProtocolError("PIR desired index " + std::to_string(desired) + " out of range [0, " +
                        std::to_string(k_total) + ")");
  }
  if (perms.size() != k_total) throw ProtocolError("PIR: need one permutation per message");
  for (const auto& p : perms) {
    if (p.size() != l) throw ProtocolError("PIR: permutation length != N^K");
  }

  const std::uint32_t desired_bit = 1u << desired;
  std::vector<std::uint32_t> next(k_total, 0);
  std::vector<std::vector<SumSpec>> logical(n);
  // pool[db][mask]: positions at db of undesired-only sums over mask.
  std::vector<std::map<std::uint32_t, std::vector<std::size_t>>> pool(n);
  std::vector<Recovery> recovery;

  const auto subsets = detail::canonical_subsets(k_total);
  for (std::size_t k = 1; k <= k_total; ++k) {
    for (std::size_t db = 0; db < n; ++db) {
      for (std::uint32_t mask : subsets) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        if (!(mask & desired_bit)) {
          const std::uint64_t count = checked_pow(n - 1, k - 1);
          for (std::uint64_t c = 0; c < count; ++c) {
            SumSpec s;
            for (std::size_t m = 0; m < k_total; ++m) {
              if (mask & (1u << m)) s.terms.push_back({static_cast<std::uint16_t>(m), next[m]++});
            }
            pool[db][mask].push_back(logical[db].size());
            logical[db].push_back(std::move(s));
          }
        } else if (k == 1) {
          recovery.push_back({next[desired], db, logical[db].size(), std::nullopt});
          logical[db].push_back({{{static_cast<std::uint16_t>(desired), next[desired]++}}});
        } else {
          const std::uint32_t rest = mask & ~desired_bit;
          for (std::size_t other = 0; other < n; ++other) {
            if (other == db) continue;
            for (std::size_t pos : pool[other][rest]) {
              SumSpec s = logical[other][pos];
              s.terms.push_back({static_cast<std::uint16_t>(desired), next[desired]});
              std::sort(s.terms.begin(), s.terms.end());
              recovery.push_back({next[desired]++, db, logical[db].size(), std::make_pair(other, pos)});
              logical[db].push_back(std::move(s));
            }
          }
        }
      }
    }
  }
  if (next[desired] != l) throw ProtocolError("PIR plan construction did not cover the desired message");

  QueryPlan plan;
  plan.group = group;
  plan.per_db = std::move(logical);
  for (auto& sums : plan.per_db) {
    for (auto& s : sums) {
      for (auto& t : s.terms) t.symbol = perms[t.message][t.symbol];
    }
  }
  plan.state.desired = desired;
  plan.state.perms = std::move(perms);
  plan.state.recovery = std::move(recovery);
  return plan;
}

// pir_generate_queries for one group: draws the per-message permutations
// from rng, then builds the plan.
inline QueryPlan pir_generate_queries(std::size_t desired, const PirConfig& cfg, std::uint32_t group, Rng& rng) {
  std::vector<std::vector<std::uint32_t>> perms;
  perms.reserve(cfg.n_messages);
  for (std::size_t m = 0; m < cfg.n_messages; ++m) {
    perms.push_back(rng.permutation(static_cast<std::uint32_t>(cfg.subpacket_len())));
  }
  return pir_plan_with_permutations(desired, cfg, group, std::move(perms));
}

// Database side: F_q sum of the referenced symbols of group `group`.
// rows[m] is message m in full (all groups).
inline Vec pir_answer(std::span<const SumSpec> sums, std::span<const Vec> rows, std::uint32_t group,
                      std::uint64_t subpacket_len) {
  if (rows.empty()) throw ProtocolError("PIR answer: empty store");
  const Modulus m = rows.front().front().modulus();
  Vec out;
  out.reserve(sums.size());
  for (const auto& s : sums) {
    Element acc = Element::zero(m);
    for (const auto& t : s.terms) {
      if (t.message >= rows.size() || t.symbol >= subpacket_len) {
        throw ProtocolError("PIR query index out of range");
      }
      const std::uint64_t at = static_cast<std::uint64_t>(group) * subpacket_len + t.symbol;
      if (at >= rows[t.message].size()) throw ProtocolError("PIR query group out of range");
      acc += rows[t.message][at];
    }
    out.push_back(acc);
  }
  return out;
}

// Recovers the L desired symbols of one group, in symbol order.
inline Vec pir_decode(std::span<const Vec> answers, const QueryPlan& plan) {
  if (answers.size() != plan.per_db.size()) throw ProtocolError("PIR decode failure: missing answer lists");
  for (std::size_t db = 0; db < answers.size(); ++db) {
    if (answers[db].size() != plan.per_db[db].size()) {
      throw ProtocolError("PIR decode failure: answer list " + std::to_string(db) + " has " +
                          std::to_string(answers[db].size()) + " symbols, expected " +
                          std::to_string(plan.per_db[db].size()));
    }
  }
  const auto& perm = plan.state.perms.at(plan.state.desired);
  std::vector<std::optional<Element>> out(perm.size());
  for (const auto& rec : plan.state.recovery) {
    Element v = answers[rec.db][rec.pos];
    if (rec.side) v -= answers[rec.side->first][rec.side->second];
    auto& slot = out.at(perm.at(rec.logical));
    if (slot) throw ProtocolError("PIR decode failure: symbol recovered twice");
    slot = v;
  }
  Vec result;
  result.reserve(out.size());
  for (auto& v : out) {
    if (!v) throw ProtocolError("PIR decode failure: symbol not recovered");
    result.push_back(*v);
  }
  return result;
}

// Per-database structural signature: number of sums over each subset.
inline std::map<std::uint32_t, std::size_t> subset_signature(std::span<const SumSpec> sums) {
  std::map<std::uint32_t, std::size_t> sig;
  for (const auto& s : sums) ++sig[s.mask()];
  return sig;
}

// SumSpec wire: k (1) | k * (message (2) | symbol (4)).
inline void write_sum(ByteWriter& w, const SumSpec& s) {
  w.u8(static_cast<std::uint8_t>(s.terms.size()));
  for (const auto& t : s.terms) {
    w.u16(t.message);
    w.u32(t.symbol);
  }
}

inline SumSpec read_sum(ByteReader& r) {
  SumSpec s;
  const std::uint8_t k = r.u8();
  if (k == 0) throw DecodeError("SumSpec with zero terms");
  std::uint32_t seen = 0;
  for (std::uint8_t i = 0; i < k; ++i) {
    SumTerm t;
    t.message = r.u16();
    t.symbol = r.u32();
    if (t.message >= 32 || (seen & (1u << t.message))) throw DecodeError("SumSpec repeats a message");
    seen |= 1u << t.message;
    s.terms.push_back(t);
  }
  return s;
}

// PirQuery payload: group (4) | count (4) | count * SumSpec.
inline Bytes encode_pir_query(std::uint32_t group, std::span<const SumSpec> sums) {
  ByteWriter w;
  w.u32(group);
  w.u32(static_cast<std::uint32_t>(sums.size()));
  for (const auto& s : sums) write_sum(w, s);
  return std::move(w).bytes();
}

inline std::pair<std::uint32_t, std::vector<SumSpec>> decode_pir_query(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  const std::uint32_t group = r.u32();
  const std::uint32_t count = r.u32();
  if (count > r.remaining()) throw DecodeError("PirQuery: count exceeds payload");
  std::vector<SumSpec> sums;
  sums.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) sums.push_back(read_sum(r));
  r.expect_done("PirQuery");
  return {group, std::move(sums)};
}

// PirAnswer payload: group (4) | count (4) | count * symbol (4).
inline Bytes encode_pir_answer(std::uint32_t group, std::span<const Element> symbols) {
  ByteWriter w;
  w.u32(group);
  w.u32(static_cast<std::uint32_t>(symbols.size()));
  write_vec(w, symbols);
  return std::move(w).bytes();
}

inline std::pair<std::uint32_t, Vec> decode_pir_answer(std::span<const std::uint8_t> b, const Modulus& m) {
  ByteReader r(b);
  const std::uint32_t group = r.u32();
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * 4 != r.remaining()) throw DecodeError("PirAnswer: length mismatch");
  Vec v = read_vec(r, count, m);
  return {group, std::move(v)};
}

}  // namespace fedsub
