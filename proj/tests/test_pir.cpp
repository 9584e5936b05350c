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


#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fedsub/mdscode.hpp"
#include "fedsub/pir.hpp"

namespace fedsub {
namespace {

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

std::uint64_t ipow(std::uint64_t b, std::uint64_t e) {
  std::uint64_t out = 1;
  while (e--) out *= b;
  return out;
}

// Treats every downloaded sum as a linear equation over the K*L stored
// symbols and asks, by elimination, whether each desired symbol's unit
// vector lies in the span. Independent of the plan's recovery bookkeeping.
bool linearly_decodable(const QueryPlan& plan, std::size_t k_msgs, std::size_t l, std::size_t desired) {
  const Modulus m(65537);
  std::vector<Vec> rows;
  for (const auto& sums : plan.per_db) {
    for (const auto& s : sums) {
      Vec row = zeros(k_msgs * l, m);
      for (const auto& t : s.terms) row[t.message * l + t.symbol] += Element::one(m);
      rows.push_back(row);
    }
  }
  const std::size_t base = rank_of(rows);
  for (std::size_t j = 0; j < l; ++j) {
    auto with = rows;
    Vec unit = zeros(k_msgs * l, m);
    unit[desired * l + j] = Element::one(m);
    with.push_back(unit);
    if (rank_of(with) != base) return false;
  }
  return true;
}

TEST(PirConfig, CountsAndValidation) {
  const auto c = PirConfig::make(2, 2, 4);
  EXPECT_EQ(c.subpacket_len(), 4u);
  EXPECT_EQ(c.sums_per_db(), 3u);
  EXPECT_EQ(pir_download_count(c), 6u);
  EXPECT_EQ(pir_download_count(PirConfig::make(3, 2, 9)), 12u);
  EXPECT_EQ(pir_download_count(PirConfig::make(2, 1, 6)), 6u);
  EXPECT_THROW(PirConfig::make(1, 2, 4), ConfigError);
  EXPECT_THROW(PirConfig::make(2, 2, 6), ConfigError);
  EXPECT_THROW(PirConfig::make(2, 0, 4), ConfigError);
}

TEST(PirConfig, LargeDownloadCountMatchesGeometricSum) {
  // s + s/2 + s/4 + ... + s/2^7 with s = 256.
  std::uint64_t oracle = 0;
  for (std::uint64_t k = 0; k < 8; ++k) oracle += 256 >> k;
  EXPECT_EQ(oracle, 510u);
  EXPECT_EQ(pir_download_count(PirConfig::make(2, 8, 256)), oracle);
}

TEST(PirPlan, TwoByTwoShape) {
  const auto cfg = PirConfig::make(2, 2, 4);
  Rng rng(1);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto plan = pir_generate_queries(d, cfg, 0, rng);
    std::size_t total = 0;
    for (const auto& sums : plan.per_db) {
      ASSERT_EQ(sums.size(), 3u);
      total += sums.size();
      const auto sig = subset_signature(sums);
      EXPECT_EQ(sig.at(0b01), 1u);
      EXPECT_EQ(sig.at(0b10), 1u);
      EXPECT_EQ(sig.at(0b11), 1u);
    }
    EXPECT_EQ(total, 6u);
  }
}

TEST(PirPlan, DesiredIndexOutOfRange) {
  Rng rng(1);
  EXPECT_THROW(pir_generate_queries(2, PirConfig::make(2, 2, 4), 0, rng), ProtocolError);
}

// Invariants (counts, side information, freshness, decodability) over all
// small configurations and every desired index.
TEST(PirPlan, StructuralInvariants) {
  Rng rng(7);
  for (std::size_t n : {2u, 3u}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      const auto cfg = PirConfig::make(n, k, ipow(n, k));
      const std::size_t l = cfg.subpacket_len();
      for (std::size_t d = 0; d < k; ++d) {
        for (int rep = 0; rep < 5; ++rep) {
          const auto plan = pir_generate_queries(d, cfg, 0, rng);
          std::size_t total = 0;
          std::set<std::vector<SumTerm>> all_sums;
          for (const auto& sums : plan.per_db) {
            for (const auto& s : sums) all_sums.insert(s.terms);
          }
          for (std::size_t db = 0; db < n; ++db) {
            const auto& sums = plan.per_db[db];
            total += sums.size();
            ASSERT_EQ(sums.size(), (ipow(n, k) - 1) / (n - 1));
            // Per-subset counts (N-1)^{k-1}.
            const auto sig = subset_signature(sums);
            for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
              const auto sz = static_cast<std::uint64_t>(std::popcount(mask));
              ASSERT_EQ(sig.count(mask) ? sig.at(mask) : 0u, ipow(n - 1, sz - 1));
            }
            // Desired symbols never repeat at one database; neither do the
            // undesired symbols a database sees.
            std::map<std::uint16_t, std::set<std::uint32_t>> seen;
            for (const auto& s : sums) {
              for (const auto& t : s.terms) ASSERT_TRUE(seen[t.message].insert(t.symbol).second);
            }
            // Every desired k-sum (k >= 2) carries an undesired part that is
            // a query at another database.
            for (const auto& s : sums) {
              if (s.terms.size() < 2 || !(s.mask() & (1u << d))) continue;
              std::vector<SumTerm> rest;
              for (const auto& t : s.terms) {
                if (t.message != d) rest.push_back(t);
              }
              bool elsewhere = false;
              for (std::size_t other = 0; other < n; ++other) {
                if (other == db) continue;
                for (const auto& o : plan.per_db[other]) elsewhere |= o.terms == rest;
              }
              ASSERT_TRUE(elsewhere);
            }
          }
          ASSERT_EQ(total, cfg.download_per_group());
          ASSERT_EQ(total, pir_download_count(cfg));
          ASSERT_TRUE(linearly_decodable(plan, k, l, d));
        }
      }
    }
  }
}

TEST(PirPlan, TotalsFollowBinomialSum) {
  for (std::size_t n : {2u, 3u, 4u}) {
    for (std::size_t k : {1u, 2u, 3u, 4u}) {
      std::uint64_t per_db = 0;
      for (std::size_t j = 1; j <= k; ++j) per_db += binom(k, j) * ipow(n - 1, j - 1);
      const auto cfg = PirConfig::make(n, k, ipow(n, k));
      EXPECT_EQ(cfg.sums_per_db(), per_db);
      EXPECT_EQ(cfg.download_per_group(), n * per_db);
    }
  }
}

TEST(PirDecode, RecoversDesiredRowAcrossGroups) {
  Rng rng(21);
  for (std::size_t n : {2u, 3u}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      const std::uint64_t l = ipow(n, k);
      const auto cfg = PirConfig::make(n, k, 2 * l);
      const Modulus m(65537);
      std::vector<Vec> store;
      for (std::size_t i = 0; i < k; ++i) store.push_back(random_vec(rng, 2 * l, m));
      for (std::size_t d = 0; d < k; ++d) {
        Vec got;
        for (std::uint32_t g = 0; g < cfg.groups(); ++g) {
          const auto plan = pir_generate_queries(d, cfg, g, rng);
          std::vector<Vec> answers;
          for (const auto& sums : plan.per_db) answers.push_back(pir_answer(sums, store, g, l));
          const Vec part = pir_decode(answers, plan);
          got.insert(got.end(), part.begin(), part.end());
        }
        ASSERT_EQ(got, store[d]) << "N=" << n << " K=" << k << " d=" << d;
      }
    }
  }
}

TEST(PirDecode, ZeroStoreGivesZero) {
  const auto cfg = PirConfig::make(2, 2, 4);
  const Modulus m(7);
  std::vector<Vec> store(2, zeros(4, m));
  Rng rng(2);
  const auto plan = pir_generate_queries(1, cfg, 0, rng);
  std::vector<Vec> answers;
  for (const auto& sums : plan.per_db) answers.push_back(pir_answer(sums, store, 0, 4));
  EXPECT_EQ(pir_decode(answers, plan), zeros(4, m));
}

TEST(PirDecode, TamperedAnswerIsCaught) {
  const auto cfg = PirConfig::make(2, 2, 4);
  const Modulus m(65537);
  Rng rng(4);
  std::vector<Vec> store{random_vec(rng, 4, m), random_vec(rng, 4, m)};
  const auto plan = pir_generate_queries(0, cfg, 0, rng);
  std::vector<Vec> answers;
  for (const auto& sums : plan.per_db) answers.push_back(pir_answer(sums, store, 0, 4));
  for (std::size_t db = 0; db < 2; ++db) {
    for (std::size_t pos = 0; pos < answers[db].size(); ++pos) {
      auto bad = answers;
      bad[db][pos] += Element::one(m);
      bool detected = false;
      try {
        detected = pir_decode(bad, plan) != store[0];
      } catch (const ProtocolError&) {
        detected = true;
      }
      // Sums over undesired messages only carry no desired information.
      const bool used = plan.per_db[db][pos].mask() & 1u ||
                        std::any_of(plan.state.recovery.begin(), plan.state.recovery.end(), [&](const Recovery& r) {
                          return r.side && r.side->first == db && r.side->second == pos;
                        });
      EXPECT_EQ(detected, used) << "db " << db << " pos " << pos;
    }
  }
  auto missing = answers;
  missing[1].pop_back();
  EXPECT_THROW(pir_decode(missing, plan), ProtocolError);
}

TEST(PirAnswer, SumsAndBounds) {
  const Modulus m(11);
  std::vector<Vec> store{from_values({1, 2, 3, 4}, m), from_values({5, 6, 7, 10}, m)};
  std::vector<SumSpec> sums{{{{0, 2}}}, {{{0, 1}, {1, 3}}}};
  EXPECT_EQ(to_values(pir_answer(sums, store, 0, 4)), (std::vector<std::uint64_t>{3, 1}));
  std::vector<SumSpec> bad{{{{0, 4}}}};
  EXPECT_THROW(pir_answer(bad, store, 0, 4), ProtocolError);
  EXPECT_THROW(pir_answer(sums, store, 1, 4), ProtocolError);
}

TEST(PirWire, QueryAndAnswerRoundTrip) {
  Rng rng(8);
  const auto plan = pir_generate_queries(1, PirConfig::make(3, 2, 9), 5, rng);
  const Bytes q = encode_pir_query(5, plan.per_db[2]);
  const auto [group, sums] = decode_pir_query(q);
  EXPECT_EQ(group, 5u);
  EXPECT_EQ(sums, plan.per_db[2]);
  // First sum is a singleton: k=1, message 0 (2 bytes), symbol (4 bytes).
  EXPECT_EQ(q[8], 1);
  EXPECT_EQ(q[9], 0);
  EXPECT_EQ(q[10], 0);

  const Modulus m(65537);
  const Vec sym = from_values({9, 65536}, m);
  const auto [g2, back] = decode_pir_answer(encode_pir_answer(3, sym), m);
  EXPECT_EQ(g2, 3u);
  EXPECT_EQ(back, sym);

  Bytes repeat{0, 0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_THROW(decode_pir_query(repeat), DecodeError);
}

std::vector<std::vector<std::uint32_t>> all_perms(std::uint32_t n) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  std::vector<std::vector<std::uint32_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// Exact: every tuple of permutations, both desired indices, each database.
TEST(PirPrivacy, ExhaustiveTwoByTwo) {
  const auto cfg = PirConfig::make(2, 2, 4);
  const auto perms = all_perms(4);
  std::vector<std::map<Bytes, int>> dist[2];
  for (std::size_t d = 0; d < 2; ++d) {
    dist[d].resize(2);
    for (const auto& p0 : perms) {
      for (const auto& p1 : perms) {
        const auto plan = pir_plan_with_permutations(d, cfg, 0, {p0, p1});
        for (std::size_t db = 0; db < 2; ++db) ++dist[d][db][encode_pir_query(0, plan.per_db[db])];
      }
    }
  }
  for (std::size_t db = 0; db < 2; ++db) {
    EXPECT_EQ(dist[0][db], dist[1][db]) << "database " << db;
    int total = 0;
    for (const auto& [k, c] : dist[0][db]) total += c;
    EXPECT_EQ(total, 576);
  }
}

// Sampled: two-sample chi-squared over hashed query bytes at N=3, K=2.
TEST(PirPrivacy, ChiSquaredThreeByTwo) {
  const auto cfg = PirConfig::make(3, 2, 9);
  constexpr int kBuckets = 16;
  constexpr int kSamples = 10000;
  for (std::size_t db = 0; db < 3; ++db) {
    std::array<double, kBuckets> obs[2]{};
    for (std::size_t d = 0; d < 2; ++d) {
      Rng rng(1000 + 10 * db + d);
      for (int i = 0; i < kSamples; ++i) {
        const auto plan = pir_generate_queries(d, cfg, 0, rng);
        const Bytes b = encode_pir_query(0, plan.per_db[db]);
        const std::size_t h = std::hash<std::string>{}(std::string(b.begin(), b.end()));
        obs[d][h % kBuckets] += 1;
      }
    }
    double chi2 = 0;
    for (int k = 0; k < kBuckets; ++k) {
      const double tot = obs[0][k] + obs[1][k];
      if (tot == 0) continue;
      for (int d = 0; d < 2; ++d) {
        const double e = tot / 2;
        chi2 += (obs[d][k] - e) * (obs[d][k] - e) / e;
      }
    }
    EXPECT_LT(chi2, 30.578) << "database " << db;  // df = 15, alpha = 0.01
  }
}

TEST(PirPrivacy, SignatureIndependentOfDesiredIndex) {
  Rng rng(3);
  const auto cfg = PirConfig::make(3, 3, 27);
  const auto ref = pir_generate_queries(0, cfg, 0, rng);
  for (std::size_t d = 1; d < 3; ++d) {
    const auto plan = pir_generate_queries(d, cfg, 0, rng);
    for (std::size_t db = 0; db < 3; ++db) {
      EXPECT_EQ(subset_signature(plan.per_db[db]), subset_signature(ref.per_db[db]));
    }
  }
}

}  // namespace
}  // namespace fedsub
