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

#include <cstdint>

#include "fedsub/fedsub.hpp"

namespace fedsub {
namespace {

TEST(Naive, TwoByTwoLedger) {
  SimulationOptions opt;
  opt.scheme = Scheme::kNaive;
  Simulation sim(ProtocolConfig::make(2, 2, 4, 65537), opt);
  const auto res = sim.step(0);
  EXPECT_EQ(res.ledger.download(), 8u);
  EXPECT_EQ(res.ledger.upload(), 16u);
  EXPECT_EQ(res.ledger.overall(), 24u);
  EXPECT_EQ(res.ledger.trainer_calls, 2u);
  EXPECT_EQ(res.ledger.codec.encodes + res.ledger.codec.decodes, 0u);
  for (const auto& per : res.ledger.per_db) EXPECT_EQ(per.naive_download, 4u);
}

TEST(Naive, LedgerAcrossGrid) {
  for (std::size_t n : {2u, 3u}) {
    for (std::size_t r : {2u, 3u, 4u}) {
      std::uint64_t s = 1;
      for (std::size_t k = 0; k < r; ++k) s *= n;
      SimulationOptions opt;
      opt.scheme = Scheme::kNaive;
      Simulation sim(ProtocolConfig::make(n, r, s, 65537), opt);
      const auto res = sim.step();
      EXPECT_EQ(res.ledger.download(), r * s);
      EXPECT_EQ(res.ledger.upload(), r * s * n);
      EXPECT_EQ(res.ledger.overall(), r * s * (n + 1));
      EXPECT_EQ(res.ledger.trainer_calls, r);
      for (const auto& per : res.ledger.per_db) EXPECT_EQ(per.naive_download, r * s / n);
    }
  }
}

TEST(Naive, TrainsEveryRowAndReplicates) {
  SimulationOptions opt;
  opt.scheme = Scheme::kNaive;
  opt.seed = 3;
  const auto cfg = ProtocolConfig::make(3, 2, 9, 65537);
  Simulation sim(cfg, opt);
  Matrix plain = initial_params(cfg, 3);
  auto trainer = make_trainer(TrainerKind::kPseudorandom, seeds::trainer(3));
  for (std::uint64_t t = 1; t <= 5; ++t) {
    sim.step();
    for (auto& row : plain) row = trainer->train(row, t);
    ASSERT_TRUE(sim.replicated());
    ASSERT_EQ(sim.databases()[1].state().encoded.rows, plain);
  }
  EXPECT_EQ(sim.demasked(), plain);
}

// Proposed minus naive overall is 2r + (3 - r + beta) s.
TEST(Naive, DifferenceToProposed) {
  struct Case {
    std::size_t n, r, s;
  };
  for (const auto& c : {Case{2, 2, 4}, Case{2, 3, 8}, Case{3, 2, 9}, Case{2, 4, 16}}) {
    SimulationOptions naive_opt;
    naive_opt.scheme = Scheme::kNaive;
    Simulation naive(ProtocolConfig::make(c.n, c.r, c.s, 65537), naive_opt);
    Simulation proposed(ProtocolConfig::make(c.n, c.r, c.s, 65537), {});
    naive.step();
    proposed.step();
    // beta * s, term by term.
    std::int64_t beta_s = 0, div = 1;
    for (std::size_t k = 1; k < c.r; ++k) beta_s += static_cast<std::int64_t>(c.s) / (div *= c.n);
    const auto r = static_cast<std::int64_t>(c.r), s = static_cast<std::int64_t>(c.s);
    const std::int64_t expected = 2 * r + 3 * s - r * s + beta_s;
    EXPECT_EQ(static_cast<std::int64_t>(proposed.ledger().overall()) -
                  static_cast<std::int64_t>(naive.ledger().overall()),
              expected);
  }
  // The sign flips: the proposed scheme wins at N=2, r=8, s=256.
  EXPECT_LT(closed_form(2, 8, 256, Scheme::kProposed).overall, closed_form(2, 8, 256, Scheme::kNaive).overall);
  EXPECT_GT(closed_form(2, 2, 4, Scheme::kProposed).overall, closed_form(2, 2, 4, Scheme::kNaive).overall);
}

TEST(Naive, RejectsProposedTraffic) {
  const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
  auto dbs = DatabaseServer::create_all(cfg, initial_params(cfg, 1), Scheme::kNaive);
  EXPECT_EQ(dbs[0].handle({MessageKind::kGetShare, {}}).kind, MessageKind::kError);
  ByteWriter w;
  w.u32(6);
  w.u32(3);
  EXPECT_EQ(dbs[0].handle({MessageKind::kNaiveGet, std::move(w).bytes()}).kind, MessageKind::kError);
  EXPECT_EQ(dbs[0].handle({MessageKind::kNaivePush, encode_bundle(Matrix(1, zeros(4, cfg.modulus)))}).kind,
            MessageKind::kError);
}

}  // namespace
}  // namespace fedsub
