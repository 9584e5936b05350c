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
#include <vector>

#include "fedsub/mdscode.hpp"

namespace fedsub {
namespace {

using Grid = std::vector<std::vector<std::int64_t>>;

// Cofactor expansion over the integers, reduced mod q at the end.
std::int64_t cofactor_det(const Grid& a) {
  const std::size_t n = a.size();
  if (n == 1) return a[0][0];
  std::int64_t det = 0;
  for (std::size_t j = 0; j < n; ++j) {
    Grid minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<std::int64_t> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j) row.push_back(a[i][k]);
      }
      minor.push_back(row);
    }
    det += (j % 2 ? -1 : 1) * a[0][j] * cofactor_det(minor);
  }
  return det;
}

// Integer matrix-vector product with the matrix given as plain numbers.
std::vector<std::uint64_t> ref_apply(const Grid& a, const std::vector<std::uint64_t>& x, std::uint64_t q) {
  std::vector<std::uint64_t> out;
  for (const auto& row : a) {
    std::uint64_t acc = 0;
    for (std::size_t j = 0; j < row.size(); ++j) acc = (acc + static_cast<std::uint64_t>(row[j]) * x[j]) % q;
    out.push_back(acc);
  }
  return out;
}

Grid as_grid(const SquareMatrix& m) {
  Grid g(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (auto e : m.row(i)) g[i].push_back(static_cast<std::int64_t>(e.value()));
  }
  return g;
}

TEST(MixingMatrix, TwoPointRows) {
  const Modulus m(5);
  const auto mm = MixingMatrix::vandermonde(from_values({1, 2}, m));
  EXPECT_EQ(as_grid(mm.matrix()), (Grid{{1, 1}, {1, 2}}));
}

TEST(MixingMatrix, DuplicatePointsRejected) {
  const Modulus m(5);
  EXPECT_THROW(MixingMatrix::vandermonde(from_values({1, 1}, m)), ConfigError);
}

TEST(MixingMatrix, DefaultPointsNeedLargerField) {
  EXPECT_THROW(MixingMatrix::vandermonde(6, Modulus(5)), ConfigError);
  EXPECT_NO_THROW(MixingMatrix::vandermonde(4, Modulus(5)));
}

TEST(MixingMatrix, ThreePointDeterminantNonzero) {
  const Modulus m(7);
  const auto mm = MixingMatrix::vandermonde(from_values({1, 2, 3}, m));
  const std::int64_t det = cofactor_det(as_grid(mm.matrix()));
  // (2-1)(3-1)(3-2) = 2; entries are stored reduced, so compare mod 7.
  EXPECT_EQ(((det % 7) + 7) % 7, 2);
}

TEST(MixingMatrix, IdentityPlusOnesSingularCase) {
  EXPECT_THROW(MixingMatrix::identity_plus_ones(5, Modulus(3)), ConfigError);  // 6 = 0 mod 3
  const auto mm = MixingMatrix::identity_plus_ones(6, Modulus(3));
  const std::int64_t det = cofactor_det(as_grid(mm.matrix()));
  EXPECT_EQ(det, 7);  // det(I + J) = n + 1
  EXPECT_NE(det % 3, 0);
}

TEST(MixingMatrix, NoRowIsAUnitVector) {
  for (std::uint64_t q : {3ull, 5ull, 7ull, 65537ull}) {
    for (std::size_t n = 2; n <= 8; ++n) {
      std::vector<MixingMatrix> ms;
      if (q > n) ms.push_back(MixingMatrix::vandermonde(n, Modulus(q)));
      if ((n + 1) % q != 0) ms.push_back(MixingMatrix::identity_plus_ones(n, Modulus(q)));
      for (const auto& mm : ms) {
        for (std::size_t i = 0; i < n; ++i) {
          std::size_t nonzero = 0;
          for (auto e : mm.matrix().row(i)) nonzero += e.is_zero() ? 0 : 1;
          EXPECT_GT(nonzero, 1u) << "q=" << q << " n=" << n << " row " << i;
        }
      }
    }
  }
}

TEST(MdsEncode, TwoByTwoExample) {
  const Modulus m(5);
  const auto mm = MixingMatrix::vandermonde(from_values({1, 2}, m));
  const std::vector<std::uint64_t> msg{3, 4};
  const auto oracle = ref_apply({{1, 1}, {1, 2}}, msg, 5);
  EXPECT_EQ(oracle, (std::vector<std::uint64_t>{2, 1}));
  EXPECT_EQ(to_values(mm.encode(from_values(msg, m))), oracle);
  EXPECT_EQ(to_values(mm.decode(from_values({2, 1}, m))), msg);
}

TEST(MdsEncode, ZeroMapsToZero) {
  const Modulus m(65537);
  const auto mm = MixingMatrix::vandermonde(7, m);
  EXPECT_EQ(mm.encode(zeros(7, m)), zeros(7, m));
  EXPECT_EQ(mm.decode(zeros(7, m)), zeros(7, m));
}

TEST(MdsEncode, MatchesReferenceProduct) {
  const Modulus m(65537);
  const auto mm = MixingMatrix::vandermonde(6, m);
  Grid g;
  for (std::int64_t i = 0; i < 6; ++i) {
    std::vector<std::int64_t> row;
    for (std::int64_t x = 1; x <= 6; ++x) {
      std::int64_t v = 1;
      for (std::int64_t k = 0; k < i; ++k) v *= x;
      row.push_back(v % 65537);
    }
    g.push_back(row);
  }
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Vec msg = random_vec(rng, 6, m);
    EXPECT_EQ(to_values(mm.encode(msg)), ref_apply(g, to_values(msg), 65537));
  }
}

TEST(MdsEncode, RoundTripRandomMessages) {
  Rng rng(11);
  for (std::uint64_t q : {5ull, 65537ull}) {
    const Modulus m(q);
    const auto mm = q > 4 ? MixingMatrix::vandermonde(4, m) : MixingMatrix::identity_plus_ones(4, m);
    for (int k = 0; k < 100; ++k) {
      const Vec msg = random_vec(rng, 4, m);
      ASSERT_EQ(mm.decode(mm.encode(msg)), msg);
    }
  }
}

TEST(MdsEncode, CountsMultiplyAccumulates) {
  const Modulus m(65537);
  const auto mm = MixingMatrix::vandermonde(5, m);
  CodecCounter c;
  mm.encode(zeros(5, m), &c);
  mm.decode(zeros(5, m), &c);
  EXPECT_EQ(c.encodes, 1u);
  EXPECT_EQ(c.decodes, 1u);
  EXPECT_EQ(c.encode_macs, 25u);
  EXPECT_EQ(c.decode_macs, 25u);
  EXPECT_THROW(mm.encode(zeros(4, m)), ProtocolError);
}

TEST(Shares, EqualSplitOfSix) {
  const Modulus m(65537);
  const Vec c = from_values({1, 2, 3, 4, 5, 6}, m);
  const auto two = split_shares(c, 2, 9);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(to_values(two[0].symbols), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(to_values(two[1].symbols), (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(two[1].db_index, 1);
  EXPECT_EQ(two[1].iteration, 9u);
  EXPECT_EQ(join_shares(two, 2), c);

  const auto three = split_shares(c, 3, 1);
  for (const auto& s : three) EXPECT_EQ(s.symbols.size(), 2u);
  std::vector<ExclusiveShare> partial{three[0], three[2]};
  EXPECT_THROW(join_shares(partial, 3), ProtocolError);
}

TEST(Shares, UnevenSplitIsNearEqual) {
  const Modulus m(65537);
  Rng rng(5);
  const Vec c = random_vec(rng, 11, m);
  const auto shares = split_shares(c, 3, 1);
  EXPECT_EQ(shares[0].symbols.size(), 4u);
  EXPECT_EQ(shares[1].symbols.size(), 4u);
  EXPECT_EQ(shares[2].symbols.size(), 3u);
  std::vector<ExclusiveShare> shuffled{shares[2], shares[0], shares[1]};
  EXPECT_EQ(join_shares(shuffled, 3), c);
}

TEST(Shares, JoinRejectsInconsistentSets) {
  const Modulus m(65537);
  auto shares = split_shares(zeros(6, m), 2, 4);
  auto dup = shares;
  dup[1] = dup[0];
  EXPECT_THROW(join_shares(dup, 2), ProtocolError);
  auto stale = shares;
  stale[1].iteration = 3;
  EXPECT_THROW(join_shares(stale, 2), ProtocolError);
  auto shortened = shares;
  shortened[0].symbols.pop_back();
  shortened[1].symbols.push_back(Element::zero(m));
  EXPECT_THROW(join_shares(shortened, 2), ProtocolError);
}

TEST(Shares, StrictSubsetsAreUnderdetermined) {
  for (std::uint64_t q : {3ull, 5ull, 65537ull}) {
    const Modulus m(q);
    const std::size_t n = 6;
    const auto mm = q > n ? MixingMatrix::vandermonde(n, m) : MixingMatrix::identity_plus_ones(n, m);
    for (std::size_t n_dbs : {2u, 3u}) {
      // Every nonempty strict subset of share blocks.
      for (std::uint32_t mask = 1; mask + 1 < (1u << n_dbs); ++mask) {
        std::vector<Vec> rows;
        for (std::size_t i = 0; i < n_dbs; ++i) {
          if (!(mask & (1u << i))) continue;
          auto [b, e] = share_bounds(n, n_dbs, i);
          for (std::size_t k = b; k < e; ++k) {
            auto row = mm.matrix().row(k);
            rows.emplace_back(row.begin(), row.end());
          }
        }
        EXPECT_LT(rank_of(rows), n) << "q=" << q << " N=" << n_dbs << " mask=" << mask;
      }
      std::vector<Vec> all;
      for (std::size_t k = 0; k < n; ++k) all.emplace_back(mm.matrix().row(k).begin(), mm.matrix().row(k).end());
      EXPECT_EQ(rank_of(all), n);
    }
  }
}

TEST(Shares, WireFormat) {
  const Modulus m(65537);
  const ExclusiveShare s{1, 0x0102, from_values({7, 65536}, m)};
  const Bytes b = encode_share(s);
  const Bytes expected{0x01, 0, 0, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 2, 0, 0, 0, 7, 0, 1, 0, 0};
  EXPECT_EQ(b, expected);
  EXPECT_EQ(decode_share(b, m), s);
  Bytes cut = b;
  cut.pop_back();
  EXPECT_THROW(decode_share(cut, m), DecodeError);
}

}  // namespace
}  // namespace fedsub
