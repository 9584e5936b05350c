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

// Protocol state and the pure per-iteration operations.
//
// Iteration t (1-based) starts with every database holding the masked
// matrix B~_t and its own block c_{t-1,i} of the coded previous message
// M_{t-1} = (alpha_{t-1}, Delta_{t-1}). Row l of B~_t is
//   B_{t-1,l} + alpha_{t-1,l} * Delta_{t-1},
// and alpha_{t-1,p} = 1 exactly at the previous chooser's row p.

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
#include "fedsub/mdscode.hpp"
#include "fedsub/pir.hpp"
#include "fedsub/rng.hpp"

namespace fedsub {

using Matrix = std::vector<Vec>;

enum class FieldPolicy {
  kStrict,      // q > r + s, Vandermonde mixing matrix
  kSmallField,  // additionally allows q <= r + s with the I + J mixing matrix
};

struct ProtocolConfig {
  std::size_t n_dbs;
  std::size_t n_submodels;
  std::size_t submodel_len;
  Modulus modulus;
  MixingMatrix mixing;

  std::size_t message_len() const { return n_submodels + submodel_len; }
  PirConfig pir() const { return PirConfig::make(n_dbs, n_submodels, submodel_len); }

  // Collects every violated constraint into one ConfigError.
  static ProtocolConfig make(std::size_t n_dbs, std::size_t r, std::size_t s, std::uint64_t q,
                             FieldPolicy policy = FieldPolicy::kStrict) {
    std::vector<std::string> problems;
    std::optional<Modulus> mod;
    try {
      mod.emplace(q);
    } catch (const FieldError& e) {
      problems.emplace_back(e.what());
    }
    if (n_dbs < 2 || n_dbs > 255) problems.push_back("N must be in [2, 255]");
    if (r < 1 || r > 16) problems.push_back("r must be in [1, 16]");
    if (s < 1) problems.push_back("s must be positive");
    if (n_dbs >= 2 && n_dbs <= 255 && r >= 1 && r <= 16 && s >= 1) {
      std::uint64_t l = 0;
      try {
        l = checked_pow(n_dbs, r);
      } catch (const ConfigError& e) {
        problems.emplace_back(e.what());
      }
      if (l != 0 && s % l != 0) {
        auto [lo, hi] = nearest_valid_s(n_dbs, r, s);
        std::string hint = lo ? "s=" + std::to_string(lo) + " or s=" + std::to_string(hi)
                              : "s=" + std::to_string(hi);
        problems.push_back("N^r=" + std::to_string(l) + " must divide s=" + std::to_string(s) + " (try " + hint + ")");
      }
      if (n_dbs > r + s) problems.push_back("N must not exceed r+s");
    }
    if (mod) {
      if (q < r + 1) problems.push_back("q=" + std::to_string(q) + " too small for r distinct nonzero coefficients (need q >= r+1)");
      if (policy == FieldPolicy::kStrict && q <= r + s) {
        problems.push_back("q=" + std::to_string(q) + " must exceed r+s=" + std::to_string(r + s));
      }
    }
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& p : problems) msg += " " + p + ";";
      msg.pop_back();
      throw ConfigError(msg);
    }
    MixingMatrix mixing = q > r + s ? MixingMatrix::vandermonde(r + s, *mod)
                                    : MixingMatrix::identity_plus_ones(r + s, *mod);
    return ProtocolConfig{n_dbs, r, s, *mod, std::move(mixing)};
  }

  // Closest multiples of N^r below and above s (below is 0 if none).
  static std::pair<std::uint64_t, std::uint64_t> nearest_valid_s(std::size_t n_dbs, std::size_t r, std::uint64_t s) {
    const std::uint64_t l = checked_pow(n_dbs, r);
    const std::uint64_t lo = (s / l) * l;
    const std::uint64_t hi = lo + l;
    return {lo, hi};
  }
};

// M_t = (alpha_t, Delta_t).
struct IterMessage {
  Vec alpha;
  Vec delta;

  // The unique row whose coefficient is 1.
  std::size_t chosen_index() const {
    std::optional<std::size_t> found;
    for (std::size_t l = 0; l < alpha.size(); ++l) {
      if (alpha[l].value() == 1) {
        if (found) throw ProtocolError("malformed previous message: several unit coefficients");
        found = l;
      }
    }
    if (!found) throw ProtocolError("malformed previous message: no unit coefficient");
    return *found;
  }

  Vec flatten() const {
    Vec out = alpha;
    out.insert(out.end(), delta.begin(), delta.end());
    return out;
  }

  static IterMessage unflatten(std::span<const Element> flat, std::size_t r) {
    if (flat.size() < r) throw ProtocolError("message shorter than r");
    return {Vec(flat.begin(), flat.begin() + r), Vec(flat.begin() + r, flat.end())};
  }

  friend bool operator==(const IterMessage&, const IterMessage&) = default;
};

struct EncodedMatrix {
  Matrix rows;
  std::uint64_t iteration = 1;
  friend bool operator==(const EncodedMatrix&, const EncodedMatrix&) = default;
};

// U_t: one row of combinations per submodel, sent identically to every
// database.
struct UploadBundle {
  Matrix combos;
  friend bool operator==(const UploadBundle&, const UploadBundle&) = default;
};

struct DatabaseState {
  std::size_t db_index = 0;
  EncodedMatrix encoded;
  ExclusiveShare share;
  friend bool operator==(const DatabaseState&, const DatabaseState&) = default;
};

// alpha_0 = (1, 2, ..., r), Delta_0 = 0.
inline IterMessage initial_message(const ProtocolConfig& cfg) {
  IterMessage m;
  for (std::size_t l = 0; l < cfg.n_submodels; ++l) m.alpha.emplace_back(l + 1, cfg.modulus);
  m.delta = zeros(cfg.submodel_len, cfg.modulus);
  return m;
}

inline void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.size() != rows) throw ProtocolError(std::string(what) + ": expected " + std::to_string(rows) + " rows");
  for (const auto& row : m) {
    if (row.size() != cols) throw ProtocolError(std::string(what) + ": expected rows of " + std::to_string(cols));
  }
}

// B~_1 = B_0 at every database; c_{0,i} = block i of encode(M_0).
inline std::vector<DatabaseState> bootstrap(const ProtocolConfig& cfg, const Matrix& initial) {
  check_shape(initial, cfg.n_submodels, cfg.submodel_len, "bootstrap");
  auto shares = split_shares(cfg.mixing.encode(initial_message(cfg).flatten()), cfg.n_dbs, 0);
  std::vector<DatabaseState> out;
  for (std::size_t i = 0; i < cfg.n_dbs; ++i) out.push_back({i, {initial, 1}, std::move(shares[i])});
  return out;
}

// B_{t,d} from B~_{t,d}: strip the mask unless d is the previous chooser.
inline Vec recover_plain(std::span<const Element> masked_row, const IterMessage& prev, std::size_t d) {
  if (d >= prev.alpha.size()) throw ProtocolError("recover_plain: index out of range");
  if (prev.alpha[d].value() == 1) return Vec(masked_row.begin(), masked_row.end());
  return sub(masked_row, scale(prev.alpha[d], prev.delta));
}

// alpha_{t,d} = 1; the other r-1 coefficients are distinct draws from
// F_q \ {0, 1}.
inline Vec draw_alpha(std::size_t d, std::size_t r, const Modulus& m, Rng& rng) {
  if (d >= r) throw ProtocolError("chosen index out of range");
  if (m.value() < r + 1) throw ConfigError("q too small for r distinct nonzero coefficients");
  std::vector<std::uint64_t> taken;
  Vec alpha;
  for (std::size_t l = 0; l < r; ++l) {
    if (l == d) {
      alpha.push_back(Element::one(m));
      continue;
    }
    std::uint64_t v;
    do {
      v = 2 + rng.uniform(m.value() - 2);
    } while (std::find(taken.begin(), taken.end(), v) != taken.end());
    taken.push_back(v);
    alpha.emplace_back(v, m);
  }
  return alpha;
}

// Validates a coefficient vector supplied from outside (enumeration, tests).
inline void check_alpha(std::span<const Element> alpha, std::size_t d) {
  for (std::size_t l = 0; l < alpha.size(); ++l) {
    if (l == d ? alpha[l].value() != 1 : alpha[l].value() <= 1) {
      throw ProtocolError("alpha must be 1 at the chosen row and outside {0, 1} elsewhere");
    }
    for (std::size_t k = l + 1; k < alpha.size(); ++k) {
      if (alpha[l] == alpha[k]) throw ProtocolError("alpha coefficients must be distinct");
    }
  }
}

inline IterMessage make_message(std::size_t d, Vec delta, const ProtocolConfig& cfg, Rng& rng) {
  if (delta.size() != cfg.submodel_len) throw ProtocolError("make_message: delta length != s");
  return {draw_alpha(d, cfg.n_submodels, cfg.modulus, rng), std::move(delta)};
}

// U_{t,l} = alpha_{t,l} Delta_t - alpha_{t-1,l} Delta_{t-1} for l != p,
// U_{t,p} = alpha_{t,p} Delta_t.
inline UploadBundle compute_upload(const IterMessage& current, const IterMessage& prev) {
  if (current.alpha.size() != prev.alpha.size()) throw ProtocolError("compute_upload: r mismatch");
  const std::size_t p = prev.chosen_index();
  UploadBundle out;
  for (std::size_t l = 0; l < current.alpha.size(); ++l) {
    Vec row = scale(current.alpha[l], current.delta);
    if (l != p) row = sub(row, scale(prev.alpha[l], prev.delta));
    out.combos.push_back(std::move(row));
  }
  return out;
}

// B~_{t+1,l} = B~_{t,l} + U_{t,l}; the share is replaced by c_{t,i}. Either
// everything changes or an exception leaves `db` untouched.
inline DatabaseState db_apply_upload(const DatabaseState& db, const UploadBundle& bundle, ExclusiveShare new_share) {
  const auto& rows = db.encoded.rows;
  check_shape(bundle.combos, rows.size(), rows.empty() ? 0 : rows.front().size(), "upload bundle");
  if (new_share.db_index != db.db_index) {
    throw ProtocolError("share for database " + std::to_string(new_share.db_index) + " sent to database " +
                        std::to_string(db.db_index));
  }
  if (new_share.iteration != db.encoded.iteration) {
    throw ProtocolError("share iteration " + std::to_string(new_share.iteration) + " does not match iteration " +
                        std::to_string(db.encoded.iteration));
  }
  DatabaseState next = db;
  for (std::size_t l = 0; l < rows.size(); ++l) next.encoded.rows[l] = add(rows[l], bundle.combos[l]);
  next.encoded.iteration += 1;
  next.share = std::move(new_share);
  return next;
}

// Oracle-side de-masking of a whole matrix given M_{t-1}.
inline Matrix demask(const EncodedMatrix& encoded, const IterMessage& prev) {
  const std::size_t p = prev.chosen_index();
  Matrix out;
  for (std::size_t l = 0; l < encoded.rows.size(); ++l) {
    out.push_back(l == p ? encoded.rows[l] : sub(encoded.rows[l], scale(prev.alpha[l], prev.delta)));
  }
  return out;
}

// Bundle wire: r (2) | s (4) | r*s symbols, row-major.
inline Bytes encode_bundle(const Matrix& rows) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(rows.size()));
  w.u32(static_cast<std::uint32_t>(rows.empty() ? 0 : rows.front().size()));
  for (const auto& row : rows) write_vec(w, row);
  return std::move(w).bytes();
}

inline Matrix decode_bundle(std::span<const std::uint8_t> b, const Modulus& m) {
  ByteReader r(b);
  const std::size_t rows = r.u16();
  const std::size_t cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 4 != r.remaining()) throw DecodeError("bundle: length mismatch");
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) out.push_back(read_vec(r, cols, m));
  return out;
}

inline Bytes encode_matrix_snapshot(const Matrix& rows) { return encode_bundle(rows); }

}  // namespace fedsub
