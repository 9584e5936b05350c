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

// Overhead accounting against the closed forms, and executable privacy
// checks at enumerable scale.
//
// Privacy is checked two ways:
//   - view_distribution_equality enumerates every random choice of an
//     iteration (coefficients, training outcome, PIR permutations) and
//     compares the exact distribution of one database's view under two
//     chosen indices;
//   - witness_search takes one recorded view and looks for randomness that
//     reproduces it byte for byte under a different chosen index.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/database.hpp"
#include "fedsub/error.hpp"
#include "fedsub/ledger.hpp"
#include "fedsub/local_machine.hpp"
#include "fedsub/pir.hpp"
#include "fedsub/protocol.hpp"
#include "fedsub/simulation.hpp"
#include "fedsub/trainer.hpp"
#include "fedsub/view.hpp"

namespace fedsub {

class ScaleTooLarge : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Closed forms

// beta * s = sum_{k=1}^{r-1} s / N^k. Exact when N^(r-1) divides s.
inline std::uint64_t beta_s(std::uint64_t n, std::uint64_t r, std::uint64_t s) {
  std::uint64_t out = 0;
  std::uint64_t div = 1;
  for (std::uint64_t k = 1; k < r; ++k) {
    div *= n;
    if (s % div != 0) throw ConfigError("beta*s is not an integer: N^" + std::to_string(k) + " does not divide s");
    out += s / div;
  }
  return out;
}

struct ClosedForm {
  std::uint64_t download_shares = 0;
  std::uint64_t download_pir = 0;
  std::uint64_t upload_shares = 0;
  std::uint64_t upload_combos = 0;
  std::uint64_t download = 0;
  std::uint64_t upload = 0;
  std::uint64_t overall = 0;
  std::uint64_t trainer_calls = 0;
  std::uint64_t codec_ops = 0;
};

inline ClosedForm closed_form(std::uint64_t n, std::uint64_t r, std::uint64_t s, Scheme scheme) {
  ClosedForm f;
  if (scheme == Scheme::kProposed) {
    const std::uint64_t bs = beta_s(n, r, s);
    f.download_shares = r + s;
    f.download_pir = s + bs;
    f.upload_shares = r + s;
    f.upload_combos = r * s * n;
    f.download = r + 2 * s + bs;                 // r + (2 + beta) s
    f.upload = r * s * n + r + s;                // rsN + r + s
    f.overall = 2 * r + 3 * s + bs + r * n * s;  // 2r + (3 + beta + rN) s
    f.trainer_calls = 1;
    f.codec_ops = 2;
  } else {
    f.download = r * s;
    f.upload = r * s * n;
    f.overall = r * s * (n + 1);
    f.trainer_calls = r;
  }
  return f;
}

struct LedgerLine {
  std::string phase;
  std::uint64_t expected = 0;
  std::uint64_t measured = 0;
  bool ok() const { return expected == measured; }
};

struct LedgerReport {
  std::vector<LedgerLine> lines;
  bool pass() const {
    return std::all_of(lines.begin(), lines.end(), [](const LedgerLine& l) { return l.ok(); });
  }
  // First failing phase with its signed delta, or empty.
  std::string failure() const {
    for (const auto& l : lines) {
      if (!l.ok()) {
        const auto delta = static_cast<std::int64_t>(l.measured) - static_cast<std::int64_t>(l.expected);
        return l.phase + " off by " + std::to_string(delta);
      }
    }
    return {};
  }
};

// Zero-tolerance comparison of a ledger covering `iterations` iterations.
inline LedgerReport assert_ledger(const OverheadLedger& ledger, std::uint64_t n, std::uint64_t r, std::uint64_t s,
                                  Scheme scheme, std::uint64_t iterations = 1) {
  const ClosedForm f = closed_form(n, r, s, scheme);
  const auto& t = ledger.total;
  LedgerReport rep;
  auto line = [&](const char* phase, std::uint64_t expected, std::uint64_t measured) {
    rep.lines.push_back({phase, expected * iterations, measured});
  };
  if (scheme == Scheme::kProposed) {
    line("download_shares", f.download_shares, t.download_shares);
    line("download_pir", f.download_pir, t.download_pir);
    line("upload_shares", f.upload_shares, t.upload_shares);
    line("upload_combos", f.upload_combos, t.upload_combos);
    line("codec_encodes", 1, ledger.codec.encodes);
    line("codec_decodes", 1, ledger.codec.decodes);
  }
  line("download", f.download, t.download());
  line("upload", f.upload, t.upload());
  line("overall", f.overall, t.overall());
  line("trainer_calls", f.trainer_calls, ledger.trainer_calls);
  return rep;
}

struct LowerBoundReport {
  std::uint64_t download_bound = 0;
  std::uint64_t download_achieved = 0;
  std::uint64_t upload_bound = 0;
  std::uint64_t upload_achieved = 0;
  std::uint64_t computation_bound_trainer_calls = 1;
  std::uint64_t computation_achieved_trainer_calls = 0;
  std::uint64_t computation_achieved_codec_ops = 0;

  std::uint64_t download_gap() const { return download_achieved - download_bound; }
  std::uint64_t upload_gap() const { return upload_achieved - upload_bound; }
  std::uint64_t computation_gap_codec_ops() const { return computation_achieved_codec_ops; }
};

// Bounds: download (1 + beta) s, upload rsN, computation one training call.
// Achieved values come from a one-iteration proposed-scheme ledger.
inline LowerBoundReport lower_bound_report(const OverheadLedger& one_iteration, std::uint64_t n, std::uint64_t r,
                                           std::uint64_t s) {
  LowerBoundReport rep;
  rep.download_bound = s + beta_s(n, r, s);
  rep.download_achieved = one_iteration.download();
  rep.upload_bound = r * s * n;
  rep.upload_achieved = one_iteration.upload();
  rep.computation_achieved_trainer_calls = one_iteration.trainer_calls;
  rep.computation_achieved_codec_ops = one_iteration.codec.encodes + one_iteration.codec.decodes;
  return rep;
}

// ---------------------------------------------------------------------------
// Enumeration

// Everything that defines a tiny protocol instance for the auditor.
struct AuditSetup {
  ProtocolConfig cfg;
  Matrix initial;
  Variant variant = Variant::kFaithful;
  ViewScope scope = ViewScope::kFull;

  // q=3 style instances; allows q <= r+s.
  static AuditSetup make(std::size_t n, std::size_t r, std::size_t s, std::uint64_t q, std::uint64_t seed = 1,
                         Variant variant = Variant::kFaithful, ViewScope scope = ViewScope::kFull) {
    ProtocolConfig cfg = ProtocolConfig::make(n, r, s, q, FieldPolicy::kSmallField);
    Matrix init = initial_params(cfg, seed);
    return {std::move(cfg), std::move(init), variant, scope};
  }
};

namespace detail {

inline std::vector<std::vector<std::uint32_t>> all_permutations(std::uint32_t n) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  std::vector<std::vector<std::uint32_t>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline std::uint64_t factorial(std::uint64_t n) {
  std::uint64_t f = 1;
  for (std::uint64_t k = 2; k <= n; ++k) {
    if (f > UINT64_MAX / k) return UINT64_MAX;
    f *= k;
  }
  return f;
}

inline std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a) return UINT64_MAX;
  return a * b;
}

inline std::uint64_t sat_pow(std::uint64_t a, std::uint64_t e) {
  std::uint64_t out = 1;
  for (std::uint64_t k = 0; k < e; ++k) out = sat_mul(out, a);
  return out;
}

// Ordered coefficient vectors with 1 at d and distinct values from
// {2, ..., q-1} elsewhere.
inline std::vector<Vec> all_alphas(std::size_t d, std::size_t r, const Modulus& m) {
  std::vector<Vec> out;
  Vec cur(r, Element::one(m));
  std::vector<bool> used(m.value(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t l) {
    if (l == r) {
      out.push_back(cur);
      return;
    }
    if (l == d) {
      rec(l + 1);
      return;
    }
    for (std::uint64_t v = 2; v < m.value(); ++v) {
      if (used[v]) continue;
      used[v] = true;
      cur[l] = Element(v, m);
      rec(l + 1);
      used[v] = false;
    }
  };
  rec(0);
  return out;
}

inline Vec delta_from_index(std::uint64_t idx, std::size_t s, const Modulus& m) {
  Vec v;
  for (std::size_t j = 0; j < s; ++j) {
    v.emplace_back(idx % m.value(), m);
    idx /= m.value();
  }
  return v;
}

// The per-iteration randomness space of a tiny instance.
struct ChoiceSpace {
  const AuditSetup& setup;
  std::vector<std::vector<std::uint32_t>> perm_list;
  std::uint64_t perm_slots = 0;  // groups * K independent permutations
  std::uint64_t delta_count = 0;

  explicit ChoiceSpace(const AuditSetup& s) : setup(s) {
    const PirConfig pir = s.cfg.pir();
    perm_slots = pir.groups() * pir.n_messages;
    delta_count = sat_pow(s.cfg.modulus.value(), s.cfg.submodel_len);
  }

  std::uint64_t alpha_count(std::size_t d) const {
    (void)d;
    std::uint64_t c = 1;
    for (std::uint64_t k = 0; k + 1 < setup.cfg.n_submodels; ++k) c = sat_mul(c, setup.cfg.modulus.value() - 2 - k);
    return c;
  }

  std::uint64_t perm_count() const { return sat_pow(factorial(setup.cfg.pir().subpacket_len()), perm_slots); }

  std::uint64_t per_iteration(std::size_t d) const { return sat_mul(sat_mul(alpha_count(d), delta_count), perm_count()); }

  void materialize_perms() {
    if (perm_list.empty()) perm_list = all_permutations(static_cast<std::uint32_t>(setup.cfg.pir().subpacket_len()));
  }

  // Permutation tuple number idx, shaped [group][message].
  std::vector<std::vector<std::vector<std::uint32_t>>> perms_at(std::uint64_t idx) const {
    const PirConfig pir = setup.cfg.pir();
    std::vector<std::vector<std::vector<std::uint32_t>>> out(pir.groups());
    for (auto& g : out) {
      for (std::size_t m = 0; m < pir.n_messages; ++m) {
        g.push_back(perm_list[idx % perm_list.size()]);
        idx /= perm_list.size();
      }
    }
    return out;
  }
};

// Runs one iteration against copies of `dbs` with fully specified randomness.
inline std::vector<DatabaseServer> run_with(const AuditSetup& setup, const std::vector<DatabaseServer>& dbs,
                                            std::size_t d, const IterationChoices& choices, const Vec& delta) {
  std::vector<DatabaseServer> next = dbs;
  std::vector<FrameHandler*> handlers;
  for (auto& x : next) handlers.push_back(&x);
  SimCarrier carrier(handlers);
  Channel channel(carrier);
  FixedDeltaTrainer trainer(delta);
  LocalMachine lm(setup.cfg, trainer, setup.variant);
  lm.run_iteration(d, channel, choices);
  return next;
}

}  // namespace detail

struct ViewDistribution {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  friend bool operator==(const ViewDistribution&, const ViewDistribution&) = default;
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = 50'000'000;

// Exact distribution of each database's view over all randomness, for the
// chosen-index sequence `choices` (one per iteration). Result is per
// database.
inline std::vector<ViewDistribution> enumerate_views(const AuditSetup& setup, const std::vector<std::size_t>& choices,
                                                     std::uint64_t budget = kDefaultEnumerationBudget) {
  detail::ChoiceSpace space(setup);
  std::uint64_t total = 1;
  for (auto d : choices) total = detail::sat_mul(total, space.per_iteration(d));
  if (total > budget) {
    throw ScaleTooLarge("scale too large: " + (total == UINT64_MAX ? std::string("overflow") : std::to_string(total)) +
                        " randomness tuples exceed the budget of " + std::to_string(budget));
  }
  space.materialize_perms();
  const std::size_t n = setup.cfg.n_dbs;
  std::vector<ViewDistribution> dist(n);

  std::function<void(std::size_t, const std::vector<DatabaseServer>&, std::vector<std::string>&)> rec =
      [&](std::size_t t, const std::vector<DatabaseServer>& dbs, std::vector<std::string>& keys) {
        if (t == choices.size()) {
          for (std::size_t i = 0; i < n; ++i) {
            ++dist[i].counts[keys[i]];
            ++dist[i].total;
          }
          return;
        }
        const std::size_t d = choices[t];
        const auto alphas = detail::all_alphas(d, setup.cfg.n_submodels, setup.cfg.modulus);
        const std::uint64_t perms = space.perm_count();
        for (const auto& alpha : alphas) {
          for (std::uint64_t di = 0; di < space.delta_count; ++di) {
            const Vec delta = detail::delta_from_index(di, setup.cfg.submodel_len, setup.cfg.modulus);
            for (std::uint64_t pi = 0; pi < perms; ++pi) {
              IterationChoices c{alpha, space.perms_at(pi)};
              std::vector<std::size_t> starts;
              for (const auto& x : dbs) starts.push_back(x.observed().size());
              auto next = detail::run_with(setup, dbs, d, c, delta);
              std::vector<std::string> saved = keys;
              for (std::size_t i = 0; i < n; ++i) append_key(keys[i], view_segment(next[i], starts[i], setup.scope));
              rec(t + 1, next, keys);
              keys = std::move(saved);
            }
          }
        }
      };

  auto start = DatabaseServer::create_all(setup.cfg, setup.initial, Scheme::kProposed);
  std::vector<std::string> keys(n);
  rec(0, start, keys);
  return dist;
}

struct PrivacyVerdict {
  bool identical = true;
  std::vector<std::size_t> support_a;  // per database
  std::vector<std::size_t> support_b;
  std::uint64_t tuples_per_choice = 0;
  std::string detail;
};

// Compares the per-database view distributions when the last iteration's
// chosen index is d_a versus d_b; earlier iterations use `prefix`.
inline PrivacyVerdict view_distribution_equality(const AuditSetup& setup, std::size_t d_a, std::size_t d_b,
                                                 const std::vector<std::size_t>& prefix = {},
                                                 std::uint64_t budget = kDefaultEnumerationBudget) {
  auto seq_a = prefix;
  seq_a.push_back(d_a);
  auto seq_b = prefix;
  seq_b.push_back(d_b);
  const auto da = enumerate_views(setup, seq_a, budget);
  const auto db = d_a == d_b ? da : enumerate_views(setup, seq_b, budget);
  PrivacyVerdict v;
  v.tuples_per_choice = da.front().total;
  for (std::size_t i = 0; i < da.size(); ++i) {
    v.support_a.push_back(da[i].counts.size());
    v.support_b.push_back(db[i].counts.size());
    if (!(da[i] == db[i])) {
      v.identical = false;
      std::size_t only_a = 0;
      for (const auto& [k, c] : da[i].counts) {
        if (!db[i].counts.contains(k)) ++only_a;
      }
      if (!v.detail.empty()) v.detail += "; ";
      // Reported 1-based, as on the command line.
      v.detail += "database " + std::to_string(i + 1) + ": " + std::to_string(only_a) + " of " +
                  std::to_string(da[i].counts.size()) + " views under d=" + std::to_string(d_a + 1) +
                  " never occur under d=" + std::to_string(d_b + 1);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Witness search

struct Witness {
  std::vector<std::size_t> choices;
  std::vector<Vec> alphas;
  std::vector<Vec> deltas;
  std::vector<std::vector<std::vector<std::vector<std::uint32_t>>>> perms;
};

enum class WitnessStatus { kFound, kNone, kInconclusive };

inline const char* witness_status_name(WitnessStatus s) {
  switch (s) {
    case WitnessStatus::kFound: return "found";
    case WitnessStatus::kNone: return "none";
    case WitnessStatus::kInconclusive: return "inconclusive";
  }
  return "?";
}

struct WitnessResult {
  WitnessStatus status = WitnessStatus::kNone;
  std::optional<Witness> witness;
  std::uint64_t candidates = 0;
};

// Searches for randomness under which a run whose last chosen index is
// d_alt produces exactly `recorded` at database `db`. Earlier chosen indices
// are free. PIR permutations are matched against the recorded queries first,
// since queries depend on nothing else.
inline WitnessResult witness_search(const AuditSetup& setup, std::size_t db, const std::vector<ViewSegment>& recorded,
                                    std::size_t d_alt, std::uint64_t budget = kDefaultEnumerationBudget) {
  detail::ChoiceSpace space(setup);
  const PirConfig pir = setup.cfg.pir();
  const std::size_t r = setup.cfg.n_submodels;
  const std::size_t T = recorded.size();
  if (d_alt >= r) throw ProtocolError("witness_search: index out of range");
  WitnessResult result;
  bool exhausted = false;
  auto spend = [&] {
    if (++result.candidates > budget) exhausted = true;
    return !exhausted;
  };

  // Matching permutation tuple for (iteration, chosen index), if any.
  std::map<std::pair<std::size_t, std::size_t>, std::optional<std::vector<std::vector<std::vector<std::uint32_t>>>>> perm_cache;
  auto perms_for = [&](std::size_t t, std::size_t d) -> const std::optional<std::vector<std::vector<std::vector<std::uint32_t>>>>& {
    auto key = std::make_pair(t, d);
    if (auto it = perm_cache.find(key); it != perm_cache.end()) return it->second;
    std::vector<Bytes> queries;
    for (const auto& e : recorded[t].exchanges) {
      Frame f = frame_decode(e.request);
      if (f.kind == MessageKind::kPirQuery) queries.push_back(f.payload);
    }
    std::optional<std::vector<std::vector<std::vector<std::uint32_t>>>> found;
    if (queries.size() == pir.groups()) {
      space.materialize_perms();
      std::vector<std::vector<std::vector<std::uint32_t>>> per_group;
      const std::uint64_t per_group_count = detail::sat_pow(space.perm_list.size(), pir.n_messages);
      for (std::uint32_t g = 0; g < pir.groups() && !exhausted; ++g) {
        std::optional<std::vector<std::vector<std::uint32_t>>> match;
        for (std::uint64_t idx = 0; idx < per_group_count && !match; ++idx) {
          if (!spend()) break;
          std::vector<std::vector<std::uint32_t>> tuple;
          std::uint64_t rest = idx;
          for (std::size_t m = 0; m < pir.n_messages; ++m) {
            tuple.push_back(space.perm_list[rest % space.perm_list.size()]);
            rest /= space.perm_list.size();
          }
          QueryPlan plan = pir_plan_with_permutations(d, pir, g, tuple);
          if (encode_pir_query(g, plan.per_db[db]) == queries[g]) match = std::move(tuple);
        }
        if (!match) {
          per_group.clear();
          break;
        }
        per_group.push_back(std::move(*match));
      }
      if (per_group.size() == pir.groups()) found = std::move(per_group);
    }
    return perm_cache.emplace(key, std::move(found)).first->second;
  };

  Witness partial;
  std::function<bool(std::size_t, const std::vector<DatabaseServer>&)> rec = [&](std::size_t t,
                                                                                  const std::vector<DatabaseServer>& dbs) {
    if (t == T) return true;
    std::vector<std::size_t> candidates;
    if (t + 1 == T) {
      candidates.push_back(d_alt);
    } else {
      for (std::size_t d = 0; d < r; ++d) candidates.push_back(d);
    }
    for (std::size_t d : candidates) {
      const auto& perms = perms_for(t, d);
      if (exhausted) return false;
      if (!perms) continue;
      for (const auto& alpha : detail::all_alphas(d, r, setup.cfg.modulus)) {
        for (std::uint64_t di = 0; di < space.delta_count; ++di) {
          if (!spend()) return false;
          const Vec delta = detail::delta_from_index(di, setup.cfg.submodel_len, setup.cfg.modulus);
          const std::size_t start = dbs[db].observed().size();
          auto next = detail::run_with(setup, dbs, d, IterationChoices{alpha, *perms}, delta);
          if (!(view_segment(next[db], start, setup.scope) == recorded[t])) continue;
          partial.choices.push_back(d);
          partial.alphas.push_back(alpha);
          partial.deltas.push_back(delta);
          partial.perms.push_back(*perms);
          if (rec(t + 1, next)) return true;
          if (exhausted) return false;
          partial.choices.pop_back();
          partial.alphas.pop_back();
          partial.deltas.pop_back();
          partial.perms.pop_back();
        }
      }
    }
    return false;
  };

  const bool found = rec(0, DatabaseServer::create_all(setup.cfg, setup.initial, Scheme::kProposed));
  if (found) {
    result.status = WitnessStatus::kFound;
    result.witness = std::move(partial);
  } else {
    result.status = exhausted ? WitnessStatus::kInconclusive : WitnessStatus::kNone;
  }
  return result;
}

// The naive transcript never depends on the chosen index, so rerunning the
// recorded schedule with the last choice replaced is itself a witness.
inline WitnessResult naive_witness_search(const ProtocolConfig& cfg, const SimulationOptions& opt, std::size_t db,
                                          const std::vector<std::size_t>& choices,
                                          const std::vector<ViewSegment>& recorded, std::size_t d_alt) {
  SimulationOptions o = opt;
  o.scheme = Scheme::kNaive;
  o.record_views = true;
  Simulation sim(cfg, o);
  std::vector<std::size_t> alt = choices;
  if (alt.empty()) throw ProtocolError("naive_witness_search: empty schedule");
  alt.back() = d_alt;
  for (auto d : alt) sim.step(d);
  WitnessResult res;
  res.candidates = 1;
  const bool match = sim.views(db, ViewScope::kFull) == recorded;
  res.status = match ? WitnessStatus::kFound : WitnessStatus::kNone;
  if (match) res.witness = Witness{alt, {}, {}, {}};
  return res;
}

}  // namespace fedsub
