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

// The local machine of one iteration: download, update, upload.
//
// A local machine keeps no state between iterations. Everything it needs
// (the current iteration number, the previous message, its submodel) comes
// from the databases.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/error.hpp"
#include "fedsub/field.hpp"
#include "fedsub/ledger.hpp"
#include "fedsub/mdscode.hpp"
#include "fedsub/pir.hpp"
#include "fedsub/protocol.hpp"
#include "fedsub/rng.hpp"
#include "fedsub/trainer.hpp"
#include "fedsub/transport.hpp"

namespace fedsub {

// Deliberately broken variants used as negative controls by the auditor.
enum class Variant {
  kFaithful,
  kUnmaskedUpload,  // uploads Delta_t at the chosen row only, zeros elsewhere
  kConstantAlpha,   // alpha_{t,l} = 1 + ((l - d) mod r), no randomness
};

// All randomness one iteration consumes. perms[g][m] is the permutation of
// message m in PIR group g.
struct IterationChoices {
  Vec alpha;
  std::vector<std::vector<std::vector<std::uint32_t>>> perms;
};

inline IterationChoices draw_choices(const ProtocolConfig& cfg, std::size_t d, Rng& rng) {
  const PirConfig pir = cfg.pir();
  IterationChoices c;
  for (std::uint64_t g = 0; g < pir.groups(); ++g) {
    std::vector<std::vector<std::uint32_t>> per_msg;
    for (std::size_t m = 0; m < pir.n_messages; ++m) {
      per_msg.push_back(rng.permutation(static_cast<std::uint32_t>(pir.subpacket_len())));
    }
    c.perms.push_back(std::move(per_msg));
  }
  c.alpha = draw_alpha(d, cfg.n_submodels, cfg.modulus, rng);
  return c;
}

struct IterationResult {
  std::uint64_t iteration = 0;
  std::size_t chosen = 0;
  OverheadLedger ledger;
  IterMessage previous;  // M_{t-1}, as decoded
  IterMessage message;   // M_t
  Vec plain_row;         // B_{t,d}
  UploadBundle bundle;
};

class LocalMachine {
 public:
  LocalMachine(const ProtocolConfig& cfg, Trainer& trainer, Variant variant = Variant::kFaithful)
      : cfg_(cfg), trainer_(trainer), variant_(variant) {}

  // Randomness is drawn from derive_seed(seed, t) once t is known.
  IterationResult run_iteration(std::size_t d, Channel& channel, std::uint64_t seed) {
    return run(d, channel, [&](std::uint64_t t) {
      Rng rng(derive_seed(seed, t));
      return draw_choices(cfg_, d, rng);
    });
  }

  IterationResult run_iteration(std::size_t d, Channel& channel, const IterationChoices& choices) {
    return run(d, channel, [&](std::uint64_t) { return choices; });
  }

 private:
  struct SessionGuard {
    Channel& ch;
    explicit SessionGuard(Channel& c) : ch(c) { ch.begin_session(); }
    ~SessionGuard() { ch.end_session(); }
  };

  template <typename ChoiceFn>
  IterationResult run(std::size_t d, Channel& channel, ChoiceFn&& choose) {
    const std::size_t n = cfg_.n_dbs;
    const std::size_t r = cfg_.n_submodels;
    if (d >= r) throw ProtocolError("chosen index " + std::to_string(d) + " out of range [0, " + std::to_string(r) + ")");
    if (channel.n_dbs() != n) throw ConfigError("channel reaches the wrong number of databases");

    SessionGuard session(channel);
    const std::uint64_t calls_before = trainer_.calls();
    IterationResult res;
    res.chosen = d;

    // Download, step 1: every exclusive share.
    std::vector<ExclusiveShare> shares;
    for (std::size_t i = 0; i < n; ++i) {
      ExclusiveShare sh = decode_share(channel.send(i, MessageKind::kGetShare, {}), cfg_.modulus);
      if (sh.db_index != i) throw ProtocolError("database " + std::to_string(i) + " returned a foreign share");
      shares.push_back(std::move(sh));
    }
    res.iteration = shares.front().iteration + 1;
    const IterationChoices choices = choose(res.iteration);
    if (variant_ == Variant::kFaithful || variant_ == Variant::kUnmaskedUpload) check_alpha(choices.alpha, d);

    // Download, step 2: B~_{t,d} by PIR, one plan per subpacket group.
    const PirConfig pir = cfg_.pir();
    if (choices.perms.size() != pir.groups()) throw ProtocolError("need one permutation set per PIR group");
    Vec masked_row;
    for (std::uint32_t g = 0; g < pir.groups(); ++g) {
      QueryPlan plan = pir_plan_with_permutations(d, pir, g, choices.perms[g]);
      std::vector<Vec> answers;
      for (std::size_t i = 0; i < n; ++i) {
        auto [ag, symbols] = decode_pir_answer(
            channel.send(i, MessageKind::kPirQuery, encode_pir_query(g, plan.per_db[i])), cfg_.modulus);
        if (ag != g) throw ProtocolError("PIR decode failure: answer for the wrong group");
        answers.push_back(std::move(symbols));
      }
      Vec part = pir_decode(answers, plan);
      masked_row.insert(masked_row.end(), part.begin(), part.end());
    }

    // Update.
    CodecCounter codec;
    res.previous = IterMessage::unflatten(cfg_.mixing.decode(join_shares(shares, n), &codec), r);
    res.previous.chosen_index();  // validates M_{t-1}
    res.plain_row = recover_plain(masked_row, res.previous, d);
    Vec trained = trainer_.train(res.plain_row, res.iteration);
    Vec delta = sub(trained, res.plain_row);
    res.message = {alpha_for(d, choices), std::move(delta)};
    auto new_shares = split_shares(cfg_.mixing.encode(res.message.flatten(), &codec), n, res.iteration);
    res.bundle = bundle_for(d, res.message, res.previous);

    // Upload: stage every share before committing any bundle.
    for (std::size_t i = 0; i < n; ++i) channel.send(i, MessageKind::kUploadShare, encode_share(new_shares[i]));
    const Bytes bundle_bytes = encode_bundle(res.bundle.combos);
    for (std::size_t i = 0; i < n; ++i) channel.send(i, MessageKind::kUploadCombos, bundle_bytes);

    res.ledger = channel.ledger();
    res.ledger.trainer_calls = trainer_.calls() - calls_before;
    res.ledger.codec = codec;
    return res;
  }

  Vec alpha_for(std::size_t d, const IterationChoices& c) const {
    if (variant_ != Variant::kConstantAlpha) return c.alpha;
    const std::size_t r = cfg_.n_submodels;
    Vec alpha;
    for (std::size_t l = 0; l < r; ++l) alpha.emplace_back(1 + (l + r - d) % r, cfg_.modulus);
    return alpha;
  }

  UploadBundle bundle_for(std::size_t d, const IterMessage& current, const IterMessage& prev) const {
    if (variant_ != Variant::kUnmaskedUpload) return compute_upload(current, prev);
    UploadBundle b;
    for (std::size_t l = 0; l < cfg_.n_submodels; ++l) {
      b.combos.push_back(l == d ? current.delta : zeros(cfg_.submodel_len, cfg_.modulus));
    }
    return b;
  }

  const ProtocolConfig& cfg_;
  Trainer& trainer_;
  Variant variant_;
};

// The baseline: download all of B_t (rs/N symbols from each database),
// train every row, push every row's update to every database.
class NaiveMachine {
 public:
  NaiveMachine(const ProtocolConfig& cfg, Trainer& trainer) : cfg_(cfg), trainer_(trainer) {}

  IterationResult run_iteration(std::size_t d, Channel& channel) {
    const std::size_t n = cfg_.n_dbs;
    const std::size_t r = cfg_.n_submodels;
    const std::size_t s = cfg_.submodel_len;
    if (d >= r) throw ProtocolError("chosen index out of range");
    channel.begin_session();
    struct End {
      Channel& ch;
      ~End() { ch.end_session(); }
    } end{channel};

    const std::uint64_t calls_before = trainer_.calls();
    const std::uint64_t total = static_cast<std::uint64_t>(r) * s;
    Vec flat;
    IterationResult res;
    res.chosen = d;
    for (std::size_t i = 0; i < n; ++i) {
      auto [begin, end_at] = share_bounds(total, n, i);
      ByteWriter w;
      w.u32(static_cast<std::uint32_t>(begin));
      w.u32(static_cast<std::uint32_t>(end_at - begin));
      Bytes resp = channel.send(i, MessageKind::kNaiveGet, std::move(w).bytes());
      ByteReader rd(resp);
      res.iteration = rd.u64();
      if (rd.u32() != begin) throw ProtocolError("NaiveResp offset mismatch");
      const std::uint32_t count = rd.u32();
      if (count != end_at - begin) throw ProtocolError("NaiveResp count mismatch");
      Vec part = read_vec(rd, count, cfg_.modulus);
      rd.expect_done("NaiveResp");
      flat.insert(flat.end(), part.begin(), part.end());
    }
    Matrix updates;
    for (std::size_t l = 0; l < r; ++l) {
      Vec row(flat.begin() + l * s, flat.begin() + (l + 1) * s);
      Vec trained = trainer_.train(row, res.iteration);
      if (l == d) res.plain_row = row;
      updates.push_back(sub(trained, row));
    }
    const Bytes payload = encode_bundle(updates);
    for (std::size_t i = 0; i < n; ++i) channel.send(i, MessageKind::kNaivePush, payload);
    res.bundle.combos = std::move(updates);
    res.ledger = channel.ledger();
    res.ledger.trainer_calls = trainer_.calls() - calls_before;
    return res;
  }

 private:
  const ProtocolConfig& cfg_;
  Trainer& trainer_;
};

}  // namespace fedsub
