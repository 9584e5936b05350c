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

// Multi-iteration driver: databases, a carrier, one fresh local machine per
// iteration, and a no-privacy reference model that tracks the plaintext
// parameters for comparison.

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fedsub/database.hpp"
#include "fedsub/ledger.hpp"
#include "fedsub/local_machine.hpp"
#include "fedsub/protocol.hpp"
#include "fedsub/rng.hpp"
#include "fedsub/trainer.hpp"
#include "fedsub/transport.hpp"
#include "fedsub/view.hpp"

namespace fedsub {

struct SimulationOptions {
  Scheme scheme = Scheme::kProposed;
  std::uint64_t seed = 1;
  TrainerKind trainer = TrainerKind::kPseudorandom;
  Variant variant = Variant::kFaithful;
  bool record_views = false;  // keep per-iteration database views
};

// Stream seeds derived from the run seed. Databases, clients and the
// simulator all use these, so separate processes agree.
namespace seeds {
inline std::uint64_t model(std::uint64_t seed) { return derive_seed(seed, 0x100); }
inline std::uint64_t trainer(std::uint64_t seed) { return derive_seed(seed, 0x200); }
inline std::uint64_t machine(std::uint64_t seed) { return derive_seed(seed, 0x300); }
inline std::uint64_t schedule(std::uint64_t seed) { return derive_seed(seed, 0x400); }
}  // namespace seeds

// Public initial model B_0.
inline Matrix initial_params(const ProtocolConfig& cfg, std::uint64_t seed) {
  Rng rng(seeds::model(seed));
  Matrix b;
  for (std::size_t l = 0; l < cfg.n_submodels; ++l) b.push_back(random_vec(rng, cfg.submodel_len, cfg.modulus));
  return b;
}

// d_t for iteration t (0-based row index).
inline std::size_t scheduled_choice(std::uint64_t seed, std::uint64_t t, std::size_t r) {
  Rng rng(derive_seed(seeds::schedule(seed), t));
  return static_cast<std::size_t>(rng.uniform(r));
}

// Plaintext model trained without any privacy machinery.
class ReferenceModel {
 public:
  ReferenceModel(Matrix initial, std::unique_ptr<Trainer> trainer)
      : plain_(std::move(initial)), trainer_(std::move(trainer)) {}

  // Proposed scheme: only row d moves. Naive: every row moves.
  void step(std::size_t d, std::uint64_t iteration, Scheme scheme) {
    for (std::size_t l = 0; l < plain_.size(); ++l) {
      if (scheme == Scheme::kProposed && l != d) continue;
      plain_[l] = trainer_->train(plain_[l], iteration);
    }
  }

  const Matrix& params() const { return plain_; }

 private:
  Matrix plain_;
  std::unique_ptr<Trainer> trainer_;
};

class Simulation {
 public:
  // In-process databases behind a SimCarrier.
  Simulation(ProtocolConfig cfg, SimulationOptions opt)
      : cfg_(std::move(cfg)), opt_(opt), dbs_(DatabaseServer::create_all(cfg_, initial_params(cfg_, opt.seed), opt.scheme)) {
    std::vector<FrameHandler*> handlers;
    for (auto& d : dbs_) handlers.push_back(&d);
    owned_carrier_ = std::make_unique<SimCarrier>(std::move(handlers));
    carrier_ = owned_carrier_.get();
    init();
  }

  // Databases live elsewhere (socket mode); the oracle views are unavailable.
  Simulation(ProtocolConfig cfg, SimulationOptions opt, Carrier& carrier) : cfg_(std::move(cfg)), opt_(opt), carrier_(&carrier) {
    init();
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  IterationResult step() { return step(scheduled_choice(opt_.seed, iteration_, cfg_.n_submodels)); }

  IterationResult step(std::size_t d) {
    Channel channel(*carrier_);
    std::vector<std::size_t> starts;
    for (const auto& d : dbs_) starts.push_back(d.observed().size());
    IterationResult res;
    if (opt_.scheme == Scheme::kProposed) {
      LocalMachine lm(cfg_, *trainer_, opt_.variant);
      res = lm.run_iteration(d, channel, seeds::machine(opt_.seed));
    } else {
      NaiveMachine lm(cfg_, *trainer_);
      res = lm.run_iteration(d, channel);
    }
    reference_->step(d, res.iteration, opt_.scheme);
    total_ += res.ledger;
    for (std::size_t i = 0; i < transcript_.size(); ++i) {
      const auto& part = channel.transcript()[i];
      transcript_[i].insert(transcript_[i].end(), part.begin(), part.end());
    }
    if (opt_.record_views) {
      for (std::size_t i = 0; i < dbs_.size(); ++i) {
        views_full_[i].push_back(view_segment(dbs_[i], starts[i], ViewScope::kFull));
        views_without_shares_[i].push_back(view_segment(dbs_[i], starts[i], ViewScope::kWithoutShares));
      }
    }
    history_.push_back(res);
    iteration_ = res.iteration + 1;
    return res;
  }

  void run(std::uint64_t iterations) {
    for (std::uint64_t k = 0; k < iterations; ++k) step();
  }

  const ProtocolConfig& config() const { return cfg_; }
  const SimulationOptions& options() const { return opt_; }
  const OverheadLedger& ledger() const { return total_; }
  const Transcript& transcript() const { return transcript_; }
  const std::vector<IterationResult>& history() const { return history_; }
  const std::vector<DatabaseServer>& databases() const { return dbs_; }
  const Matrix& reference() const { return reference_->params(); }

  // Per-iteration views of database `db`; needs record_views.
  const std::vector<ViewSegment>& views(std::size_t db, ViewScope scope) const {
    return scope == ViewScope::kFull ? views_full_.at(db) : views_without_shares_.at(db);
  }

  // True when every database holds the same matrix.
  bool replicated() const {
    for (const auto& d : dbs_) {
      if (!(d.state().encoded == dbs_.front().state().encoded)) return false;
    }
    return true;
  }

  // Oracle: plaintext B_t recovered from database state by joining every
  // share. In naive mode the databases already hold B_t.
  Matrix demasked() const {
    if (dbs_.empty()) throw ProtocolError("oracle view needs in-process databases");
    if (opt_.scheme == Scheme::kNaive) return dbs_.front().state().encoded.rows;
    std::vector<ExclusiveShare> shares;
    for (const auto& d : dbs_) shares.push_back(d.state().share);
    IterMessage prev = IterMessage::unflatten(cfg_.mixing.decode(join_shares(shares, cfg_.n_dbs)), cfg_.n_submodels);
    return demask(dbs_.front().state().encoded, prev);
  }

 private:
  void init() {
    trainer_ = make_trainer(opt_.trainer, seeds::trainer(opt_.seed));
    reference_ = std::make_unique<ReferenceModel>(initial_params(cfg_, opt_.seed),
                                                  make_trainer(opt_.trainer, seeds::trainer(opt_.seed)));
    total_ = OverheadLedger(cfg_.n_dbs);
    transcript_.resize(cfg_.n_dbs);
    views_full_.resize(cfg_.n_dbs);
    views_without_shares_.resize(cfg_.n_dbs);
  }

  ProtocolConfig cfg_;
  SimulationOptions opt_;
  std::vector<DatabaseServer> dbs_;
  std::unique_ptr<SimCarrier> owned_carrier_;
  Carrier* carrier_ = nullptr;
  std::unique_ptr<Trainer> trainer_;
  std::unique_ptr<ReferenceModel> reference_;
  OverheadLedger total_;
  Transcript transcript_;
  std::vector<IterationResult> history_;
  std::vector<std::vector<ViewSegment>> views_full_;
  std::vector<std::vector<ViewSegment>> views_without_shares_;
  std::uint64_t iteration_ = 1;
};

}  // namespace fedsub
