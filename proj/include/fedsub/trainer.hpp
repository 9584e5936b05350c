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

// Training is a black box to the protocol: a deterministic map from the
// current submodel to its next value. Implementations count their calls.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedsub/error.hpp"
#include "fedsub/field.hpp"
#include "fedsub/rng.hpp"

namespace fedsub {

class Trainer {
 public:
  virtual ~Trainer() = default;

  Vec train(std::span<const Element> params, std::uint64_t iteration) {
    ++calls_;
    return step(params, iteration);
  }
  std::uint64_t calls() const { return calls_; }

 protected:
  virtual Vec step(std::span<const Element> params, std::uint64_t iteration) = 0;

 private:
  std::uint64_t calls_ = 0;
};

// Adds a pseudorandom update derived from (seed, iteration, params).
class PseudorandomTrainer : public Trainer {
 public:
  explicit PseudorandomTrainer(std::uint64_t seed) : seed_(seed) {}

 protected:
  Vec step(std::span<const Element> params, std::uint64_t iteration) override {
    std::uint64_t h = derive_seed(seed_, iteration);
    for (const auto& e : params) h = mix64(h ^ e.value());
    Rng rng(h);
    if (params.empty()) return {};
    return add(params, random_vec(rng, params.size(), params.front().modulus()));
  }

 private:
  std::uint64_t seed_;
};

// One gradient step of least squares on a synthetic regression task.
// Parameters are fixed-point reals with scale 2^8; values above q/2 are
// negative.
class QuantizedLeastSquaresTrainer : public Trainer {
 public:
  static constexpr double kScale = 256.0;
  static constexpr std::size_t kSamples = 16;
  static constexpr double kLearningRate = 0.1;

  explicit QuantizedLeastSquaresTrainer(std::uint64_t seed) : seed_(seed) {}

  static double to_real(const Element& e) {
    const auto q = static_cast<std::int64_t>(e.q());
    auto v = static_cast<std::int64_t>(e.value());
    if (v > q / 2) v -= q;
    return static_cast<double>(v) / kScale;
  }

  static Element from_real(double x, const Modulus& m) {
    const auto q = static_cast<std::int64_t>(m.value());
    auto v = static_cast<std::int64_t>(std::llround(x * kScale)) % q;
    if (v < 0) v += q;
    return Element(static_cast<std::uint64_t>(v), m);
  }

 protected:
  Vec step(std::span<const Element> params, std::uint64_t iteration) override {
    const std::size_t s = params.size();
    if (s == 0) return {};
    const Modulus m = params.front().modulus();
    // Fixed target weights per seed; a fresh minibatch per iteration.
    Rng target_rng(derive_seed(seed_, 0xA11CE));
    std::vector<double> target(s);
    for (auto& w : target) w = unit(target_rng);
    Rng batch_rng(derive_seed(seed_, iteration));

    std::vector<double> w(s);
    for (std::size_t j = 0; j < s; ++j) w[j] = to_real(params[j]);
    std::vector<double> grad(s, 0.0);
    for (std::size_t i = 0; i < kSamples; ++i) {
      std::vector<double> x(s);
      double residual = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        x[j] = unit(batch_rng);
        residual += x[j] * (w[j] - target[j]);
      }
      for (std::size_t j = 0; j < s; ++j) grad[j] += residual * x[j] / kSamples;
    }
    Vec out;
    out.reserve(s);
    for (std::size_t j = 0; j < s; ++j) out.push_back(from_real(w[j] - kLearningRate * grad[j], m));
    return out;
  }

 private:
  // Uniform in [-1, 1) from 53 random bits.
  static double unit(Rng& rng) { return static_cast<double>(rng.next() >> 11) * 0x1.0p-52 - 1.0; }

  std::uint64_t seed_;
};

// Returns params + delta, for a fixed delta. Enumeration uses this to range
// over every possible training outcome.
class FixedDeltaTrainer : public Trainer {
 public:
  explicit FixedDeltaTrainer(Vec delta) : delta_(std::move(delta)) {}

 protected:
  Vec step(std::span<const Element> params, std::uint64_t) override { return add(params, delta_); }

 private:
  Vec delta_;
};

enum class TrainerKind { kPseudorandom, kQuantizedLeastSquares };

inline std::unique_ptr<Trainer> make_trainer(TrainerKind kind, std::uint64_t seed) {
  switch (kind) {
    case TrainerKind::kPseudorandom: return std::make_unique<PseudorandomTrainer>(seed);
    case TrainerKind::kQuantizedLeastSquares: return std::make_unique<QuantizedLeastSquaresTrainer>(seed);
  }
  throw ConfigError("unknown trainer kind");
}

}  // namespace fedsub
