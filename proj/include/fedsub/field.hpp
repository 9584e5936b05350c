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

// Prime-field arithmetic over F_q, q < 2^32.
//
// Every element carries its modulus so that mixing elements of different
// fields is caught at run time. Elements and vectors are plain values.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/rng.hpp"

namespace fedsub {

class Element;

class Modulus {
 public:
  // Throws FieldError if q is not a prime below 2^32.
  explicit Modulus(std::uint64_t q) : q_(q) {
    if (q < 2 || q > UINT32_MAX || !is_prime(q)) {
      throw FieldError("modulus " + std::to_string(q) + " is not a prime below 2^32");
    }
  }

  std::uint64_t value() const { return q_; }

  // Bits needed to write one symbol, ceil(log2 q).
  unsigned bits_per_symbol() const {
    unsigned b = 0;
    while ((std::uint64_t{1} << b) < q_) ++b;
    return b;
  }

  static bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (std::uint64_t d = 3; d * d <= n; d += 2) {
      if (n % d == 0) return false;
    }
    return true;
  }

  friend bool operator==(const Modulus&, const Modulus&) = default;

 private:
  friend class Element;
  struct Trusted {};
  Modulus(std::uint64_t q, Trusted) : q_(q) {}
  static Modulus unchecked(std::uint64_t q) { return Modulus(q, Trusted{}); }

  std::uint64_t q_;
};

class Element {
 public:
  Element(std::uint64_t value, const Modulus& m) : v_(value % m.value()), q_(m.value()) {}

  static Element zero(const Modulus& m) { return Element(0, m); }
  static Element one(const Modulus& m) { return Element(1, m); }

  std::uint64_t value() const { return v_; }
  Modulus modulus() const { return Modulus::unchecked(q_); }
  std::uint64_t q() const { return q_; }
  bool is_zero() const { return v_ == 0; }

  friend Element operator+(Element a, const Element& b) {
    a.check(b);
    a.v_ = (a.v_ + b.v_) % a.q_;
    return a;
  }
  friend Element operator-(Element a, const Element& b) {
    a.check(b);
    a.v_ = (a.v_ + a.q_ - b.v_) % a.q_;
    return a;
  }
  friend Element operator*(Element a, const Element& b) {
    a.check(b);
    a.v_ = (a.v_ * b.v_) % a.q_;
    return a;
  }
  Element operator-() const {
    Element r = *this;
    r.v_ = (q_ - v_) % q_;
    return r;
  }
  Element& operator+=(const Element& b) { return *this = *this + b; }
  Element& operator-=(const Element& b) { return *this = *this - b; }
  Element& operator*=(const Element& b) { return *this = *this * b; }

  Element pow(std::uint64_t e) const {
    Element base = *this;
    Element acc(1, Modulus::unchecked(q_));
    while (e) {
      if (e & 1) acc *= base;
      base *= base;
      e >>= 1;
    }
    return acc;
  }

  // Multiplicative inverse by extended Euclid.
  Element inv() const {
    if (v_ == 0) throw FieldError("no inverse: zero element");
    std::int64_t t = 0, new_t = 1;
    std::int64_t r = static_cast<std::int64_t>(q_), new_r = static_cast<std::int64_t>(v_);
    while (new_r != 0) {
      std::int64_t quot = r / new_r;
      t = std::exchange(new_t, t - quot * new_t);
      r = std::exchange(new_r, r - quot * new_r);
    }
    if (t < 0) t += static_cast<std::int64_t>(q_);
    Element out = *this;
    out.v_ = static_cast<std::uint64_t>(t);
    return out;
  }

  friend Element operator/(const Element& a, const Element& b) { return a * b.inv(); }

  friend bool operator==(const Element& a, const Element& b) = default;

 private:
  void check(const Element& b) const {
    if (q_ != b.q_) {
      throw FieldError("modulus mismatch: " + std::to_string(q_) + " vs " + std::to_string(b.q_));
    }
  }

  std::uint64_t v_;
  std::uint64_t q_;
};

using Vec = std::vector<Element>;

// Field-element wire encoding: 4-byte big-endian, value < q.
inline void write_element(ByteWriter& w, const Element& e) { w.u32(static_cast<std::uint32_t>(e.value())); }

inline Element read_element(ByteReader& r, const Modulus& m) {
  std::uint64_t v = r.u32();
  if (v >= m.value()) {
    throw DecodeError("field element " + std::to_string(v) + " out of range for q=" +
                      std::to_string(m.value()));
  }
  return Element(v, m);
}

inline Bytes encode_element(const Element& e) {
  ByteWriter w;
  write_element(w, e);
  return std::move(w).bytes();
}

inline Element decode_element(std::span<const std::uint8_t> b, const Modulus& m) {
  ByteReader r(b);
  Element e = read_element(r, m);
  r.expect_done("field element");
  return e;
}

inline void write_vec(ByteWriter& w, std::span<const Element> v) {
  for (const auto& e : v) write_element(w, e);
}

inline Vec read_vec(ByteReader& r, std::size_t n, const Modulus& m) {
  Vec out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(read_element(r, m));
  return out;
}

inline Vec zeros(std::size_t n, const Modulus& m) { return Vec(n, Element::zero(m)); }

inline Vec from_values(std::span<const std::uint64_t> values, const Modulus& m) {
  Vec out;
  out.reserve(values.size());
  for (auto v : values) out.emplace_back(v, m);
  return out;
}

inline Vec from_values(std::initializer_list<std::uint64_t> values, const Modulus& m) {
  return from_values(std::span<const std::uint64_t>(values.begin(), values.size()), m);
}

inline std::vector<std::uint64_t> to_values(std::span<const Element> v) {
  std::vector<std::uint64_t> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(e.value());
  return out;
}

inline Vec random_vec(Rng& rng, std::size_t n, const Modulus& m) {
  Vec out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.uniform(m.value()), m);
  return out;
}

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw FieldError("vector length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}
}  // namespace detail

inline Vec add(std::span<const Element> a, std::span<const Element> b) {
  detail::check_lengths(a.size(), b.size());
  Vec out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + b[i]);
  return out;
}

inline Vec sub(std::span<const Element> a, std::span<const Element> b) {
  detail::check_lengths(a.size(), b.size());
  Vec out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  return out;
}

inline Vec scale(const Element& c, std::span<const Element> v) {
  Vec out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(c * e);
  return out;
}

}  // namespace fedsub
