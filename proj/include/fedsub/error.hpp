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

#include <stdexcept>
#include <string>

namespace fedsub {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Modulus mismatch, inverse of zero.
class FieldError : public Error {
 public:
  using Error::Error;
};

// A parameter combination violates a divisibility or field-size constraint.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes on the wire.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Protocol-level failure: PIR decode failure, malformed messages, rejected
// uploads, error frames returned by a database.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Connection refused, closed, or timed out.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsub
