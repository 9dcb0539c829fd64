/*
 * Copyright 2026 The mpctree Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace mpctree {

// Every unit of memory and communication is one 64-bit word.
using Word = std::uint64_t;

inline Word f64_to_word(double x) { return std::bit_cast<Word>(x); }
inline double word_to_f64(Word w) { return std::bit_cast<double>(w); }
inline Word i64_to_word(std::int64_t x) { return std::bit_cast<Word>(x); }
inline std::int64_t word_to_i64(Word w) { return std::bit_cast<std::int64_t>(w); }

inline std::size_t div_ceil(std::size_t a, std::size_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

// Number of bits needed to store values in [0, max_value].
inline unsigned bits_for(Word max_value) {
  unsigned b = 0;
  while (max_value > 0) { ++b; max_value >>= 1; }
  return b == 0 ? 1 : b;
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  v *= 0x9e3779b97f4a7c15ull;
  v ^= v >> 32;
  h ^= v + 0x632be59bd9b4e019ull + (h << 6) + (h >> 2);
  return h;
}

#define MPCTREE_CHECK(cond, msg)                                     \
  do {                                                               \
    if (!(cond)) throw std::logic_error(std::string("mpctree internal: ") + (msg)); \
  } while (0)

enum class CapDirection { Send, Receive, Memory };

inline const char* to_string(CapDirection d) {
  switch (d) {
    case CapDirection::Send: return "send";
    case CapDirection::Receive: return "receive";
    default: return "memory";
  }
}

// Raised whenever a machine violates its per-round word budget.  This is the
// signal that the hosted algorithm is not a valid MPC algorithm at this delta.
class CapacityExceeded : public std::runtime_error {
 public:
  CapacityExceeded(std::size_t machine, CapDirection dir, std::size_t words, std::size_t cap)
      : std::runtime_error("machine " + std::to_string(machine) + " exceeded " +
                           to_string(dir) + " capacity: " + std::to_string(words) + " > " +
                           std::to_string(cap)),
        machine_id(machine), direction(dir), words(words), capacity(cap) {}
  std::size_t machine_id;
  CapDirection direction;
  std::size_t words;
  std::size_t capacity;
};

class MalformedInput : public std::runtime_error {
 public:
  MalformedInput(std::size_t position, const std::string& reason)
      : std::runtime_error("malformed input at " + std::to_string(position) + ": " + reason),
        position(position), reason(reason) {}
  std::size_t position;
  std::string reason;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Simulated machine fleet: machine_count machines with `capacity` words of
// local memory each, exchanging at most `capacity` words per direction per
// communication round.
struct SimConfig {
  std::size_t n_words = 0;      // total input size, in words
  double delta = 0.5;           // local memory exponent
  double capacity_factor = 4.0; // the constant inside Theta(n^delta)
  std::size_t machine_count = 0; // 0 = use the default

  std::size_t capacity() const {
    double c = capacity_factor * std::pow(static_cast<double>(n_words), delta);
    auto cap = static_cast<std::size_t>(std::ceil(c));
    return cap < 2 ? 2 : cap;
  }

  std::size_t machines() const {
    if (machine_count != 0) return machine_count;
    double m = capacity_factor * std::pow(static_cast<double>(n_words), 1.0 - delta);
    auto mc = static_cast<std::size_t>(std::ceil(m));
    if (mc < 1) mc = 1;
    // The fleet as a whole must be able to hold the input.
    std::size_t floor_mc = div_ceil(n_words, capacity());
    return mc < floor_mc ? floor_mc : mc;
  }

  void validate() const {
    if (n_words == 0) throw ConfigError("n_words must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (capacity_factor <= 0.0) throw ConfigError("capacity_factor must be positive");
    if (machines() * capacity() < n_words)
      throw ConfigError("machine_count * capacity does not hold the input");
  }
};

// Per-run accounting of communication rounds and peak word volumes.
struct RoundMetrics {
  std::size_t rounds = 0;
  std::size_t peak_memory_words = 0;
  std::size_t peak_sent_words = 0;
  std::size_t peak_received_words = 0;
  std::map<std::string, std::size_t> phase_breakdown;

  std::size_t phase_rounds(const std::string& label) const {
    auto it = phase_breakdown.find(label);
    return it == phase_breakdown.end() ? 0 : it->second;
  }
};

}  // namespace mpctree
