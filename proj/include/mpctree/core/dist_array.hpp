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

#include <vector>

#include "mpctree/core/simulator.hpp"

namespace mpctree {

template <class T>
concept WordRecord = std::is_trivially_copyable_v<T> && sizeof(T) % 8 == 0 && alignof(T) <= 8;

template <WordRecord T>
constexpr std::size_t record_width = sizeof(T) / 8;

// A block-distributed array of fixed-width records: global index i lives on
// machine i / per_machine.  Blocks count against machine memory for the whole
// lifetime of the array.  load()/collect() are the out-of-band input/output
// boundary (the model assumes the input starts distributed), not rounds.
template <WordRecord T>
class DistArray {
 public:
  DistArray(Simulator& sim, std::size_t n) : sim_(&sim), n_(n) {
    per_ = div_ceil(n, sim.machine_count());
    blocks_.resize(sim.machine_count());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      std::size_t len = block_len(i);
      blocks_[i].resize(len);
      sim_->account(i, static_cast<std::ptrdiff_t>(len * record_width<T>));
    }
  }

  DistArray(const DistArray&) = delete;
  DistArray& operator=(const DistArray&) = delete;

  DistArray(DistArray&& o) noexcept
      : sim_(o.sim_), n_(o.n_), per_(o.per_), blocks_(std::move(o.blocks_)) {
    o.sim_ = nullptr;
    o.blocks_.clear();
  }
  DistArray& operator=(DistArray&& o) noexcept {
    if (this != &o) {
      release();
      sim_ = o.sim_; n_ = o.n_; per_ = o.per_; blocks_ = std::move(o.blocks_);
      o.sim_ = nullptr;
      o.blocks_.clear();
    }
    return *this;
  }
  ~DistArray() { release(); }

  std::size_t size() const { return n_; }
  std::size_t per_machine() const { return per_; }

  std::size_t owner(std::size_t i) const { return per_ == 0 ? 0 : i / per_; }
  std::size_t local_index(std::size_t i) const { return per_ == 0 ? 0 : i % per_; }
  std::size_t block_base(std::size_t machine) const { return machine * per_; }
  std::size_t block_len(std::size_t machine) const {
    if (per_ == 0) return 0;
    std::size_t lo = machine * per_;
    return lo >= n_ ? 0 : std::min(per_, n_ - lo);
  }

  std::vector<T>& block(std::size_t machine) { return blocks_[machine]; }
  const std::vector<T>& block(std::size_t machine) const { return blocks_[machine]; }

  // Replaces a machine's block, updating the memory ledger.
  void replace_block(std::size_t machine, std::vector<T>&& b) {
    sim_->account(machine, (static_cast<std::ptrdiff_t>(b.size()) -
                            static_cast<std::ptrdiff_t>(blocks_[machine].size())) *
                               static_cast<std::ptrdiff_t>(record_width<T>));
    blocks_[machine] = std::move(b);
  }
  void clear_block(std::size_t machine) { replace_block(machine, {}); }

  void load(const std::vector<T>& global) {
    MPCTREE_CHECK(global.size() == n_, "load size mismatch");
    for (std::size_t m = 0; m < blocks_.size(); ++m) {
      std::size_t len = block_len(m);
      std::vector<T> b(global.begin() + block_base(m), global.begin() + block_base(m) + len);
      replace_block(m, std::move(b));
    }
  }

  std::vector<T> collect() const {
    std::vector<T> out;
    out.reserve(n_);
    for (const auto& b : blocks_) out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  Simulator& sim() const { return *sim_; }

 private:
  void release() {
    if (!sim_) return;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (!blocks_[i].empty())
        sim_->account(i, -static_cast<std::ptrdiff_t>(blocks_[i].size() * record_width<T>));
    sim_ = nullptr;
  }

  Simulator* sim_;
  std::size_t n_ = 0;
  std::size_t per_ = 0;
  std::vector<std::vector<T>> blocks_;
};

}  // namespace mpctree
