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

/**
 * @file simulator.hpp
 * @brief Barrier-synchronized superstep simulator with strict word accounting.
 *
 * One Simulator::step() is one communication round: every machine runs its
 * local function, messages are collected, send/receive caps are verified, and
 * inboxes are delivered for the next round in a deterministic order (sorted by
 * sender id, then emission order).  Local computation inside a step is
 * unmetered; resident memory is metered at every barrier.
 */

#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <span>
#include <thread>
#include <vector>

#include "mpctree/core/base.hpp"

namespace mpctree {

struct InMessage {
  std::size_t sender;
  std::span<const Word> payload;
};

class Simulator;

// Per-machine view handed to the local step function.  All cross-machine
// effects must flow through send(); reading another machine's state from the
// step function is a bug.
class MachineIO {
 public:
  std::size_t id() const { return id_; }
  std::size_t machine_count() const;
  std::size_t capacity() const;

  std::size_t inbox_size() const { return msgs_->size(); }
  InMessage inbox(std::size_t i) const {
    const auto& m = (*msgs_)[i];
    return {m.sender, std::span<const Word>(data_->data() + m.offset, m.len)};
  }

  // Total words currently in the inbox.
  std::size_t inbox_words() const { return data_->size(); }

  void send(std::size_t to, const Word* words, std::size_t n);
  void send(std::size_t to, std::initializer_list<Word> words) {
    send(to, std::data(words), words.size());
  }

  template <class T>
  void send_rec(std::size_t to, const T& rec) {
    static_assert(std::is_trivially_copyable_v<T> && sizeof(T) % 8 == 0);
    Word buf[sizeof(T) / 8];
    std::memcpy(buf, &rec, sizeof(T));
    send(to, buf, sizeof(T) / 8);
  }

  // Decodes an inbox message as a run of fixed-width records.
  template <class T>
  static std::span<const T> as_records(const InMessage& m) {
    static_assert(std::is_trivially_copyable_v<T> && sizeof(T) % 8 == 0);
    MPCTREE_CHECK(m.payload.size() % (sizeof(T) / 8) == 0, "message is not a whole record run");
    return std::span<const T>(reinterpret_cast<const T*>(m.payload.data()),
                              m.payload.size() / (sizeof(T) / 8));
  }

 private:
  friend class Simulator;
  struct MsgRef { std::size_t sender; std::size_t offset; std::size_t len; };

  Simulator* sim_ = nullptr;
  std::size_t id_ = 0;
  const std::vector<MsgRef>* msgs_ = nullptr;
  const std::vector<Word>* data_ = nullptr;
  // outbox under construction: (to, payload) in emission order
  std::vector<std::pair<std::size_t, std::vector<Word>>>* out_ = nullptr;
  std::size_t sent_words_ = 0;
};

class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    machine_count_ = cfg_.machines();
    capacity_ = cfg_.capacity();
    inbox_data_.resize(machine_count_);
    inbox_msgs_.resize(machine_count_);
    mem_words_.resize(machine_count_, 0);
    phase_ = "misc";
  }

  std::size_t machine_count() const { return machine_count_; }
  std::size_t capacity() const { return capacity_; }
  const SimConfig& config() const { return cfg_; }

  RoundMetrics& metrics() { return metrics_; }
  const RoundMetrics& metrics() const { return metrics_; }

  void set_phase(std::string label) { phase_ = std::move(label); }
  const std::string& phase() const { return phase_; }

  // When set, local step functions run on a small thread pool.  Results are
  // required to be identical to serial execution (machines share no state).
  bool parallel_local = false;

  // Runs one communication round.
  void step(const std::function<void(MachineIO&)>& local) {
    std::vector<std::vector<std::pair<std::size_t, std::vector<Word>>>> out(machine_count_);
    auto run_machine = [&](std::size_t i) {
      MachineIO io;
      io.sim_ = this;
      io.id_ = i;
      io.msgs_ = &inbox_msgs_[i];
      io.data_ = &inbox_data_[i];
      io.out_ = &out[i];
      local(io);
    };
    if (parallel_local && machine_count_ > 1) {
      unsigned threads = std::min<std::size_t>(std::thread::hardware_concurrency(), 8);
      if (threads < 2) threads = 2;
      std::vector<std::thread> pool;
      std::size_t chunk = div_ceil(machine_count_, threads);
      for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(machine_count_, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] { for (std::size_t i = lo; i < hi; ++i) run_machine(i); });
      }
      for (auto& th : pool) th.join();
    } else {
      for (std::size_t i = 0; i < machine_count_; ++i) run_machine(i);
    }

    // Deliver: messages arrive sorted by sender id, then emission order.
    std::vector<std::vector<Word>> next_data(machine_count_);
    std::vector<std::vector<MachineIO::MsgRef>> next_msgs(machine_count_);
    std::vector<std::size_t> recv_words(machine_count_, 0);
    std::size_t max_sent = 0;
    for (std::size_t s = 0; s < machine_count_; ++s) {
      std::size_t sent = 0;
      for (auto& [to, payload] : out[s]) {
        sent += payload.size();
        recv_words[to] += payload.size();
        if (recv_words[to] > capacity_)
          throw CapacityExceeded(to, CapDirection::Receive, recv_words[to], capacity_);
        auto& data = next_data[to];
        next_msgs[to].push_back({s, data.size(), payload.size()});
        data.insert(data.end(), payload.begin(), payload.end());
      }
      max_sent = std::max(max_sent, sent);
    }
    inbox_data_ = std::move(next_data);
    inbox_msgs_ = std::move(next_msgs);

    metrics_.rounds += 1;
    metrics_.phase_breakdown[phase_] += 1;
    metrics_.peak_sent_words = std::max(metrics_.peak_sent_words, max_sent);
    std::size_t max_recv = 0;
    for (auto r : recv_words) max_recv = std::max(max_recv, r);
    metrics_.peak_received_words = std::max(metrics_.peak_received_words, max_recv);

    // Barrier memory check: resident array words plus the delivered inbox.
    for (std::size_t i = 0; i < machine_count_; ++i) {
      std::size_t used = mem_words_[i];
      if (used > capacity_) throw CapacityExceeded(i, CapDirection::Memory, used, capacity_);
      metrics_.peak_memory_words = std::max(metrics_.peak_memory_words, used + inbox_data_[i].size());
    }
  }

  // Local post-processing of the last delivery: runs per-machine functions on
  // the current inboxes without starting a new communication round.  Sends are
  // forbidden here.  Inboxes are drained afterwards.
  void absorb(const std::function<void(MachineIO&)>& local) {
    std::vector<std::pair<std::size_t, std::vector<Word>>> no_out;
    auto run_machine = [&](std::size_t i) {
      MachineIO io;
      io.sim_ = this;
      io.id_ = i;
      io.msgs_ = &inbox_msgs_[i];
      io.data_ = &inbox_data_[i];
      io.out_ = nullptr;
      local(io);
    };
    if (parallel_local && machine_count_ > 1) {
      unsigned threads = std::min<std::size_t>(std::thread::hardware_concurrency(), 8);
      if (threads < 2) threads = 2;
      std::vector<std::thread> pool;
      std::size_t chunk = div_ceil(machine_count_, threads);
      for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(machine_count_, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] { for (std::size_t i = lo; i < hi; ++i) run_machine(i); });
      }
      for (auto& th : pool) th.join();
    } else {
      for (std::size_t i = 0; i < machine_count_; ++i) run_machine(i);
    }
    for (auto& d : inbox_data_) d.clear();
    for (auto& m : inbox_msgs_) m.clear();
    for (std::size_t i = 0; i < machine_count_; ++i) {
      std::size_t used = mem_words_[i];
      if (used > capacity_) throw CapacityExceeded(i, CapDirection::Memory, used, capacity_);
      metrics_.peak_memory_words = std::max(metrics_.peak_memory_words, used);
    }
  }

  // Resident-memory ledger used by DistArray.
  void account(std::size_t machine, std::ptrdiff_t delta_words) {
    mem_words_[machine] += delta_words;
  }
  std::size_t resident_words(std::size_t machine) const { return mem_words_[machine]; }

  // Digest over delivered inboxes; used by determinism tests.
  std::uint64_t inbox_digest() const {
    std::uint64_t h = 0x2545f4914f6cdd1dull;
    for (std::size_t i = 0; i < machine_count_; ++i)
      for (Word w : inbox_data_[i]) h = hash_mix(h, w);
    return h;
  }

 private:
  friend class MachineIO;
  SimConfig cfg_;
  std::size_t machine_count_ = 0;
  std::size_t capacity_ = 0;
  std::string phase_;
  RoundMetrics metrics_;
  std::vector<std::vector<Word>> inbox_data_;
  std::vector<std::vector<MachineIO::MsgRef>> inbox_msgs_;
  std::vector<std::size_t> mem_words_;
};

inline std::size_t MachineIO::machine_count() const { return sim_->machine_count(); }
inline std::size_t MachineIO::capacity() const { return sim_->capacity(); }

inline void MachineIO::send(std::size_t to, const Word* words, std::size_t n) {
  MPCTREE_CHECK(out_ != nullptr, "sends are forbidden in absorb()");
  MPCTREE_CHECK(to < sim_->machine_count(), "send to unknown machine");
  MPCTREE_CHECK(to != id_, "self-sends are not messages; keep the data local");
  sent_words_ += n;
  if (sent_words_ > sim_->capacity())
    throw CapacityExceeded(id_, CapDirection::Send, sent_words_, sim_->capacity());
  if (!out_->empty() && out_->back().first == to) {
    auto& buf = out_->back().second;
    buf.insert(buf.end(), words, words + n);
  } else {
    out_->emplace_back(to, std::vector<Word>(words, words + n));
  }
}

}  // namespace mpctree
