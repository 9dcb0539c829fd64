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
 * @file collectives.hpp
 * @brief O(1)-round primitives on distributed arrays: broadcast, allreduce,
 * prefix scan, and a deterministic distribution sort.
 *
 * Every schedule (tree arities, depths, digit widths, pass counts) is derived
 * from the SimConfig and the declared key ranges only, never from the data, so
 * round counts are a pure function of (n_words, delta, ranges).  The sort is a
 * least-significant-digit distribution sort over integer keys with declared
 * ranges; each pass computes exact destination ranks from a tree-aggregated
 * histogram, so the output is exactly balanced and every pass is stable.
 */

#pragma once

#include <array>
#include <numeric>

#include "mpctree/core/dist_array.hpp"

namespace mpctree {

struct TreePlan {
  std::size_t arity = 2;
  std::size_t depth = 1;
  std::vector<std::size_t> gsize;  // gsize[l] = arity^l, top level capped at m

  static TreePlan make(std::size_t machines, std::size_t arity) {
    TreePlan p;
    p.arity = arity < 2 ? 2 : arity;
    p.depth = 1;
    std::size_t reach = p.arity;
    while (reach < machines) { reach *= p.arity; p.depth += 1; }
    p.gsize.resize(p.depth + 1);
    p.gsize[0] = 1;
    for (std::size_t l = 1; l <= p.depth; ++l)
      p.gsize[l] = p.gsize[l - 1] * p.arity;
    return p;
  }
};

inline std::size_t tree_arity_for_payload(std::size_t capacity, std::size_t payload_words) {
  std::size_t b = capacity / (4 * payload_words);
  return b < 2 ? 2 : b;
}

// ---------------------------------------------------------------------------
// broadcast: the source's value reaches every machine over a capacity-ary
// tree; one machine's sends fit one round.  `slots` holds one record per
// machine; on return every slot carries the source's record.
// ---------------------------------------------------------------------------
template <WordRecord T>
void broadcast(Simulator& sim, DistArray<T>& slots, std::size_t source) {
  const std::size_t m = sim.machine_count();
  MPCTREE_CHECK(slots.size() == m, "broadcast slots must be one per machine");
  std::size_t b = sim.capacity() / record_width<T>;
  if (b < 2) b = 2;
  std::size_t depth = TreePlan::make(m, b).depth;
  auto rank_of = [&](std::size_t i) { return (i + m - source) % m; };
  auto machine_of = [&](std::size_t r) { return (r + source) % m; };
  auto ingest = [&](MachineIO& io) {
    for (std::size_t k = 0; k < io.inbox_size(); ++k) {
      auto recs = MachineIO::as_records<T>(io.inbox(k));
      if (!recs.empty()) slots.block(io.id())[0] = recs[0];
    }
  };
  std::size_t holders = 1;
  for (std::size_t t = 0; t < depth; ++t) {
    sim.step([&](MachineIO& io) {
      ingest(io);
      std::size_t r = rank_of(io.id());
      if (r < holders) {
        for (std::size_t j = 1; j < b; ++j) {
          std::size_t target = r + holders * j;
          if (target >= m) break;
          io.send_rec(machine_of(target), slots.block(io.id())[0]);
        }
      }
    });
    holders = std::min(m, holders * b);
    if (holders >= m && t + 1 < depth) { /* keep schedule length fixed */ }
  }
  sim.absorb(ingest);
}

// ---------------------------------------------------------------------------
// allreduce: combines one record per machine with an associative op; the
// result lands on every machine (and is returned to the host caller).
// ---------------------------------------------------------------------------
template <WordRecord T, class Op>
T allreduce(Simulator& sim, DistArray<T>& slots, Op op) {
  const std::size_t m = sim.machine_count();
  MPCTREE_CHECK(slots.size() == m, "allreduce slots must be one per machine");
  std::size_t b = tree_arity_for_payload(sim.capacity(), record_width<T>);
  TreePlan plan = TreePlan::make(m, b);
  for (std::size_t t = 1; t <= plan.depth; ++t) {
    sim.step([&, t](MachineIO& io) {
      std::size_t i = io.id();
      if (i % plan.gsize[t - 1] != 0) return;
      T& s = slots.block(i)[0];
      for (std::size_t k = 0; k < io.inbox_size(); ++k)
        for (const T& r : MachineIO::as_records<T>(io.inbox(k))) s = op(s, r);
      std::size_t L = i - i % std::min(plan.gsize[t], m);
      if (t == plan.depth) L = 0;
      else L = i - i % plan.gsize[t];
      if (L != i) io.send_rec(L, s);
    });
  }
  for (std::size_t t = plan.depth; t >= 1; --t) {
    sim.step([&, t](MachineIO& io) {
      std::size_t i = io.id();
      if (i % plan.gsize[t] != 0 && !(t == plan.depth && i == 0)) return;
      if (t == plan.depth && i != 0) return;
      T& s = slots.block(i)[0];
      for (std::size_t k = 0; k < io.inbox_size(); ++k) {
        auto recs = MachineIO::as_records<T>(io.inbox(k));
        if (!recs.empty()) s = recs.back();
      }
      for (std::size_t j = 1; j < plan.arity; ++j) {
        std::size_t child = i + j * plan.gsize[t - 1];
        if (child >= m || child >= i + plan.gsize[t]) break;
        io.send_rec(child, s);
      }
    });
  }
  sim.absorb([&](MachineIO& io) {
    for (std::size_t k = 0; k < io.inbox_size(); ++k) {
      auto recs = MachineIO::as_records<T>(io.inbox(k));
      if (!recs.empty()) slots.block(io.id())[0] = recs.back();
    }
  });
  return slots.block(0)[0];
}

struct WordSlot { Word v; };

template <class Op>
Word allreduce_word(Simulator& sim, Op op, Word identity,
                    const std::function<Word(std::size_t)>& contribution) {
  DistArray<WordSlot> slots(sim, sim.machine_count());
  for (std::size_t i = 0; i < sim.machine_count(); ++i)
    slots.block(i)[0].v = contribution(i);
  (void)identity;
  WordSlot r = allreduce(sim, slots, [&](WordSlot a, WordSlot b) { return WordSlot{op(a.v, b.v)}; });
  return r.v;
}

inline bool global_or(Simulator& sim, const std::function<bool(std::size_t)>& flag) {
  return allreduce_word(sim, [](Word a, Word b) { return a | b; }, 0,
                        [&](std::size_t i) { return Word(flag(i) ? 1 : 0); }) != 0;
}

// ---------------------------------------------------------------------------
// prefix scan (inclusive) with an associative op.  The up-sweep forwards
// block totals to group leaders while later siblings accumulate their
// predecessors' partial sums, so the down-sweep only delivers group bases.
// Returns the global total.
// ---------------------------------------------------------------------------
template <WordRecord T, class Op>
T prefix_scan(Simulator& sim, DistArray<T>& arr, Op op, T identity) {
  const std::size_t m = sim.machine_count();
  std::size_t b = tree_arity_for_payload(sim.capacity(), record_width<T>);
  TreePlan plan = TreePlan::make(m, b);
  const std::size_t D = plan.depth;

  DistArray<T> subtotal(sim, m);
  DistArray<T> memo(sim, m * D);  // memo[l] converts a level-(l+1) base to level l
  DistArray<T> base(sim, m);
  for (std::size_t i = 0; i < m; ++i) {
    T s = identity;
    for (const T& r : arr.block(i)) s = op(s, r);
    subtotal.block(i)[0] = s;
    base.block(i)[0] = identity;
    for (std::size_t l = 0; l < D; ++l) memo.block(i)[l] = identity;
  }

  // Classifies step-(t-1) arrivals: children aggregates if this machine leads
  // a level-(t-1) group, else preceding-sibling partials.
  auto ingest_up = [&](MachineIO& io, std::size_t t) {
    std::size_t i = io.id();
    bool leader = (i % plan.gsize[t - 1] == 0);
    for (std::size_t k = 0; k < io.inbox_size(); ++k) {
      for (const T& r : MachineIO::as_records<T>(io.inbox(k))) {
        if (leader)
          subtotal.block(i)[0] = op(subtotal.block(i)[0], r);
        else
          memo.block(i)[t - 2] = op(memo.block(i)[t - 2], r);
      }
    }
  };

  for (std::size_t t = 1; t <= D; ++t) {
    sim.step([&, t](MachineIO& io) {
      std::size_t i = io.id();
      if (t > 1) ingest_up(io, t);
      if (i % plan.gsize[t - 1] != 0) return;
      std::size_t L = i - i % plan.gsize[t];
      const T& s = subtotal.block(i)[0];
      if (L != i) io.send_rec(L, s);
      for (std::size_t j = (i - L) / plan.gsize[t - 1] + 1; j < plan.arity; ++j) {
        std::size_t sib = L + j * plan.gsize[t - 1];
        if (sib >= m || sib >= L + plan.gsize[t]) break;
        io.send_rec(sib, s);
      }
    });
  }

  for (std::size_t u = 1; u <= D; ++u) {
    std::size_t lvl = D + 1 - u;
    sim.step([&, u, lvl](MachineIO& io) {
      std::size_t i = io.id();
      if (u == 1) {
        ingest_up(io, D + 1);
      } else {
        for (std::size_t k = 0; k < io.inbox_size(); ++k) {
          auto recs = MachineIO::as_records<T>(io.inbox(k));
          if (!recs.empty()) base.block(i)[0] = op(recs[0], memo.block(i)[lvl]);
        }
      }
      if (i % plan.gsize[lvl] != 0) return;
      for (std::size_t j = 1; j < plan.arity; ++j) {
        std::size_t child = i + j * plan.gsize[lvl - 1];
        if (child >= m || child >= i + plan.gsize[lvl]) break;
        io.send_rec(child, base.block(i)[0]);
      }
    });
  }

  sim.absorb([&](MachineIO& io) {
    std::size_t i = io.id();
    for (std::size_t k = 0; k < io.inbox_size(); ++k) {
      auto recs = MachineIO::as_records<T>(io.inbox(k));
      if (!recs.empty()) base.block(i)[0] = op(recs[0], memo.block(i)[0]);
    }
    T run = base.block(i)[0];
    for (T& r : arr.block(i)) { run = op(run, r); r = run; }
  });

  return subtotal.block(0)[0];
}

// ---------------------------------------------------------------------------
// deterministic distribution sort
// ---------------------------------------------------------------------------

struct SortKeyPlan {
  struct Component {
    unsigned bits = 1;
    unsigned passes = 1;
    unsigned digit_bits = 1;
    Word digit_count = 2;
  };
  std::vector<Component> comps;
  std::size_t arity = 2;  // histogram-tree arity
};

// The per-pass digit budget tracks (delta/2)*log2(n_words), so key ranges
// polynomial in n sort in a pass count independent of n.
inline SortKeyPlan make_sort_plan(const SimConfig& cfg, std::size_t machines,
                                  const std::vector<Word>& ranges) {
  SortKeyPlan plan;
  double n = static_cast<double>(std::max<std::size_t>(cfg.n_words, 16));
  double budget = std::max(1.0, 0.5 * cfg.delta * std::log2(n));
  std::size_t cap = cfg.capacity();
  Word max_digits = std::max<Word>(4, cap / 16);
  unsigned db_cap = bits_for(max_digits) - 1;
  Word a_max = 2;
  for (Word range : ranges) {
    SortKeyPlan::Component c;
    c.bits = bits_for(range);
    c.passes = std::max<unsigned>(1, static_cast<unsigned>(std::ceil(c.bits / budget)));
    c.digit_bits = (c.bits + c.passes - 1) / c.passes;
    if (c.digit_bits > db_cap) {
      c.digit_bits = db_cap;
      c.passes = (c.bits + c.digit_bits - 1) / c.digit_bits;
    }
    c.digit_count = Word(1) << c.digit_bits;
    a_max = std::max(a_max, c.digit_count);
    plan.comps.push_back(c);
  }
  plan.arity = std::max<std::size_t>(2, cap / (4 * a_max));
  (void)machines;
  return plan;
}

namespace detail {

// Merges records routed by the previous pass into rank order.  Locally kept
// records act as arrivals from this machine itself.
template <WordRecord T>
void ingest_routed(MachineIO& io, DistArray<T>& arr,
                   const std::function<Word(const T&)>& prev_digit) {
  std::size_t i = io.id();
  std::vector<std::pair<std::pair<Word, std::size_t>, T>> got;
  for (std::size_t k = 0; k < io.inbox_size(); ++k) {
    auto msg = io.inbox(k);
    for (const T& r : MachineIO::as_records<T>(msg))
      got.push_back({{prev_digit(r), msg.sender}, r});
  }
  for (const T& r : arr.block(i)) got.push_back({{prev_digit(r), i}, r});
  std::stable_sort(got.begin(), got.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<T> blk;
  blk.reserve(got.size());
  for (auto& g : got) blk.push_back(g.second);
  arr.replace_block(i, std::move(blk));
}

// One distribution pass: histogram -> tree scan -> route to exact rank.
template <WordRecord T>
void radix_pass(Simulator& sim, DistArray<T>& arr, std::size_t arity, Word a,
                const std::function<Word(const T&)>& digit_of, bool pending,
                const std::function<Word(const T&)>& prev_digit) {
  const std::size_t m = sim.machine_count();
  TreePlan tree = TreePlan::make(m, arity);
  const std::size_t D = tree.depth;
  const std::size_t A = a;

  DistArray<Word> sub(sim, m * A);
  DistArray<Word> memo(sim, m * D * A);
  DistArray<Word> base(sim, m * A);
  DistArray<Word> totals(sim, m * A);

  for (std::size_t t = 1; t <= D; ++t) {
    sim.step([&, t](MachineIO& io) {
      std::size_t i = io.id();
      if (t == 1) {
        if (pending) ingest_routed(io, arr, prev_digit);
        auto& s = sub.block(i);
        std::fill(s.begin(), s.end(), 0);
        for (const T& r : arr.block(i)) s[digit_of(r)] += 1;
      } else {
        bool leader = (i % tree.gsize[t - 1] == 0);
        for (std::size_t k = 0; k < io.inbox_size(); ++k) {
          auto pl = io.inbox(k).payload;
          MPCTREE_CHECK(pl.size() == A, "histogram message width");
          for (std::size_t d = 0; d < A; ++d) {
            if (leader) sub.block(i)[d] += pl[d];
            else memo.block(i)[(t - 2) * A + d] += pl[d];
          }
        }
      }
      if (i % tree.gsize[t - 1] != 0) return;
      std::size_t L = i - i % tree.gsize[t];
      if (L != i) io.send(L, sub.block(i).data(), A);
      for (std::size_t j = (i - L) / tree.gsize[t - 1] + 1; j < tree.arity; ++j) {
        std::size_t sib = L + j * tree.gsize[t - 1];
        if (sib >= m || sib >= L + tree.gsize[t]) break;
        io.send(sib, sub.block(i).data(), A);
      }
    });
  }

  for (std::size_t u = 1; u <= D; ++u) {
    std::size_t lvl = D + 1 - u;
    sim.step([&, u, lvl](MachineIO& io) {
      std::size_t i = io.id();
      if (u == 1) {
        bool leader = (i % tree.gsize[D - 1] == 0);
        for (std::size_t k = 0; k < io.inbox_size(); ++k) {
          auto pl = io.inbox(k).payload;
          for (std::size_t d = 0; d < A; ++d) {
            if (leader) sub.block(i)[d] += pl[d];
            else memo.block(i)[(D - 1) * A + d] += pl[d];
          }
        }
        if (i == 0)
          for (std::size_t d = 0; d < A; ++d) totals.block(0)[d] = sub.block(0)[d];
      } else {
        for (std::size_t k = 0; k < io.inbox_size(); ++k) {
          auto pl = io.inbox(k).payload;
          MPCTREE_CHECK(pl.size() == 2 * A, "scan message width");
          for (std::size_t d = 0; d < A; ++d) {
            base.block(i)[d] = pl[d] + memo.block(i)[lvl * A + d];
            totals.block(i)[d] = pl[A + d];
          }
        }
      }
      if (i % tree.gsize[lvl] != 0) return;
      std::vector<Word> out(2 * A);
      for (std::size_t d = 0; d < A; ++d) {
        out[d] = base.block(i)[d];
        out[A + d] = totals.block(i)[d];
      }
      for (std::size_t j = 1; j < tree.arity; ++j) {
        std::size_t child = i + j * tree.gsize[lvl - 1];
        if (child >= m || child >= i + tree.gsize[lvl]) break;
        io.send(child, out.data(), out.size());
      }
    });
  }

  const std::size_t per = arr.per_machine();
  sim.step([&](MachineIO& io) {
    std::size_t i = io.id();
    for (std::size_t k = 0; k < io.inbox_size(); ++k) {
      auto pl = io.inbox(k).payload;
      for (std::size_t d = 0; d < A; ++d) {
        base.block(i)[d] = pl[d] + memo.block(i)[d];
        totals.block(i)[d] = pl[A + d];
      }
    }
    std::vector<Word> offset(A);
    Word run = 0;
    for (std::size_t d = 0; d < A; ++d) {
      offset[d] = run + base.block(i)[d];
      run += totals.block(i)[d];
    }
    std::vector<T> keep;
    std::vector<std::pair<std::size_t, T>> outgoing;
    for (const T& r : arr.block(i)) {
      Word rank = offset[digit_of(r)]++;
      std::size_t dest = per == 0 ? 0 : static_cast<std::size_t>(rank) / per;
      if (dest == i) keep.push_back(r);
      else outgoing.push_back({dest, r});
    }
    arr.replace_block(i, std::move(keep));
    for (auto& [dest, r] : outgoing) io.send_rec(dest, r);
  });
}

}  // namespace detail

// Sorts a distributed array by an integer key tuple with declared component
// ranges (component 0 most significant).  Stable; output exactly balanced.
template <WordRecord T, std::size_t K, class KeyFn>
void radix_sort(Simulator& sim, DistArray<T>& arr, KeyFn key_of,
                const std::array<Word, K>& ranges) {
  static_assert(K >= 1);
  SortKeyPlan plan = make_sort_plan(sim.config(), sim.machine_count(),
                                    std::vector<Word>(ranges.begin(), ranges.end()));
  bool pending = false;
  std::function<Word(const T&)> prev_digit;

  for (std::size_t c = K; c-- > 0;) {
    const auto& comp = plan.comps[c];
    for (unsigned p = 0; p < comp.passes; ++p) {
      std::function<Word(const T&)> digit_of = [key_of, c, p, comp](const T& r) -> Word {
        Word v = key_of(r)[c];
        return (v >> (p * comp.digit_bits)) & (comp.digit_count - 1);
      };
      detail::radix_pass<T>(sim, arr, plan.arity, comp.digit_count, digit_of, pending,
                            prev_digit);
      pending = true;
      prev_digit = digit_of;
    }
  }
  sim.absorb([&](MachineIO& io) { detail::ingest_routed(io, arr, prev_digit); });
}

}  // namespace mpctree
