// Copyright 2026 The DQAD Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experience replay with uniform and proportional-priority sampling.

#ifndef DQAD_REPLAY_HPP_
#define DQAD_REPLAY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dqad/qnet.hpp"
#include "dqad/random.hpp"

namespace dqad {

struct Transition {
  std::vector<float> state;
  Action action = Action::kNormal;
  int reward = 0;  // one of {-2, -1, 0, 1}
  std::vector<float> next_state;

  bool operator==(const Transition&) const = default;
};

// Binary segment tree over `capacity` leaves with a pluggable associative
// combiner. Leaves default to the combiner's identity.
template <typename Combine>
class SegmentTree {
 public:
  explicit SegmentTree(std::size_t capacity, double identity = 0.0)
      : identity_(identity) {
    leaves_ = 1;
    while (leaves_ < capacity) leaves_ <<= 1;
    nodes_.assign(2 * leaves_, identity_);
  }

  void Set(std::size_t i, double value) {
    std::size_t node = i + leaves_;
    nodes_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1) {
      nodes_[node] = Combine{}(nodes_[2 * node], nodes_[2 * node + 1]);
    }
  }

  double Get(std::size_t i) const { return nodes_[i + leaves_]; }
  double Root() const { return nodes_[1]; }

  // Prefix-sum descent (sum trees only): smallest leaf i such that the sum
  // of leaves [0, i] exceeds `mass`.
  std::size_t FindPrefix(double mass) const {
    std::size_t node = 1;
    while (node < leaves_) {
      const double left = nodes_[2 * node];
      if (mass < left) {
        node = 2 * node;
      } else {
        mass -= left;
        node = 2 * node + 1;
      }
    }
    return node - leaves_;
  }

 private:
  double identity_;
  std::size_t leaves_ = 1;
  std::vector<double> nodes_;
};

struct SumCombine {
  double operator()(double a, double b) const { return a + b; }
};
struct MaxCombine {
  double operator()(double a, double b) const { return a > b ? a : b; }
};

using SumTree = SegmentTree<SumCombine>;
using MaxTree = SegmentTree<MaxCombine>;

enum class SampleMode { kUniform, kPrioritized };

// Identifies a stored entry; `serial` detects that the slot was overwritten.
struct EntryId {
  std::size_t slot = 0;
  std::uint64_t serial = 0;

  bool operator==(const EntryId&) const = default;
};

struct SampledBatch {
  std::vector<EntryId> ids;
  std::vector<const Transition*> transitions;
  std::vector<double> probabilities;
  std::vector<double> is_weights;
};

struct ReplayOptions {
  std::size_t capacity = 10000;
  double alpha = 0.6;
  double epsilon = 0.01;
};

// p = |delta| + epsilon.
double PriorityFromTd(double delta, double epsilon);

// w_i = ((1/N) * (1/P(i)))^beta, divided by the batch maximum.
std::vector<double> ImportanceWeights(std::span<const double> probabilities,
                                      std::size_t buffer_size, double beta);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(ReplayOptions options);

  // New entries take the current maximum stored priority (1 when empty);
  // the oldest entry is evicted at capacity.
  void Push(Transition transition);

  // Draws `batch_size` entries with replacement. Uniform mode returns unit
  // weights; prioritized mode draws i with probability p_i^a / sum p^a.
  SampledBatch Sample(std::size_t batch_size, SampleMode mode, double beta_is,
                      Rng& rng) const;

  // Entries evicted since `ids` were sampled are skipped.
  void UpdatePriorities(std::span<const EntryId> ids,
                        std::span<const double> td_errors);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return options_.capacity; }
  const ReplayOptions& options() const { return options_; }

  // Logical accessors; index 0 is the oldest surviving entry.
  const Transition& at(std::size_t index) const;
  EntryId id_at(std::size_t index) const;
  double priority_at(std::size_t index) const;
  double probability_at(std::size_t index) const;

  double tree_total() const { return sum_tree_.Root(); }
  // Direct summation of the leaf values, for consistency checks.
  double leaf_total() const;

 private:
  std::size_t SlotOf(std::size_t index) const;
  void SetPriority(std::size_t slot, double priority);

  ReplayOptions options_;
  std::vector<Transition> entries_;
  std::vector<std::uint64_t> serials_;
  std::vector<double> priorities_;  // raw p_i
  SumTree sum_tree_;                // p_i^alpha
  MaxTree max_tree_;                // p_i
  std::size_t head_ = 0;            // next slot to write
  std::size_t size_ = 0;
  std::uint64_t next_serial_ = 1;
};

}  // namespace dqad

#endif  // DQAD_REPLAY_HPP_
