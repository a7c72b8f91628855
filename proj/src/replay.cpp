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

#include "dqad/replay.hpp"

#include <algorithm>
#include <cmath>

#include "dqad/error.hpp"

namespace dqad {

double PriorityFromTd(double delta, double epsilon) {
  Require(std::isfinite(delta), ErrorKind::kNumeric, "non-finite TD error");
  return std::abs(delta) + epsilon;
}

std::vector<double> ImportanceWeights(std::span<const double> probabilities,
                                      std::size_t buffer_size, double beta) {
  Require(buffer_size > 0, ErrorKind::kInput, "buffer size must be positive");
  std::vector<double> weights(probabilities.size());
  double max_weight = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    Require(probabilities[i] > 0.0, ErrorKind::kInput,
            "sampling probability must be positive");
    weights[i] = std::pow(1.0 / (static_cast<double>(buffer_size) * probabilities[i]), beta);
    max_weight = std::max(max_weight, weights[i]);
  }
  for (double& w : weights) w /= max_weight;
  return weights;
}

ReplayBuffer::ReplayBuffer(ReplayOptions options)
    : options_(options),
      sum_tree_(std::max<std::size_t>(options.capacity, 1)),
      max_tree_(std::max<std::size_t>(options.capacity, 1)) {
  Require(options.capacity > 0, ErrorKind::kConfig, "replay capacity must be positive");
  Require(options.alpha >= 0.0, ErrorKind::kConfig, "priority exponent must be >= 0");
  Require(options.epsilon > 0.0, ErrorKind::kConfig, "priority epsilon must be > 0");
  entries_.resize(options.capacity);
  serials_.assign(options.capacity, 0);
  priorities_.assign(options.capacity, 0.0);
}

void ReplayBuffer::SetPriority(std::size_t slot, double priority) {
  priorities_[slot] = priority;
  sum_tree_.Set(slot, priority > 0.0 ? std::pow(priority, options_.alpha) : 0.0);
  max_tree_.Set(slot, priority);
}

void ReplayBuffer::Push(Transition transition) {
  Require(transition.state.size() == transition.next_state.size(), ErrorKind::kInput,
          "transition state dimensions differ");
  const int r = transition.reward;
  Require(r == -2 || r == -1 || r == 0 || r == 1, ErrorKind::kInput,
          "reward outside {-2, -1, 0, 1}");
  const std::size_t slot = head_;
  std::size_t survivors = size_;
  if (size_ == options_.capacity) {
    SetPriority(slot, 0.0);  // evict the oldest before taking the maximum
    --survivors;
  }
  const double priority = survivors == 0 ? 1.0 : max_tree_.Root();
  entries_[slot] = std::move(transition);
  serials_[slot] = next_serial_++;
  SetPriority(slot, priority);
  head_ = (head_ + 1) % options_.capacity;
  size_ = std::min(size_ + 1, options_.capacity);
}

std::size_t ReplayBuffer::SlotOf(std::size_t index) const {
  Require(index < size_, ErrorKind::kInput, "replay index out of range");
  const std::size_t oldest = size_ < options_.capacity ? 0 : head_;
  return (oldest + index) % options_.capacity;
}

const Transition& ReplayBuffer::at(std::size_t index) const {
  return entries_[SlotOf(index)];
}

EntryId ReplayBuffer::id_at(std::size_t index) const {
  const std::size_t slot = SlotOf(index);
  return {slot, serials_[slot]};
}

double ReplayBuffer::priority_at(std::size_t index) const {
  return priorities_[SlotOf(index)];
}

double ReplayBuffer::probability_at(std::size_t index) const {
  return sum_tree_.Get(SlotOf(index)) / sum_tree_.Root();
}

double ReplayBuffer::leaf_total() const {
  double total = 0.0;
  for (std::size_t slot = 0; slot < options_.capacity; ++slot) {
    total += sum_tree_.Get(slot);
  }
  return total;
}

SampledBatch ReplayBuffer::Sample(std::size_t batch_size, SampleMode mode,
                                  double beta_is, Rng& rng) const {
  Require(size_ > 0, ErrorKind::kState, "cannot sample from an empty replay buffer");
  Require(batch_size >= 1, ErrorKind::kInput, "batch size must be >= 1");
  SampledBatch batch;
  batch.ids.reserve(batch_size);
  batch.transitions.reserve(batch_size);
  batch.probabilities.reserve(batch_size);

  if (mode == SampleMode::kUniform) {
    for (std::size_t i = 0; i < batch_size; ++i) {
      const std::size_t slot = SlotOf(UniformIndex(rng, size_));
      batch.ids.push_back({slot, serials_[slot]});
      batch.transitions.push_back(&entries_[slot]);
      batch.probabilities.push_back(1.0 / static_cast<double>(size_));
    }
    batch.is_weights.assign(batch_size, 1.0);
    return batch;
  }

  const double total = sum_tree_.Root();
  Require(total > 0.0, ErrorKind::kState, "replay priorities sum to zero");
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::size_t slot;
    // Rounding in the tree can land the descent on an unused leaf; redraw.
    do {
      slot = sum_tree_.FindPrefix(UniformUnit(rng) * total);
    } while (slot >= options_.capacity || sum_tree_.Get(slot) <= 0.0);
    batch.ids.push_back({slot, serials_[slot]});
    batch.transitions.push_back(&entries_[slot]);
    batch.probabilities.push_back(sum_tree_.Get(slot) / total);
  }
  batch.is_weights = ImportanceWeights(batch.probabilities, size_, beta_is);
  return batch;
}

void ReplayBuffer::UpdatePriorities(std::span<const EntryId> ids,
                                    std::span<const double> td_errors) {
  Require(ids.size() == td_errors.size(), ErrorKind::kInput,
          "ids and TD errors differ in length");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const EntryId& id = ids[i];
    if (id.slot >= options_.capacity || serials_[id.slot] != id.serial ||
        id.serial == 0) {
      continue;  // evicted since sampling
    }
    SetPriority(id.slot, PriorityFromTd(td_errors[i], options_.epsilon));
  }
}

}  // namespace dqad
