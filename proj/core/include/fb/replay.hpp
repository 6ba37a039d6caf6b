#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "fb/env.hpp"
#include "fb/rng.hpp"

namespace fb {

/// One observed step (s, a, s').
struct Transition {
  State s;
  int a = 0;
  State s_next;
};

struct StateAction {
  State s;
  int a = 0;
};

/// Bounded FIFO store of transitions. Its contents define the empirical
/// state-action distribution rho used for training and reward estimation.
///
/// Not synchronized: a single collector writes between update phases and
/// samplers read while no write is in flight.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 1'000'000;

  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity);

  /// Appends; evicts the oldest entry once full.
  void push(const Transition& t);
  void clear();

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] bool empty() const { return size_ == 0; }
  /// i-th entry in insertion order, 0 = oldest.
  [[nodiscard]] const Transition& at(std::size_t i) const;

  /// b transitions drawn uniformly with replacement. Throws std::runtime_error
  /// ("empty replay buffer") when empty and b > 0.
  std::vector<Transition> sample_transitions(std::size_t b, RandomStream& rng) const;
  /// b state-action pairs drawn uniformly with replacement, independently of
  /// any transition batch.
  std::vector<StateAction> sample_targets(std::size_t b, RandomStream& rng) const;
  /// Uniform indices into [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t b, RandomStream& rng) const;

  /// Binary record stream: header, then per record the length-prefixed state
  /// vector, the action index and the length-prefixed next-state vector.
  void save(const std::filesystem::path& path, const Environment& env) const;
  static ReplayBuffer load(const std::filesystem::path& path, const Environment& env,
                           std::size_t capacity = kDefaultCapacity);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
  std::size_t size_ = 0;
  std::vector<Transition> slots_;
};

}  // namespace fb
