#include "fb/replay.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fb {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (size_ < capacity_) {
    slots_.push_back(t);
    ++size_;
    return;
  }
  slots_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

void ReplayBuffer::clear() {
  slots_.clear();
  head_ = 0;
  size_ = 0;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index");
  return slots_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t b, RandomStream& rng) const {
  if (b > 0 && size_ == 0) throw std::runtime_error("empty replay buffer");
  std::vector<std::size_t> idx(b);
  for (auto& i : idx) i = rng.uniform_index(size_);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample_transitions(std::size_t b, RandomStream& rng) const {
  std::vector<Transition> out;
  out.reserve(b);
  for (std::size_t i : sample_indices(b, rng)) out.push_back(slots_[i]);
  return out;
}

std::vector<StateAction> ReplayBuffer::sample_targets(std::size_t b, RandomStream& rng) const {
  std::vector<StateAction> out;
  out.reserve(b);
  for (std::size_t i : sample_indices(b, rng)) out.push_back({slots_[i].s, slots_[i].a});
  return out;
}

namespace {

constexpr std::array<char, 8> kMagic{'F', 'B', 'R', 'E', 'P', 'L', 'A', 'Y'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("replay file truncated");
  return v;
}

void put_state(std::ostream& out, const Environment& env, const State& s) {
  if (env.is_discrete()) {
    put<std::uint32_t>(out, 1);
    put<double>(out, static_cast<double>(s.index));
  } else {
    put<std::uint32_t>(out, 2);
    put<double>(out, s.x);
    put<double>(out, s.y);
  }
}

State get_state(std::istream& in, const Environment& env) {
  const auto len = get<std::uint32_t>(in);
  if (env.is_discrete()) {
    if (len != 1) throw std::runtime_error("replay file: bad state length");
    return State::discrete(static_cast<int>(get<double>(in)));
  }
  if (len != 2) throw std::runtime_error("replay file: bad state length");
  const double x = get<double>(in);
  const double y = get<double>(in);
  return State::point(x, y);
}

}  // namespace

void ReplayBuffer::save(const std::filesystem::path& path, const Environment& env) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(env.id()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(env.parameter()));
  put<std::uint64_t>(out, size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const Transition& t = at(i);
    put_state(out, env, t.s);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.a));
    put_state(out, env, t.s_next);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path, const Environment& env,
                                std::size_t capacity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a replay file: " + path.string());
  if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("unsupported replay version");
  const auto env_id = get<std::uint32_t>(in);
  const auto param = get<std::uint32_t>(in);
  if (env_id != static_cast<std::uint32_t>(env.id()) ||
      param != static_cast<std::uint32_t>(env.parameter())) {
    throw std::runtime_error("replay file was recorded in a different environment");
  }
  const auto n = get<std::uint64_t>(in);
  ReplayBuffer buffer(capacity);
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.s = get_state(in, env);
    t.a = static_cast<int>(get<std::uint32_t>(in));
    t.s_next = get_state(in, env);
    buffer.push(t);
  }
  return buffer;
}

}  // namespace fb
