#include "fb/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fb {

std::string_view to_string(EnvId id) {
  switch (id) {
    case EnvId::discrete_maze: return "discrete_maze";
    case EnvId::continuous_maze: return "continuous_maze";
    case EnvId::cycle: return "cycle";
  }
  return "unknown";
}

EnvId parse_env_id(std::string_view name) {
  if (name == "discrete_maze") return EnvId::discrete_maze;
  if (name == "continuous_maze") return EnvId::continuous_maze;
  if (name == "cycle") return EnvId::cycle;
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

Eigen::VectorXd Environment::featurize(const State& s) const {
  Eigen::VectorXd out(feature_dim());
  featurize(s, out);
  return out;
}

std::vector<State> Environment::enumerate_states() const {
  throw std::logic_error(std::string(to_string(id())) + " has no finite state set");
}

int Environment::num_state_indices() const {
  throw std::logic_error(std::string(to_string(id())) + " has no finite state set");
}

EnvDynamics Environment::exact_dynamics() const {
  throw std::logic_error("exact dynamics are only defined for discrete environments, not " +
                         std::string(to_string(id())));
}

// --- DiscreteMaze -----------------------------------------------------------

DiscreteMaze::DiscreteMaze(MazeLayout layout) : layout_(std::move(layout)) {}

bool DiscreteMaze::is_valid(const State& s) const {
  return s.index >= 0 && s.index < layout_.num_cells() && !layout_.is_wall(s.index);
}

State DiscreteMaze::reset(RandomStream& rng) const {
  const auto& open = layout_.open_cells();
  return State::discrete(open[rng.uniform_index(open.size())]);
}

int DiscreteMaze::move(int cell, int action) const {
  int r = layout_.row_of(cell);
  int c = layout_.col_of(cell);
  switch (action) {
    case kLeft: --c; break;
    case kRight: ++c; break;
    case kUp: --r; break;
    case kDown: ++r; break;
    case kStay: break;
    default: throw std::out_of_range("maze action " + std::to_string(action));
  }
  if (r < 0 || r >= layout_.rows() || c < 0 || c >= layout_.cols()) return cell;
  const int next = layout_.cell(r, c);
  return layout_.is_wall(next) ? cell : next;
}

State DiscreteMaze::step(const State& s, int action, RandomStream& /*rng*/) const {
  return State::discrete(move(s.index, action));
}

void DiscreteMaze::featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  out(s.index) = 1.0;
}

std::vector<State> DiscreteMaze::enumerate_states() const {
  std::vector<State> states;
  for (int c : layout_.open_cells()) states.push_back(State::discrete(c));
  return states;
}

EnvDynamics DiscreteMaze::exact_dynamics() const {
  EnvDynamics dyn;
  dyn.num_states = layout_.num_cells();
  dyn.num_actions = kMazeActions;
  dyn.kernel = Eigen::MatrixXd::Zero(dyn.num_states * dyn.num_actions, dyn.num_states);
  for (int s = 0; s < dyn.num_states; ++s) {
    for (int a = 0; a < kMazeActions; ++a) {
      const int next = layout_.is_wall(s) ? s : move(s, a);
      dyn.kernel(s * kMazeActions + a, next) = 1.0;
    }
  }
  dyn.valid_states = layout_.open_cells();
  return dyn;
}

// --- ContinuousMaze ---------------------------------------------------------

namespace {

double orient(double ax, double ay, double bx, double by, double cx, double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

bool on_segment(double ax, double ay, double bx, double by, double px, double py) {
  return std::min(ax, bx) <= px && px <= std::max(ax, bx) && std::min(ay, by) <= py &&
         py <= std::max(ay, by);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

bool segments_intersect(const Segment& p, const Segment& q) {
  const int o1 = sign(orient(p.x0, p.y0, p.x1, p.y1, q.x0, q.y0));
  const int o2 = sign(orient(p.x0, p.y0, p.x1, p.y1, q.x1, q.y1));
  const int o3 = sign(orient(q.x0, q.y0, q.x1, q.y1, p.x0, p.y0));
  const int o4 = sign(orient(q.x0, q.y0, q.x1, q.y1, p.x1, p.y1));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p.x0, p.y0, p.x1, p.y1, q.x0, q.y0)) return true;
  if (o2 == 0 && on_segment(p.x0, p.y0, p.x1, p.y1, q.x1, q.y1)) return true;
  if (o3 == 0 && on_segment(q.x0, q.y0, q.x1, q.y1, p.x0, p.y0)) return true;
  if (o4 == 0 && on_segment(q.x0, q.y0, q.x1, q.y1, p.x1, p.y1)) return true;
  return false;
}

std::vector<Segment> ContinuousMaze::four_room_walls() {
  return {
      {0.5, 0.0, 0.5, 0.15}, {0.5, 0.35, 0.5, 0.65}, {0.5, 0.85, 0.5, 1.0},
      {0.0, 0.5, 0.15, 0.5}, {0.35, 0.5, 0.65, 0.5}, {0.85, 0.5, 1.0, 0.5},
  };
}

ContinuousMaze::ContinuousMaze() : walls_(four_room_walls()) {}

ContinuousMaze::ContinuousMaze(std::vector<Segment> walls) : walls_(std::move(walls)) {}

bool ContinuousMaze::is_valid(const State& s) const {
  return std::isfinite(s.x) && std::isfinite(s.y) && s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 &&
         s.y <= 1.0;
}

State ContinuousMaze::reset(RandomStream& rng) const {
  const double x = rng.uniform();
  const double y = rng.uniform();
  return State::point(x, y);
}

bool ContinuousMaze::crosses_wall(double x0, double y0, double x1, double y1) const {
  const Segment motion{x0, y0, x1, y1};
  return std::any_of(walls_.begin(), walls_.end(),
                     [&](const Segment& w) { return segments_intersect(motion, w); });
}

State ContinuousMaze::step_with_noise(const State& s, int action, double noise_x,
                                      double noise_y) const {
  double dx = 0.0;
  double dy = 0.0;
  switch (action) {
    case kLeft: dx = -kStepSize; break;
    case kRight: dx = kStepSize; break;
    case kUp: dy = kStepSize; break;
    case kDown: dy = -kStepSize; break;
    case kStay: break;
    default: throw std::out_of_range("maze action " + std::to_string(action));
  }
  const double nx = std::clamp(s.x + dx + noise_x, 0.0, 1.0);
  const double ny = std::clamp(s.y + dy + noise_y, 0.0, 1.0);
  if (crosses_wall(s.x, s.y, nx, ny)) return s;
  return State::point(nx, ny);
}

State ContinuousMaze::step(const State& s, int action, RandomStream& rng) const {
  const double nx = rng.normal(0.0, kNoiseStd);
  const double ny = rng.normal(0.0, kNoiseStd);
  return step_with_noise(s, action, nx, ny);
}

std::array<double, 2> ContinuousMaze::rbf_center(int i) {
  return {static_cast<double>(i % kGridSide) / (kGridSide - 1),
          static_cast<double>(i / kGridSide) / (kGridSide - 1)};
}

void ContinuousMaze::featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const {
  constexpr double denom = 2.0 * kRbfSigma * kRbfSigma;
  for (int i = 0; i < kGridSide * kGridSide; ++i) {
    const auto [cx, cy] = rbf_center(i);
    const double d2 = (s.x - cx) * (s.x - cx) + (s.y - cy) * (s.y - cy);
    out(i) = std::exp(-d2 / denom);
  }
}

// --- CycleWorld -------------------------------------------------------------

CycleWorld::CycleWorld(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("cycle length must be positive");
}

bool CycleWorld::is_valid(const State& s) const { return s.index >= 0 && s.index < k_; }

State CycleWorld::reset(RandomStream& rng) const {
  return State::discrete(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k_))));
}

int CycleWorld::move(int position, int action) const {
  if (action < 0 || action >= kCycleActions) {
    throw std::out_of_range("cycle action " + std::to_string(action));
  }
  return ((position + action - 1) % k_ + k_) % k_;
}

State CycleWorld::step(const State& s, int action, RandomStream& /*rng*/) const {
  return State::discrete(move(s.index, action));
}

void CycleWorld::featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  out(s.index) = 1.0;
}

std::vector<State> CycleWorld::enumerate_states() const {
  std::vector<State> states;
  for (int i = 0; i < k_; ++i) states.push_back(State::discrete(i));
  return states;
}

EnvDynamics CycleWorld::exact_dynamics() const {
  EnvDynamics dyn;
  dyn.num_states = k_;
  dyn.num_actions = kCycleActions;
  dyn.kernel = Eigen::MatrixXd::Zero(k_ * kCycleActions, k_);
  for (int s = 0; s < k_; ++s) {
    for (int a = 0; a < kCycleActions; ++a) dyn.kernel(s * kCycleActions + a, move(s, a)) = 1.0;
  }
  dyn.valid_states.resize(static_cast<std::size_t>(k_));
  for (int s = 0; s < k_; ++s) dyn.valid_states[static_cast<std::size_t>(s)] = s;
  return dyn;
}

std::shared_ptr<const Environment> make_environment(EnvId id, int parameter) {
  switch (id) {
    case EnvId::discrete_maze: return std::make_shared<DiscreteMaze>();
    case EnvId::continuous_maze: return std::make_shared<ContinuousMaze>();
    case EnvId::cycle: return std::make_shared<CycleWorld>(parameter > 0 ? parameter : 12);
  }
  throw std::invalid_argument("unknown environment id");
}

}  // namespace fb
