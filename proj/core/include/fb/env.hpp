#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fb/maze_layout.hpp"
#include "fb/rng.hpp"

namespace fb {

enum class EnvId : std::uint32_t { discrete_maze = 0, continuous_maze = 1, cycle = 2 };

std::string_view to_string(EnvId id);
/// Throws std::invalid_argument on unknown names.
EnvId parse_env_id(std::string_view name);

/// Maze actions. Up decreases the row in the discrete maze and increases y in
/// the continuous maze (both render "up" at the top of the screen).
enum MazeAction : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStay = 4 };
inline constexpr int kMazeActions = 5;
/// Cycle action index i moves the position by i - 1.
inline constexpr int kCycleActions = 3;

/// Environment state. Discrete environments use `index` (maze cell or cycle
/// position); the continuous maze uses (x, y).
struct State {
  int index = 0;
  double x = 0.0;
  double y = 0.0;

  static State discrete(int i) { return State{i, 0.0, 0.0}; }
  static State point(double px, double py) { return State{0, px, py}; }
  friend bool operator==(const State&, const State&) = default;
};

/// Tabular transition kernel of a discrete environment.
struct EnvDynamics {
  int num_states = 0;
  int num_actions = 0;
  /// Row s * num_actions + a holds P(. | s, a).
  Eigen::MatrixXd kernel;
  /// States reachable by the agent (open cells); oracle work is restricted to these.
  std::vector<int> valid_states;

  [[nodiscard]] double probability(int s, int a, int next) const {
    return kernel(s * num_actions + a, next);
  }
};

class Environment {
 public:
  virtual ~Environment() = default;

  [[nodiscard]] virtual EnvId id() const = 0;
  [[nodiscard]] virtual int num_actions() const = 0;
  [[nodiscard]] virtual int feature_dim() const = 0;
  /// Dimension of the goal map phi(s, a) fed to B. All shipped environments
  /// drop the action and reuse the state features.
  [[nodiscard]] virtual int goal_dim() const { return feature_dim(); }
  [[nodiscard]] virtual bool is_discrete() const = 0;
  /// Extra integer identifying the instance (cycle length; 0 otherwise).
  [[nodiscard]] virtual int parameter() const { return 0; }

  [[nodiscard]] virtual bool is_valid(const State& s) const = 0;
  virtual State reset(RandomStream& rng) const = 0;
  virtual State step(const State& s, int action, RandomStream& rng) const = 0;

  virtual void featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const = 0;
  [[nodiscard]] Eigen::VectorXd featurize(const State& s) const;
  /// phi(s, a); the action is ignored by every shipped environment.
  [[nodiscard]] Eigen::VectorXd goal_features(const State& s) const { return featurize(s); }

  /// Discrete environments only: every valid state, in index order.
  [[nodiscard]] virtual std::vector<State> enumerate_states() const;
  /// Discrete environments only: number of state indices (including walls).
  [[nodiscard]] virtual int num_state_indices() const;
  /// Discrete environments only. Throws std::logic_error for the continuous maze.
  [[nodiscard]] virtual EnvDynamics exact_dynamics() const;
};

/// 11x11 (or any parsed) grid maze with one-hot states over every cell,
/// wall cells included as unreachable indices.
class DiscreteMaze final : public Environment {
 public:
  explicit DiscreteMaze(MazeLayout layout = MazeLayout::four_rooms());

  [[nodiscard]] EnvId id() const override { return EnvId::discrete_maze; }
  [[nodiscard]] int num_actions() const override { return kMazeActions; }
  [[nodiscard]] int feature_dim() const override { return layout_.num_cells(); }
  [[nodiscard]] bool is_discrete() const override { return true; }
  [[nodiscard]] bool is_valid(const State& s) const override;
  State reset(RandomStream& rng) const override;
  State step(const State& s, int action, RandomStream& rng) const override;
  /// Deterministic move; a move into a wall or off the grid leaves the cell unchanged.
  [[nodiscard]] int move(int cell, int action) const;
  using Environment::featurize;
  void featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const override;
  [[nodiscard]] std::vector<State> enumerate_states() const override;
  [[nodiscard]] int num_state_indices() const override { return layout_.num_cells(); }
  [[nodiscard]] EnvDynamics exact_dynamics() const override;

  [[nodiscard]] const MazeLayout& layout() const { return layout_; }

 private:
  MazeLayout layout_;
};

/// Wall segment from (x0, y0) to (x1, y1).
struct Segment {
  double x0, y0, x1, y1;
};

/// Closed-segment intersection, collinear overlaps included.
bool segments_intersect(const Segment& a, const Segment& b);

/// Unit square with a four-room wall cross at x = 0.5 and y = 0.5; each of the
/// four wall arms has a doorway spanning [0.15, 0.35] or [0.65, 0.85].
class ContinuousMaze final : public Environment {
 public:
  static constexpr double kStepSize = 0.1;
  static constexpr double kNoiseStd = 0.01;
  static constexpr int kGridSide = 21;
  static constexpr double kRbfSigma = 0.05;

  ContinuousMaze();
  explicit ContinuousMaze(std::vector<Segment> walls);

  [[nodiscard]] EnvId id() const override { return EnvId::continuous_maze; }
  [[nodiscard]] int num_actions() const override { return kMazeActions; }
  [[nodiscard]] int feature_dim() const override { return kGridSide * kGridSide; }
  [[nodiscard]] bool is_discrete() const override { return false; }
  [[nodiscard]] bool is_valid(const State& s) const override;
  State reset(RandomStream& rng) const override;
  State step(const State& s, int action, RandomStream& rng) const override;
  /// The step with its Gaussian perturbation supplied explicitly.
  [[nodiscard]] State step_with_noise(const State& s, int action, double noise_x,
                                      double noise_y) const;
  [[nodiscard]] bool crosses_wall(double x0, double y0, double x1, double y1) const;
  using Environment::featurize;
  void featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const override;
  /// Center of RBF feature i: x = (i % 21) / 20, y = (i / 21) / 20.
  [[nodiscard]] static std::array<double, 2> rbf_center(int i);

  [[nodiscard]] const std::vector<Segment>& walls() const { return walls_; }
  [[nodiscard]] static std::vector<Segment> four_room_walls();

 private:
  std::vector<Segment> walls_;
};

/// Ring of k positions with actions {-1, 0, +1}.
class CycleWorld final : public Environment {
 public:
  explicit CycleWorld(int k);

  [[nodiscard]] EnvId id() const override { return EnvId::cycle; }
  [[nodiscard]] int num_actions() const override { return kCycleActions; }
  [[nodiscard]] int feature_dim() const override { return k_; }
  [[nodiscard]] bool is_discrete() const override { return true; }
  [[nodiscard]] int parameter() const override { return k_; }
  [[nodiscard]] bool is_valid(const State& s) const override;
  State reset(RandomStream& rng) const override;
  State step(const State& s, int action, RandomStream& rng) const override;
  [[nodiscard]] int move(int position, int action) const;
  using Environment::featurize;
  void featurize(const State& s, Eigen::Ref<Eigen::VectorXd> out) const override;
  [[nodiscard]] std::vector<State> enumerate_states() const override;
  [[nodiscard]] int num_state_indices() const override { return k_; }
  [[nodiscard]] EnvDynamics exact_dynamics() const override;

  [[nodiscard]] int length() const { return k_; }

 private:
  int k_;
};

/// Builds an environment by id. `parameter` is the cycle length for EnvId::cycle
/// (0 selects the default of 12) and is ignored otherwise.
std::shared_ptr<const Environment> make_environment(EnvId id, int parameter = 0);

/// Featurizes a batch into a (feature_dim x n) matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> featurize_batch(
    const Environment& env, const std::vector<State>& states) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(env.feature_dim(),
                                                            static_cast<Eigen::Index>(states.size()));
  Eigen::VectorXd buf(env.feature_dim());
  for (std::size_t i = 0; i < states.size(); ++i) {
    env.featurize(states[i], buf);
    out.col(static_cast<Eigen::Index>(i)) = buf.cast<Scalar>();
  }
  return out;
}

}  // namespace fb
