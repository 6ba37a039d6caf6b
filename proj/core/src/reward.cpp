#include "fb/reward.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <sstream>

namespace fb {

namespace {

constexpr std::size_t kChunk = 4096;

void check_state(const Environment& env, const State& s) {
  if (!env.is_valid(s)) {
    if (env.is_discrete()) throw SpecError(422, "state " + std::to_string(s.index) + " is a wall or out of range");
    throw SpecError(422, "point outside the unit square");
  }
}

State state_from_json(const nlohmann::json& item, const Environment& env) {
  if (env.is_discrete()) {
    if (!item.contains("cell") || !item["cell"].is_number_integer()) {
      throw SpecError(400, "each entry needs an integer \"cell\"");
    }
    return State::discrete(item["cell"].get<int>());
  }
  if (!item.contains("x") || !item.contains("y") || !item["x"].is_number() || !item["y"].is_number()) {
    throw SpecError(400, "each entry needs numeric \"x\" and \"y\"");
  }
  return State::point(item["x"].get<double>(), item["y"].get<double>());
}

double number_field(const nlohmann::json& item, const char* key, double fallback, bool required) {
  if (!item.contains(key)) {
    if (required) throw SpecError(400, std::string("missing \"") + key + "\"");
    return fallback;
  }
  if (!item[key].is_number()) throw SpecError(400, std::string("\"") + key + "\" must be a number");
  const double v = item[key].get<double>();
  if (!std::isfinite(v)) throw SpecError(400, std::string("\"") + key + "\" must be finite");
  return v;
}

bool parse_double(const std::string& field, double& out) {
  std::string t = field;
  t.erase(0, t.find_first_not_of(" \t\r"));
  t.erase(t.find_last_not_of(" \t\r") + 1);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

RewardSpec RewardSpec::scaled(double c) const {
  RewardSpec out = *this;
  for (auto& g : out.goals) g.weight *= c;
  for (auto& s : out.samples) s.reward *= c;
  return out;
}

TaskVector zr_from_goals(const Representation& rep, const std::vector<GoalWeight>& goals) {
  if (goals.empty()) throw std::invalid_argument("reward spec has no goals");
  std::vector<State> states;
  states.reserve(goals.size());
  for (const auto& g : goals) states.push_back(g.goal);
  const Eigen::MatrixXd b = rep.backward_goals(states);
  TaskVector z = TaskVector::Zero(rep.dim());
  for (std::size_t i = 0; i < goals.size(); ++i) z += goals[i].weight * b.col(static_cast<Eigen::Index>(i));
  return z;
}

TaskVector zr_from_function(const Representation& rep, const ReplayBuffer& buffer, const RewardFunction& r,
                            std::size_t n_samples, RandomStream* rng) {
  if (buffer.empty()) throw std::runtime_error("empty replay buffer");
  std::vector<std::size_t> idx;
  if (n_samples == 0) {
    idx.resize(buffer.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    if (rng == nullptr) throw std::invalid_argument("sampled reward averaging needs a random stream");
    idx = buffer.sample_indices(n_samples, *rng);
  }
  TaskVector z = TaskVector::Zero(rep.dim());
  std::vector<State> states;
  std::vector<int> actions;
  Eigen::VectorXd weights;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::size_t end = std::min(idx.size(), start + kChunk);
    states.clear();
    actions.clear();
    weights.resize(static_cast<Eigen::Index>(end - start));
    for (std::size_t k = start; k < end; ++k) {
      const Transition& t = buffer.at(idx[k]);
      const double w = r(t.s, t.a);
      weights(static_cast<Eigen::Index>(k - start)) = w;
      states.push_back(t.s);
      actions.push_back(t.a);
    }
    z += rep.backward_pairs(states, actions) * weights;
  }
  return z / static_cast<double>(idx.size());
}

TaskVector zr_from_samples(const Representation& rep, const std::vector<RewardSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("no reward samples");
  TaskVector z = TaskVector::Zero(rep.dim());
  std::vector<State> states;
  std::vector<int> actions;
  Eigen::VectorXd weights;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    states.clear();
    actions.clear();
    weights.resize(static_cast<Eigen::Index>(end - start));
    for (std::size_t k = start; k < end; ++k) {
      weights(static_cast<Eigen::Index>(k - start)) = samples[k].reward;
      states.push_back(samples[k].s);
      actions.push_back(samples[k].a);
    }
    z += rep.backward_pairs(states, actions) * weights;
  }
  return z / static_cast<double>(samples.size());
}

TaskVector zr_from_spec(const Representation& rep, const RewardSpec& spec) {
  if (spec.is_goal_spec()) return zr_from_goals(rep, spec.goals);
  return zr_from_samples(rep, spec.samples);
}

RewardSpec parse_reward_spec(const std::string& json_text, const Environment& env) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(400, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecError(400, "reward spec must be a JSON object");
  RewardSpec spec;
  const bool has_goals = doc.contains("goals");
  const bool has_samples = doc.contains("samples");
  if (has_goals == has_samples) throw SpecError(400, "reward spec needs exactly one of \"goals\" or \"samples\"");
  const auto& list = has_goals ? doc["goals"] : doc["samples"];
  if (!list.is_array() || list.empty()) throw SpecError(400, "reward spec list must be a non-empty array");
  for (const auto& item : list) {
    if (!item.is_object()) throw SpecError(400, "reward spec entries must be objects");
    const State s = state_from_json(item, env);
    if (has_goals) {
      spec.goals.push_back({s, number_field(item, "w", 1.0, false)});
    } else {
      const double a = number_field(item, "a", 0.0, true);
      if (a != std::floor(a) || a < 0 || a >= env.num_actions()) throw SpecError(422, "action out of range");
      spec.samples.push_back({s, static_cast<int>(a), number_field(item, "r", 0.0, true)});
    }
  }
  for (const auto& g : spec.goals) check_state(env, g.goal);
  for (const auto& smp : spec.samples) check_state(env, smp.s);
  return spec;
}

std::string reward_spec_to_json(const RewardSpec& spec, const Environment& env) {
  nlohmann::json doc = nlohmann::json::object();
  auto put_state = [&](nlohmann::json& item, const State& s) {
    if (env.is_discrete()) {
      item["cell"] = s.index;
    } else {
      item["x"] = s.x;
      item["y"] = s.y;
    }
  };
  if (spec.is_goal_spec()) {
    doc["goals"] = nlohmann::json::array();
    for (const auto& g : spec.goals) {
      nlohmann::json item;
      put_state(item, g.goal);
      item["w"] = g.weight;
      doc["goals"].push_back(item);
    }
  } else {
    doc["samples"] = nlohmann::json::array();
    for (const auto& s : spec.samples) {
      nlohmann::json item;
      put_state(item, s.s);
      item["a"] = s.a;
      item["r"] = s.reward;
      doc["samples"].push_back(item);
    }
  }
  return doc.dump();
}

std::vector<RewardSample> parse_reward_samples_csv(const std::string& text, const Environment& env) {
  const std::size_t want = env.is_discrete() ? 3 : 4;
  std::vector<RewardSample> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    std::vector<double> values(fields.size());
    bool numeric = fields.size() == want;
    for (std::size_t i = 0; numeric && i < fields.size(); ++i) numeric = parse_double(fields[i], values[i]);
    if (!numeric) {
      if (line_no == 1 && out.empty()) continue;
      throw SpecError(400, "reward CSV line " + std::to_string(line_no) + ": expected " + std::to_string(want) +
                               " numeric fields");
    }
    RewardSample smp;
    std::size_t k = 0;
    if (env.is_discrete()) {
      if (values[0] != std::floor(values[0])) throw SpecError(400, "cell must be an integer");
      smp.s = State::discrete(static_cast<int>(values[k++]));
    } else {
      smp.s = State::point(values[0], values[1]);
      k = 2;
    }
    const double a = values[k++];
    if (a != std::floor(a) || a < 0 || a >= env.num_actions()) throw SpecError(422, "action out of range");
    smp.a = static_cast<int>(a);
    smp.reward = values[k];
    check_state(env, smp.s);
    out.push_back(smp);
  }
  if (out.empty()) throw SpecError(400, "reward CSV has no samples");
  return out;
}

}  // namespace fb
