#include "fb/hyperparams.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number<int>(key, item));
  }
  return out;
}

}  // namespace

Hyperparams Hyperparams::defaults_for(EnvId env) {
  Hyperparams hp;
  hp.env = env;
  switch (env) {
    case EnvId::discrete_maze:
      break;
    case EnvId::continuous_maze:
      hp.learning_rate = 5e-4;
      hp.steps_per_episode = 30;
      hp.eval_policy = PolicySpec::epsilon_greedy(0.02);
      break;
    case EnvId::cycle:
      hp.env_parameter = 12;
      hp.epsilon_explore = 0.2;
      hp.eval_policy = PolicySpec::epsilon_greedy(0.02);
      break;
  }
  return hp;
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid hyperparameter: " + what); };
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (!(lambda_reg >= 0.0)) fail("lambda_reg must be >= 0");
  if (!(polyak >= 0.0 && polyak <= 1.0)) fail("polyak must be in [0, 1]");
  if (!(epsilon_explore >= 0.0 && epsilon_explore <= 1.0)) fail("epsilon_explore must be in [0, 1]");
  if (episodes_per_cycle < 0) fail("episodes_per_cycle must be >= 0");
  if (steps_per_episode < 1) fail("steps_per_episode must be >= 1");
  if (updates_per_cycle < 0) fail("updates_per_cycle must be >= 0");
  if (cycles_per_epoch < 1) fail("cycles_per_epoch must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (d < 1) fail("d must be >= 1");
  for (int h : hidden) {
    if (h < 1) fail("hidden sizes must be >= 1");
  }
  if (buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (eval_goals < 0) fail("eval_goals must be >= 0");
  if (eval_horizon < 1) fail("eval_horizon must be >= 1");
  if (!(success_threshold > 0.0)) fail("success_threshold must be > 0");
  if (env == EnvId::cycle && env_parameter < 3) fail("cycle length must be >= 3");
}

std::string policy_to_string(const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicySpec::Kind::greedy:
      return "greedy";
    case PolicySpec::Kind::boltzmann:
      return "boltzmann:" + fmt(spec.temperature);
    case PolicySpec::Kind::epsilon_greedy:
      return "epsilon:" + fmt(spec.epsilon);
  }
  return "greedy";
}

PolicySpec parse_policy(const std::string& text) {
  const std::string t = trim(text);
  if (t == "greedy") return PolicySpec::greedy();
  const auto colon = t.find(':');
  if (colon != std::string::npos) {
    const std::string kind = t.substr(0, colon);
    const std::string arg = trim(t.substr(colon + 1));
    if (kind == "boltzmann") return PolicySpec::boltzmann(parse_number<double>("policy", arg));
    if (kind == "epsilon") return PolicySpec::epsilon_greedy(parse_number<double>("policy", arg));
  }
  throw std::invalid_argument("bad policy '" + text + "' (greedy, boltzmann:<tau> or epsilon:<eps>)");
}

std::string Hyperparams::to_config() const {
  std::ostringstream out;
  out << "env = " << to_string(env) << "\n";
  out << "env_parameter = " << env_parameter << "\n";
  out << "gamma = " << fmt(gamma) << "\n";
  out << "learning_rate = " << fmt(learning_rate) << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "temperature = " << fmt(temperature) << "\n";
  out << "lambda_reg = " << fmt(lambda_reg) << "\n";
  out << "polyak = " << fmt(polyak) << "\n";
  out << "epsilon_explore = " << fmt(epsilon_explore) << "\n";
  out << "episodes_per_cycle = " << episodes_per_cycle << "\n";
  out << "steps_per_episode = " << steps_per_episode << "\n";
  out << "updates_per_cycle = " << updates_per_cycle << "\n";
  out << "cycles_per_epoch = " << cycles_per_epoch << "\n";
  out << "epochs = " << epochs << "\n";
  out << "d = " << d << "\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < hidden.size(); ++i) out << (i ? "," : "") << hidden[i];
  out << "\n";
  out << "buffer_capacity = " << buffer_capacity << "\n";
  out << "seed = " << seed << "\n";
  out << "eval_goals = " << eval_goals << "\n";
  out << "eval_horizon = " << eval_horizon << "\n";
  out << "eval_policy = " << policy_to_string(eval_policy) << "\n";
  out << "success_threshold = " << fmt(success_threshold) << "\n";
  return out.str();
}

void set_hyperparam(Hyperparams& hp, const std::string& key, const std::string& value) {
  if (key == "env") {
    hp.env = parse_env_id(value);
  } else if (key == "env_parameter") {
    hp.env_parameter = parse_number<int>(key, value);
  } else if (key == "gamma") {
    hp.gamma = parse_number<double>(key, value);
  } else if (key == "learning_rate") {
    hp.learning_rate = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    hp.batch_size = parse_number<int>(key, value);
  } else if (key == "temperature") {
    hp.temperature = parse_number<double>(key, value);
  } else if (key == "lambda_reg") {
    hp.lambda_reg = parse_number<double>(key, value);
  } else if (key == "polyak") {
    hp.polyak = parse_number<double>(key, value);
  } else if (key == "epsilon_explore") {
    hp.epsilon_explore = parse_number<double>(key, value);
  } else if (key == "episodes_per_cycle") {
    hp.episodes_per_cycle = parse_number<int>(key, value);
  } else if (key == "steps_per_episode") {
    hp.steps_per_episode = parse_number<int>(key, value);
  } else if (key == "updates_per_cycle") {
    hp.updates_per_cycle = parse_number<int>(key, value);
  } else if (key == "cycles_per_epoch") {
    hp.cycles_per_epoch = parse_number<int>(key, value);
  } else if (key == "epochs") {
    hp.epochs = parse_number<int>(key, value);
  } else if (key == "d") {
    hp.d = parse_number<int>(key, value);
  } else if (key == "hidden") {
    hp.hidden = parse_int_list(key, value);
  } else if (key == "buffer_capacity") {
    hp.buffer_capacity = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    hp.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "eval_goals") {
    hp.eval_goals = parse_number<int>(key, value);
  } else if (key == "eval_horizon") {
    hp.eval_horizon = parse_number<int>(key, value);
  } else if (key == "eval_policy") {
    hp.eval_policy = parse_policy(value);
  } else if (key == "success_threshold") {
    hp.success_threshold = parse_number<double>(key, value);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

Hyperparams parse_config(const std::string& text) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.push_back({line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }

  Hyperparams hp;
  for (const auto& e : entries) {
    if (e.key != "env") continue;
    try {
      hp = Hyperparams::defaults_for(parse_env_id(e.value));
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("config line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  for (const auto& e : entries) {
    try {
      set_hyperparam(hp, e.key, e.value);
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("config line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  hp.validate();
  return hp;
}

Hyperparams load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace fb
