#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "fb/evaluation.hpp"
#include "fb/hyperparams.hpp"
#include "fb/model_io.hpp"
#include "fb/reward.hpp"
#include "fb/runtime.hpp"
#include "fb/trainer.hpp"
#include "service.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct TrainArgs {
  std::string config;
  std::string env;
  int d = 0;
  int epochs = -1;
  long long seed = -1;
  std::string model = "model.fbm";
  std::string metrics;
  std::vector<std::string> overrides;
  bool quiet = false;
};

fb::Hyperparams resolve_hyperparams(const TrainArgs& args) {
  fb::Hyperparams hp;
  if (!args.config.empty()) {
    hp = fb::load_config(args.config);
  } else if (!args.env.empty()) {
    hp = fb::Hyperparams::defaults_for(fb::parse_env_id(args.env));
  }
  if (!args.env.empty() && fb::parse_env_id(args.env) != hp.env) {
    const fb::Hyperparams base = fb::Hyperparams::defaults_for(fb::parse_env_id(args.env));
    hp.env = base.env;
    hp.env_parameter = base.env_parameter;
  }
  if (args.d > 0) hp.d = args.d;
  if (args.epochs >= 0) hp.epochs = args.epochs;
  if (args.seed >= 0) hp.seed = static_cast<std::uint64_t>(args.seed);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    fb::set_hyperparam(hp, kv.substr(0, eq), kv.substr(eq + 1));
  }
  hp.validate();
  return hp;
}

int run_train(const TrainArgs& args) {
  fb::Hyperparams hp;
  try {
    hp = resolve_hyperparams(args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::string metrics_path = args.metrics.empty() ? args.model + ".metrics.csv" : args.metrics;
  std::ofstream metrics(metrics_path);
  if (!metrics) {
    std::cerr << "config error: cannot write " << metrics_path << "\n";
    return kExitConfig;
  }
  fb::write_metrics_header(metrics);
  try {
    const fb::TrainResult result = fb::train(hp, [&](const fb::EpochRecord& r, const fb::FBModel&) {
      fb::write_metrics_row(metrics, r);
      metrics.flush();
      if (!args.quiet) {
        std::cerr << "epoch " << r.epoch << "  fb_loss " << r.fb_loss << "  reg_loss " << r.reg_loss
                  << "  covB_err " << r.cov_b_error << "  eval " << r.eval_score << "\n";
      }
    });
    fb::save_model(args.model, *result.model, hp.to_config());
    std::cout << "wrote " << args.model << " (checksum " << std::hex << fb::file_checksum(args.model) << std::dec
              << ") and " << metrics_path << "\n";
  } catch (const fb::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  }
  return 0;
}

fb::LoadedModel open_model(const std::string& path) { return fb::load_model(path); }

fb::PolicySpec eval_policy_for(const fb::Environment& env, double epsilon, double temperature) {
  if (epsilon >= 0.0) return fb::PolicySpec::epsilon_greedy(epsilon);
  if (temperature > 0.0) return fb::PolicySpec::boltzmann(temperature);
  return fb::Hyperparams::defaults_for(env.id()).eval_policy;
}

struct EvalArgs {
  std::string model;
  int goals = 20;
  std::vector<int> goal_cells;
  double epsilon = -1.0;
  double temperature = -1.0;
  long long seed = 0;
  int horizon = 100;
  double threshold = 0.1;
  int starts = 10;
  double gamma = 0.99;
};

int run_eval(const EvalArgs& args) {
  const fb::LoadedModel loaded = open_model(args.model);
  const fb::FBModel& model = *loaded.model;
  const fb::Environment& env = model.env();
  const fb::PolicySpec policy = eval_policy_for(env, args.epsilon, args.temperature);
  fb::RandomStream rng(static_cast<std::uint64_t>(args.seed));

  std::vector<fb::State> goals;
  if (!args.goal_cells.empty()) {
    if (!env.is_discrete()) throw std::invalid_argument("--goal-list is for discrete environments");
    for (int c : args.goal_cells) {
      if (!env.is_valid(fb::State::discrete(c))) throw std::invalid_argument("goal " + std::to_string(c) + " is a wall");
      goals.push_back(fb::State::discrete(c));
    }
  } else {
    fb::RandomStream goal_rng = rng.split(1);
    goals = fb::sample_goals(env, args.goals, goal_rng);
  }

  nlohmann::json out;
  out["env"] = std::string(fb::to_string(env.id()));
  out["policy"] = fb::policy_to_string(policy);
  nlohmann::json per_goal = nlohmann::json::array();
  std::vector<double> scores;
  fb::RandomStream roll_rng = rng.split(2);
  for (const fb::State& g : goals) {
    nlohmann::json item;
    double score = 0.0;
    if (env.is_discrete()) {
      score = fb::goal_quality(model, env, g.index, policy, args.gamma);
      item["cell"] = g.index;
      item["quality"] = score;
    } else {
      fb::SuccessOptions options;
      options.horizon = args.horizon;
      options.threshold = args.threshold;
      options.starts_per_goal = args.starts;
      score = fb::success_rate(model, env, g, policy, options, roll_rng);
      item["x"] = g.x;
      item["y"] = g.y;
      item["success_rate"] = score;
    }
    scores.push_back(score);
    per_goal.push_back(item);
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  out["goals"] = per_goal;
  out["metric"] = env.is_discrete() ? "policy_quality" : "success_rate";
  out["mean"] = scores.empty() ? 0.0 : mean / static_cast<double>(scores.size());
  out["median"] = scores.empty() ? 0.0 : fb::median(scores);
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct RolloutArgs {
  std::string model;
  std::string spec;
  std::string start;
  int max_steps = 50;
  long long seed = 0;
  std::string policy;
  bool heatmap = false;
};

std::string read_text_arg(const std::string& value) {
  if (!value.empty() && value[0] == '@') {
    std::ifstream in(value.substr(1));
    if (!in) throw std::invalid_argument("cannot read " + value.substr(1));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  return value;
}

int run_rollout(const RolloutArgs& args) {
  const fb::LoadedModel loaded = open_model(args.model);
  fb::service::Api api(loaded.model);
  nlohmann::json req;
  req["spec"] = nlohmann::json::parse(read_text_arg(args.spec));
  req["start"] = nlohmann::json::parse(args.start);
  req["max_steps"] = args.max_steps;
  req["seed"] = args.seed;
  req["heatmap"] = args.heatmap;
  if (!args.policy.empty()) req["policy"] = args.policy;
  const fb::service::Response res = api.rollout(req.dump());
  std::cout << res.body << "\n";
  return res.status == 200 ? 0 : 1;
}

fb::service::Server* g_server = nullptr;

int run_serve(const std::string& model_path, const std::string& host, int port) {
  const fb::LoadedModel loaded = open_model(model_path);
  fb::service::Server server(loaded.model);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "serving " << model_path << " on " << host << ":" << port << "\n";
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  if (!ok) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

int run_export(const std::string& model_path, const std::string& kind, const std::string& z_text,
               const std::string& out_path, int grid) {
  const fb::LoadedModel loaded = open_model(model_path);
  const fb::FBModel& model = *loaded.model;
  fb::TaskVector z = fb::TaskVector::Zero(model.dim());
  if (!z_text.empty()) {
    const auto j = nlohmann::json::parse(read_text_arg(z_text));
    if (j.is_object()) {
      z = fb::zr_from_spec(model, fb::parse_reward_spec(j.dump(), model.env()));
    } else {
      const auto v = j.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != model.dim()) throw std::invalid_argument("--z has the wrong dimension");
      z = Eigen::Map<const Eigen::VectorXd>(v.data(), model.dim());
    }
  }
  const fb::EmbeddingKind k = (kind == "F" || kind == "f") ? fb::EmbeddingKind::forward : fb::EmbeddingKind::backward;
  const fb::Embedding emb = fb::export_embedding(model, model.env(), k, z, grid);
  if (out_path.empty() || out_path == "-") {
    fb::write_embedding_csv(std::cout, model.env(), emb);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    fb::write_embedding_csv(out, model.env(), emb);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  fb::tune_allocator();
  CLI::App app{"Forward-backward representations: train, evaluate, serve"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run the unsupervised phase and write a model file");
  train_cmd->add_option("--config", train.config, "key = value hyperparameter file");
  train_cmd->add_option("--env", train.env, "discrete_maze | continuous_maze | cycle");
  train_cmd->add_option("--d", train.d, "representation dimension");
  train_cmd->add_option("--epochs", train.epochs, "number of epochs");
  train_cmd->add_option("--seed", train.seed, "random seed");
  train_cmd->add_option("--model,-o", train.model, "output model file");
  train_cmd->add_option("--metrics", train.metrics, "metrics CSV (default <model>.metrics.csv)");
  train_cmd->add_option("--set", train.overrides, "extra key=value hyperparameter overrides");
  train_cmd->add_flag("--quiet,-q", train.quiet, "no per-epoch progress on stderr");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score goal-reaching policies z = B(g)");
  eval_cmd->add_option("--model", eval.model, "model file")->required();
  eval_cmd->add_option("--goals", eval.goals, "number of random goals");
  eval_cmd->add_option("--goal-list", eval.goal_cells, "explicit goal cells")->delimiter(',');
  eval_cmd->add_option("--epsilon", eval.epsilon, "epsilon-greedy evaluation policy");
  eval_cmd->add_option("--temperature", eval.temperature, "Boltzmann evaluation policy");
  eval_cmd->add_option("--seed", eval.seed, "random seed");
  eval_cmd->add_option("--horizon", eval.horizon, "rollout length (continuous maze)");
  eval_cmd->add_option("--threshold", eval.threshold, "success distance (continuous maze)");
  eval_cmd->add_option("--starts", eval.starts, "rollouts per goal (continuous maze)");
  eval_cmd->add_option("--gamma", eval.gamma, "discount for policy quality");

  RolloutArgs roll;
  auto* roll_cmd = app.add_subcommand("rollout", "Roll out the policy for a reward spec");
  roll_cmd->add_option("--model", roll.model, "model file")->required();
  roll_cmd->add_option("--spec", roll.spec, "reward spec JSON, or @file")->required();
  roll_cmd->add_option("--start", roll.start, "start cell, or [x, y]")->required();
  roll_cmd->add_option("--max-steps", roll.max_steps, "step cap");
  roll_cmd->add_option("--seed", roll.seed, "random seed");
  roll_cmd->add_option("--policy", roll.policy, "greedy | boltzmann:<tau> | epsilon:<eps>");
  roll_cmd->add_flag("--heatmap", roll.heatmap, "include the Q heatmap");

  std::string serve_model;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a model over HTTP");
  serve_cmd->add_option("--model", serve_model, "model file")->required();
  serve_cmd->add_option("--port", port, "TCP port");
  serve_cmd->add_option("--host", host, "bind address");

  std::string export_model;
  std::string kind = "B";
  std::string z_text;
  std::string export_out;
  int grid = 50;
  auto* export_cmd = app.add_subcommand("export", "Write per-state F or B embeddings as CSV");
  export_cmd->add_option("--model", export_model, "model file")->required();
  export_cmd->add_option("--kind", kind, "F or B")->check(CLI::IsMember({"F", "B", "f", "b"}));
  export_cmd->add_option("--z", z_text, "task vector (JSON array or reward spec, or @file); default 0");
  export_cmd->add_option("--out,-o", export_out, "output CSV (default stdout)");
  export_cmd->add_option("--grid", grid, "lattice side for the continuous maze");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*roll_cmd) return run_rollout(roll);
    if (*serve_cmd) return run_serve(serve_model, host, port);
    if (*export_cmd) return run_export(export_model, kind, z_text, export_out, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
