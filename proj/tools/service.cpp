#include "service.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "fb/evaluation.hpp"
#include "fb/hyperparams.hpp"
#include "fb/policy.hpp"
#include "fb/reward.hpp"

namespace fb::service {

using nlohmann::json;

namespace {

constexpr int kMaxRolloutSteps = 10000;
constexpr double kContinuousReach = 0.1;

Response error(int status, const std::string& message) { return {status, json{{"error", message}}.dump()}; }

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw SpecError(400, std::string("malformed JSON: ") + e.what());
  }
}

json grid_json(const Eigen::MatrixXd& grid) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = grid(r, c);
      row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    }
    rows.push_back(row);
  }
  return rows;
}

json state_json(const Environment& env, const State& s) {
  if (env.is_discrete()) return s.index;
  return json::array({s.x, s.y});
}

State state_from(const Environment& env, const json& j) {
  if (env.is_discrete()) {
    if (!j.is_number_integer()) throw SpecError(400, "\"start\" must be a cell index");
    return State::discrete(j.get<int>());
  }
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return State::point(j[0].get<double>(), j[1].get<double>());
  }
  if (j.is_object() && j.contains("x") && j.contains("y") && j["x"].is_number() && j["y"].is_number()) {
    return State::point(j["x"].get<double>(), j["y"].get<double>());
  }
  throw SpecError(400, "\"start\" must be [x, y] or {\"x\":..,\"y\":..}");
}

PolicySpec policy_from(const json& j, const PolicySpec& fallback) {
  if (j.is_null()) return fallback;
  try {
    if (j.is_string()) return parse_policy(j.get<std::string>());
    if (j.is_object()) {
      if (j.contains("eps")) return PolicySpec::epsilon_greedy(j["eps"].get<double>());
      if (j.contains("epsilon")) return PolicySpec::epsilon_greedy(j["epsilon"].get<double>());
      if (j.contains("tau")) return PolicySpec::boltzmann(j["tau"].get<double>());
      if (j.contains("temperature")) return PolicySpec::boltzmann(j["temperature"].get<double>());
      if (j.value("kind", std::string()) == "greedy" || j.empty()) return PolicySpec::greedy();
    }
  } catch (const std::invalid_argument& e) {
    throw SpecError(400, std::string("bad policy: ") + e.what());
  } catch (const json::exception& e) {
    throw SpecError(400, std::string("bad policy: ") + e.what());
  }
  throw SpecError(400, "\"policy\" must be \"greedy\", {\"eps\": e} or {\"tau\": t}");
}

PolicySpec default_policy(const Environment& env) { return Hyperparams::defaults_for(env.id()).eval_policy; }

TaskVector z_from_array(const json& j, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) {
    throw SpecError(400, "\"z_r\" must be an array of " + std::to_string(d) + " numbers");
  }
  TaskVector z(d);
  for (int i = 0; i < d; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw SpecError(400, "\"z_r\" entries must be numbers");
    z(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  if (!z.allFinite()) throw SpecError(400, "\"z_r\" must be finite");
  return z;
}

template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const SpecError& e) {
    return error(e.status(), e.what());
  } catch (const json::exception& e) {
    return error(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

}  // namespace

Api::Api(std::shared_ptr<const FBModel> model) : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("service needs a model");
}

Response Api::env_info() const {
  const Environment& env = model_->env();
  json out;
  out["env"] = std::string(to_string(env.id()));
  out["d"] = model_->dim();
  out["num_actions"] = env.num_actions();
  out["feature_dim"] = env.feature_dim();
  if (env.id() == EnvId::cycle) {
    out["actions"] = json::array({"minus", "stay", "plus"});
  } else {
    out["actions"] = json::array({"left", "right", "up", "down", "stay"});
  }
  if (const auto* maze = dynamic_cast<const DiscreteMaze*>(&env)) {
    const MazeLayout& layout = maze->layout();
    out["rows"] = layout.rows();
    out["cols"] = layout.cols();
    json lines = json::array();
    std::istringstream text(layout.to_text());
    std::string line;
    while (std::getline(text, line)) lines.push_back(line);
    out["layout"] = lines;
    out["open_cells"] = layout.open_cells();
    out["layout_checksum"] = layout.checksum();
  } else if (env.id() == EnvId::cycle) {
    out["length"] = env.parameter();
  } else {
    json walls = json::array();
    for (const Segment& s : dynamic_cast<const ContinuousMaze&>(env).walls()) {
      walls.push_back(json::array({s.x0, s.y0, s.x1, s.y1}));
    }
    out["walls"] = walls;
    out["success_threshold"] = kContinuousReach;
  }
  return {200, out.dump()};
}

Response Api::reward_spec(const std::string& body) const {
  return guarded([&] {
    const RewardSpec spec = parse_reward_spec(body, model_->env());
    const TaskVector z = zr_from_spec(*model_, spec);
    json out;
    out["z_r"] = std::vector<double>(z.data(), z.data() + z.size());
    out["norm"] = z.norm();
    return Response{200, out.dump()};
  });
}

Response Api::rollout(const std::string& body) const {
  return guarded([&] {
    const Environment& env = model_->env();
    const json req = parse_body(body);
    if (!req.is_object()) throw SpecError(400, "rollout request must be a JSON object");

    TaskVector z;
    RewardSpec spec;
    if (req.contains("spec")) {
      spec = parse_reward_spec(req["spec"].dump(), env);
      z = zr_from_spec(*model_, spec);
    } else if (req.contains("z_r")) {
      z = z_from_array(req["z_r"], model_->dim());
    } else {
      throw SpecError(400, "rollout needs \"z_r\" or \"spec\"");
    }
    if (!req.contains("start")) throw SpecError(400, "rollout needs \"start\"");
    const State start = state_from(env, req["start"]);
    if (!env.is_valid(start)) throw SpecError(422, "start state is a wall or out of range");
    const PolicySpec policy = policy_from(req.value("policy", json()), default_policy(env));
    const int max_steps = req.value("max_steps", 50);
    if (max_steps < 0 || max_steps > kMaxRolloutSteps) throw SpecError(400, "\"max_steps\" out of range");
    const std::uint64_t seed = req.value("seed", std::uint64_t{0});

    std::vector<State> goals;
    for (const auto& g : spec.goals) {
      if (g.weight > 0.0) goals.push_back(g.goal);
    }
    StatePredicate reached;
    if (!goals.empty()) {
      reached = [&](const State& s) {
        for (const State& g : goals) {
          if (env.is_discrete() ? s.index == g.index : state_distance(env, s, g) < kContinuousReach) return true;
        }
        return false;
      };
    }
    RandomStream rng(seed);
    const RolloutResult result = fb::rollout(*model_, env, start, z, policy, max_steps, rng, reached, true);

    json out;
    json traj = json::array();
    for (const State& s : result.trajectory) traj.push_back(state_json(env, s));
    out["trajectory"] = traj;
    out["reached"] = result.reached;
    out["steps"] = result.steps;
    if (req.value("heatmap", false)) out["q_heatmap"] = grid_json(q_heatmap(*model_, env, z));
    return Response{200, out.dump()};
  });
}

Response Api::heatmap(const std::string& spec_json, int resolution) const {
  return guarded([&] {
    if (spec_json.empty()) throw SpecError(400, "missing \"spec\" query parameter");
    if (resolution < 1 || resolution > 200) throw SpecError(400, "resolution must be in [1, 200]");
    const RewardSpec spec = parse_reward_spec(spec_json, model_->env());
    const TaskVector z = zr_from_spec(*model_, spec);
    const Eigen::MatrixXd grid = q_heatmap(*model_, model_->env(), z, resolution);
    json out;
    out["rows"] = grid.rows();
    out["cols"] = grid.cols();
    out["values"] = grid_json(grid);
    return Response{200, out.dump()};
  });
}

Response Api::embedding(const std::string& kind) const {
  return guarded([&] {
    EmbeddingKind k;
    if (kind == "B" || kind == "b" || kind.empty()) {
      k = EmbeddingKind::backward;
    } else if (kind == "F" || kind == "f") {
      k = EmbeddingKind::forward;
    } else {
      throw SpecError(400, "kind must be F or B");
    }
    const Environment& env = model_->env();
    const Embedding emb = export_embedding(*model_, env, k, TaskVector::Zero(model_->dim()));
    json out;
    json states = json::array();
    for (const State& s : emb.states) states.push_back(state_json(env, s));
    out["kind"] = k == EmbeddingKind::backward ? "B" : "F";
    out["states"] = states;
    json values = json::array();
    for (Eigen::Index i = 0; i < emb.values.rows(); ++i) {
      const Eigen::VectorXd row = emb.values.row(i).transpose();
      values.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    out["values"] = values;
    return Response{200, out.dump()};
  });
}

struct Server::Impl {
  Api api;
  httplib::Server http;

  explicit Impl(std::shared_ptr<const FBModel> model) : api(std::move(model)) {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    http.Get("/api/env", [this, send](const httplib::Request&, httplib::Response& res) { send(res, api.env_info()); });
    http.Post("/api/reward-spec", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api.reward_spec(req.body));
    });
    http.Post("/api/rollout", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api.rollout(req.body));
    });
    http.Get("/api/heatmap", [this, send](const httplib::Request& req, httplib::Response& res) {
      int resolution = 50;
      if (req.has_param("resolution")) {
        try {
          resolution = std::stoi(req.get_param_value("resolution"));
        } catch (const std::exception&) {
          send(res, error(400, "resolution must be an integer"));
          return;
        }
      }
      send(res, api.heatmap(req.get_param_value("spec"), resolution));
    });
    http.Get("/api/embedding", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api.embedding(req.get_param_value("kind")));
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(json{{"error", res.status == 404 ? "not found" : "request failed"}}.dump(),
                        "application/json");
      }
    });
  }
};

Server::Server(std::shared_ptr<const FBModel> model) : impl_(std::make_unique<Impl>(std::move(model))) {}
Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }
int Server::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }
bool Server::serve() { return impl_->http.listen_after_bind(); }
void Server::stop() {
  if (impl_) impl_->http.stop();
}
bool Server::running() const { return impl_->http.is_running(); }

}  // namespace fb::service
