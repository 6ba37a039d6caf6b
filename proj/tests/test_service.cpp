#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <thread>

#include "fb/evaluation.hpp"
#include "fb/reward.hpp"
#include "service.hpp"

#include <httplib.h>

using nlohmann::json;

namespace {

std::shared_ptr<const fb::FBModel> model_for(fb::EnvId id, int d = 6) {
  auto m = std::make_shared<fb::FBModel>(fb::make_environment(id), fb::Architecture{d, {16, 16}});
  fb::RandomStream rng(1);
  m->initialize(rng);
  return m;
}

std::vector<double> all_params(const fb::FBModel& m) {
  std::vector<double> out;
  for (const auto* net : {&m.f_net(), &m.b_net(), &m.f_target(), &m.b_target()}) {
    const auto p = net->flatten();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("env info") {
  const fb::service::Api api(model_for(fb::EnvId::discrete_maze));
  const auto r = api.env_info();
  CHECK(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j["env"] == "discrete_maze");
  CHECK(j["d"] == 6);
  CHECK(j["rows"] == 11);
  CHECK(j["cols"] == 11);
  CHECK(j["layout"].size() == 11);
  CHECK(j["open_cells"].size() == 104);
  CHECK(j["num_actions"] == 5);

  const auto c = json::parse(fb::service::Api(model_for(fb::EnvId::continuous_maze)).env_info().body);
  CHECK(c["env"] == "continuous_maze");
  CHECK(!c["walls"].empty());
  const auto y = json::parse(fb::service::Api(model_for(fb::EnvId::cycle)).env_info().body);
  CHECK(y["length"] == 12);
}

TEST_CASE("reward spec returns B of the goal") {
  const auto model = model_for(fb::EnvId::discrete_maze);
  const fb::service::Api api(model);
  const auto r = api.reward_spec(R"({"goals":[{"cell":24,"w":1}]})");
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  const auto zr = j["z_r"].get<std::vector<double>>();
  const Eigen::VectorXd b = model->backward_goal(fb::State::discrete(24));
  REQUIRE(zr.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(zr[i] == b(i));
  CHECK(j["norm"].get<double>() == doctest::Approx(b.norm()));
}

TEST_CASE("error statuses") {
  const fb::service::Api api(model_for(fb::EnvId::discrete_maze));
  CHECK(api.reward_spec("{not json").status == 400);
  CHECK(api.reward_spec(R"({"goals":[]})").status == 400);
  CHECK(api.reward_spec(R"({"goals":[{"cell":60}]})").status == 422);
  CHECK(api.reward_spec(R"({"goals":[{"cell":500}]})").status == 422);
  const auto body = json::parse(api.reward_spec(R"({"goals":[{"cell":5}]})").body);
  CHECK(body.contains("error"));

  CHECK(api.rollout(R"({"start":0})").status == 400);
  CHECK(api.rollout(R"({"spec":{"goals":[{"cell":24}]}})").status == 400);
  CHECK(api.rollout(R"({"z_r":[1,2],"start":0})").status == 400);
  CHECK(api.rollout(R"({"spec":{"goals":[{"cell":24}]},"start":60})").status == 422);
  CHECK(api.rollout(R"({"spec":{"goals":[{"cell":24}]},"start":0,"max_steps":-1})").status == 400);
  CHECK(api.rollout(R"({"spec":{"goals":[{"cell":24}]},"start":0,"policy":"softmax"})").status == 400);
  CHECK(api.rollout("[1]").status == 400);

  CHECK(api.heatmap("", 50).status == 400);
  CHECK(api.heatmap(R"({"goals":[{"cell":24}]})", 0).status == 400);
  CHECK(api.heatmap(R"({"goals":[{"cell":60}]})", 50).status == 422);
  CHECK(api.embedding("Q").status == 400);
}

TEST_CASE("rollout contract and determinism") {
  const auto model = model_for(fb::EnvId::discrete_maze);
  const fb::service::Api api(model);
  const std::string body =
      R"({"spec":{"goals":[{"cell":24,"w":1}]},"start":0,"policy":{"eps":0.3},"max_steps":50,"seed":7})";
  const auto a = api.rollout(body);
  const auto b = api.rollout(body);
  REQUIRE(a.status == 200);
  CHECK(a.body == b.body);
  const auto j = json::parse(a.body);
  CHECK(j["trajectory"].size() <= 51);
  CHECK(j["trajectory"][0] == 0);
  CHECK(j.contains("reached"));
  CHECK(!j.contains("q_heatmap"));

  const auto other = api.rollout(
      R"({"spec":{"goals":[{"cell":24,"w":1}]},"start":0,"policy":{"eps":0.3},"max_steps":50,"seed":8})");
  CHECK(other.body != a.body);

  const auto with_map =
      json::parse(api.rollout(R"({"z_r":[1,0,0,0,0,0],"start":12,"policy":"greedy","max_steps":5,"heatmap":true})")
                      .body);
  CHECK(with_map["trajectory"].size() == 6);
  CHECK(with_map["q_heatmap"].size() == 11);
  CHECK(with_map["q_heatmap"][5][5].is_null());
}

TEST_CASE("rollout stops at the goal") {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  const fb::service::Api api(model_for(fb::EnvId::discrete_maze));
  const auto j = json::parse(api.rollout(R"({"spec":{"goals":[{"cell":13}]},"start":13,"max_steps":20})").body);
  CHECK(j["reached"] == true);
  CHECK(j["steps"] == 0);
  CHECK(j["trajectory"].size() == 1);
}

TEST_CASE("continuous rollout accepts both start forms") {
  const fb::service::Api api(model_for(fb::EnvId::continuous_maze));
  const auto a = api.rollout(R"({"spec":{"goals":[{"x":0.8,"y":0.8}]},"start":[0.2,0.2],"max_steps":10,"seed":1})");
  const auto b = api.rollout(R"({"spec":{"goals":[{"x":0.8,"y":0.8}]},"start":{"x":0.2,"y":0.2},"max_steps":10,"seed":1})");
  REQUIRE(a.status == 200);
  CHECK(a.body == b.body);
  CHECK(json::parse(a.body)["trajectory"][0].size() == 2);
  CHECK(api.rollout(R"({"spec":{"goals":[{"x":0.8,"y":0.8}]},"start":[1.5,0.2]})").status == 422);
}

TEST_CASE("heatmap equals the offline computation") {
  const auto model = model_for(fb::EnvId::discrete_maze);
  const fb::service::Api api(model);
  const std::string spec = R"({"goals":[{"cell":24,"w":1},{"cell":90,"w":-3}]})";
  const auto r = api.heatmap(spec, 50);
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j["rows"] == 11);
  const auto parsed = fb::parse_reward_spec(spec, model->env());
  const Eigen::MatrixXd offline = fb::q_heatmap(*model, model->env(), fb::zr_from_spec(*model, parsed));
  for (int row = 0; row < 11; ++row) {
    for (int col = 0; col < 11; ++col) {
      const auto& v = j["values"][row][col];
      if (std::isnan(offline(row, col))) {
        CHECK(v.is_null());
      } else {
        CHECK(std::abs(v.get<double>() - offline(row, col)) < 1e-9);
      }
    }
  }
  const auto c = json::parse(fb::service::Api(model_for(fb::EnvId::continuous_maze))
                                 .heatmap(R"({"goals":[{"x":0.5,"y":0.2}]})", 8)
                                 .body);
  CHECK(c["rows"] == 8);
  CHECK(c["values"][7].size() == 8);
}

TEST_CASE("embeddings") {
  const auto model = model_for(fb::EnvId::discrete_maze, 4);
  const fb::service::Api api(model);
  const auto b = json::parse(api.embedding("B").body);
  CHECK(b["kind"] == "B");
  CHECK(b["states"].size() == 104);
  CHECK(b["values"][0].size() == 4);
  const auto f = json::parse(api.embedding("F").body);
  CHECK(f["kind"] == "F");
  CHECK(f["values"].size() == 104);
}

TEST_CASE("handlers leave the model untouched") {
  auto model = model_for(fb::EnvId::discrete_maze);
  const auto before = all_params(*model);
  const fb::service::Api api(model);
  (void)api.reward_spec(R"({"goals":[{"cell":24}]})");
  (void)api.rollout(R"({"spec":{"goals":[{"cell":24}]},"start":0,"seed":3})");
  (void)api.heatmap(R"({"goals":[{"cell":24}]})", 50);
  (void)api.embedding("F");
  CHECK(all_params(*model) == before);
}

TEST_CASE("HTTP round trip") {
  const auto model = model_for(fb::EnvId::discrete_maze);
  fb::service::Server server(model);
  const int port = server.bind_any("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.serve(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  auto env = client.Get("/api/env");
  REQUIRE(env);
  CHECK(env->status == 200);
  CHECK(json::parse(env->body)["rows"] == 11);

  auto spec = client.Post("/api/reward-spec", R"({"goals":[{"cell":24,"w":1}]})", "application/json");
  REQUIRE(spec);
  CHECK(spec->status == 200);
  CHECK(spec->body == fb::service::Api(model).reward_spec(R"({"goals":[{"cell":24,"w":1}]})").body);

  auto bad = client.Post("/api/reward-spec", R"({"goals":[{"cell":60}]})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);

  auto roll = client.Post("/api/rollout", R"({"spec":{"goals":[{"cell":24}]},"start":0,"seed":2})", "application/json");
  REQUIRE(roll);
  CHECK(roll->status == 200);

  auto heat = client.Get(R"(/api/heatmap?spec=%7B%22goals%22%3A%5B%7B%22cell%22%3A24%7D%5D%7D)");
  REQUIRE(heat);
  CHECK(heat->status == 200);
  CHECK(json::parse(heat->body)["values"].size() == 11);

  auto res = client.Get("/api/heatmap?spec=%7B%7D&resolution=abc");
  REQUIRE(res);
  CHECK(res->status == 400);

  auto emb = client.Get("/api/embedding?kind=B");
  REQUIRE(emb);
  CHECK(emb->status == 200);

  auto missing = client.Get("/api/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).contains("error"));

  server.stop();
  worker.join();
  CHECK(!server.running());
}

}
