#include <doctest.h>

#include <filesystem>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "fb/model_io.hpp"

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fb_test_" + name);
}

fb::FBModel make_model(fb::EnvId id, int d, std::uint64_t seed) {
  fb::FBModel m(fb::make_environment(id), fb::Architecture{d, {16, 24}});
  fb::RandomStream rng(seed);
  m.initialize(rng);
  return m;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

std::string load_error(const std::filesystem::path& p) {
  try {
    (void)fb::load_model(p);
  } catch (const std::runtime_error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("round trip is bit exact for every environment") {
  for (auto id : {fb::EnvId::discrete_maze, fb::EnvId::continuous_maze, fb::EnvId::cycle}) {
    auto model = make_model(id, 7, 3);
    fb::RandomStream rng(9);
    model.f_target().parameters()[0].weight.setRandom();
    const auto path = temp_file("roundtrip.fbm");
    fb::save_model(path, model, "d = 7\n");
    const auto loaded = fb::load_model(path);
    CHECK(loaded.config == "d = 7\n");
    CHECK(loaded.model->env().id() == id);
    CHECK(loaded.model->env().parameter() == model.env().parameter());
    CHECK(loaded.model->dim() == 7);
    CHECK(loaded.model->architecture().hidden == std::vector<int>{16, 24});
    CHECK(loaded.model->f_net().flatten() == model.f_net().flatten());
    CHECK(loaded.model->b_net().flatten() == model.b_net().flatten());
    CHECK(loaded.model->f_target().flatten() == model.f_target().flatten());
    CHECK(loaded.model->b_target().flatten() == model.b_target().flatten());

    const auto z = fb::sample_z(7, rng);
    const auto s = model.env().reset(rng);
    CHECK(loaded.model->forward(s, z) == model.forward(s, z));

    const auto path2 = temp_file("roundtrip2.fbm");
    fb::save_model(path2, *loaded.model, loaded.config);
    CHECK(read_bytes(path) == read_bytes(path2));
    CHECK(fb::file_checksum(path) == fb::file_checksum(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
  }
}

TEST_CASE("cycle length is preserved") {
  fb::FBModel m(fb::make_environment(fb::EnvId::cycle, 5), fb::Architecture{4, {8}});
  fb::RandomStream rng(1);
  m.initialize(rng);
  const auto path = temp_file("cycle.fbm");
  fb::save_model(path, m);
  const auto loaded = fb::load_model(path);
  CHECK(loaded.model->env().parameter() == 5);
  CHECK(loaded.model->env().num_state_indices() == 5);
  CHECK(loaded.config.empty());
  std::filesystem::remove(path);
}

TEST_CASE("header layout") {
  const auto model = make_model(fb::EnvId::discrete_maze, 5, 1);
  const auto path = temp_file("header.fbm");
  fb::save_model(path, model);
  const auto bytes = read_bytes(path);
  CHECK(bytes.substr(0, 8) == std::string("FBMODEL\0", 8));
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  CHECK(version == fb::kModelFormatVersion);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt files are rejected") {
  const auto model = make_model(fb::EnvId::discrete_maze, 5, 1);
  const auto path = temp_file("corrupt.fbm");
  fb::save_model(path, model);
  const auto good = read_bytes(path);

  CHECK(load_error(temp_file("does_not_exist.fbm")).find("cannot open") != std::string::npos);

  auto bad = good;
  bad[0] = 'X';
  write_bytes(path, bad);
  CHECK(load_error(path).find("not an FB model file") != std::string::npos);

  bad = good;
  bad[8] = 2;
  write_bytes(path, bad);
  CHECK(load_error(path).find("unsupported model format version 2") != std::string::npos);

  bad = good;
  bad[12] = 9;
  write_bytes(path, bad);
  CHECK(load_error(path).find("unknown environment") != std::string::npos);

  for (std::size_t cut : {std::size_t{4}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
    write_bytes(path, good.substr(0, cut));
    CHECK_MESSAGE(!load_error(path).empty(), "cut at " << cut);
  }
  write_bytes(path, "");
  CHECK(!load_error(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("checksum is FNV-1a of the bytes") {
  const auto path = temp_file("checksum.bin");
  write_bytes(path, "a");
  CHECK(fb::file_checksum(path) == 0xaf63dc4c8601ec8cULL);
  write_bytes(path, "");
  CHECK(fb::file_checksum(path) == 0xcbf29ce484222325ULL);
  std::filesystem::remove(path);
  CHECK_THROWS_AS((void)fb::file_checksum(path), std::runtime_error);
}

}
