#include "fb/model_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "fb/maze_layout.hpp"

namespace fb {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

constexpr std::array<char, 8> kMagic{'F', 'B', 'M', 'O', 'D', 'E', 'L', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated model file");
  return v;
}

void put_sizes(std::ostream& out, const std::vector<int>& sizes) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
}

std::vector<int> get_sizes(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n < 2 || n > 64) throw std::runtime_error("corrupt layer table in model file");
  std::vector<int> sizes(n);
  for (auto& s : sizes) s = static_cast<int>(get<std::uint32_t>(in));
  return sizes;
}

void put_net(std::ostream& out, const DenseNet<float>& net) {
  for (double v : net.flatten()) put<double>(out, v);
}

void get_net(std::istream& in, DenseNet<float>& net) {
  std::vector<double> values(net.num_parameters());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated model file");
  net.unflatten(values);
}

}  // namespace

void save_model(const std::filesystem::path& path, const FBModel& model, const std::string& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.env().id()));
  put<std::int32_t>(out, model.env().parameter());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dim()));
  put_sizes(out, model.f_net().layer_sizes());
  put_sizes(out, model.b_net().layer_sizes());
  put_net(out, model.f_net());
  put_net(out, model.b_net());
  put_net(out, model.f_target());
  put_net(out, model.b_target());
  put<std::uint64_t>(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not an FB model file: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  }
  const auto env_raw = get<std::uint32_t>(in);
  if (env_raw > static_cast<std::uint32_t>(EnvId::cycle)) throw std::runtime_error("unknown environment id in model file");
  const auto env_param = get<std::int32_t>(in);
  const auto d = static_cast<int>(get<std::uint32_t>(in));
  const std::vector<int> f_sizes = get_sizes(in);
  const std::vector<int> b_sizes = get_sizes(in);

  auto env = make_environment(static_cast<EnvId>(env_raw), env_param);
  Architecture arch;
  arch.d = d;
  arch.hidden.assign(b_sizes.begin() + 1, b_sizes.end() - 1);
  auto model = std::make_shared<FBModel>(env, arch);
  if (model->f_net().layer_sizes() != f_sizes || model->b_net().layer_sizes() != b_sizes) {
    throw std::runtime_error("model file layer sizes do not match its environment");
  }
  get_net(in, model->f_net());
  get_net(in, model->b_net());
  get_net(in, model->f_target());
  get_net(in, model->b_target());
  const auto len = get<std::uint64_t>(in);
  if (len > (1u << 24)) throw std::runtime_error("corrupt config echo in model file");
  std::string config(len, '\0');
  in.read(config.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated model file");
  return {std::move(model), std::move(config)};
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return fnv1a64(bytes);
}

}  // namespace fb
