#include "tst/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "tst/errors.hpp"

namespace tst {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'S', 'T', '1'};
constexpr std::uint32_t kConfigFields = 15;

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

void put_u64(std::ostream& out, std::size_t v) { put<std::uint64_t>(out, v); }
void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

template <typename U>
U get(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

std::size_t get_u64(std::istream& in, const char* what) { return get<std::uint64_t>(in, what); }
double get_f64(std::istream& in, const char* what) { return std::bit_cast<double>(get<std::uint64_t>(in, what)); }

}  // namespace

void write_checkpoint(std::ostream& out, const TSTModel<float>& model) {
  const TSTConfig& c = model.config();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kConfigFields);
  put_u64(out, c.series_length);
  put_u64(out, c.num_subsequences);
  put_u64(out, c.dim);
  put_u64(out, c.dim_mlp);
  put_u64(out, c.key_dim);
  put_u64(out, c.num_heads);
  put_u64(out, c.depth);
  put_f64(out, c.p_drop);
  put_u64(out, c.position_encoding == PositionEncoding::Learned1D ? 0 : 1);
  put_u64(out, c.num_classes);
  put_f64(out, c.initial_lr);
  put_u64(out, c.lr_step);
  put_f64(out, c.lr_gamma);
  put_u64(out, c.batch_size);
  put_u64(out, c.epochs);

  auto params = model.named_parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u64(out, e);
    for (float v : t.data()) put(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw IoError("failed to write checkpoint");
}

TSTModel<float> read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw DataError("checkpoint truncated while reading magic");
  if (magic != kMagic) throw DataError("not a TST1 checkpoint (bad magic or unsupported version)");
  const auto fields = get<std::uint32_t>(in, "config field count");
  if (fields != kConfigFields)
    throw DataError("checkpoint config has " + std::to_string(fields) + " fields, expected " +
                    std::to_string(kConfigFields));
  TSTConfig c;
  c.series_length = get_u64(in, "series_length");
  c.num_subsequences = get_u64(in, "num_subsequences");
  c.dim = get_u64(in, "dim");
  c.dim_mlp = get_u64(in, "dim_mlp");
  c.key_dim = get_u64(in, "key_dim");
  c.num_heads = get_u64(in, "num_heads");
  c.depth = get_u64(in, "depth");
  c.p_drop = get_f64(in, "p_drop");
  const auto pe = get_u64(in, "position_encoding");
  if (pe > 1) throw DataError("checkpoint has unknown position encoding code " + std::to_string(pe));
  c.position_encoding = pe == 0 ? PositionEncoding::Learned1D : PositionEncoding::None;
  c.num_classes = get_u64(in, "num_classes");
  c.initial_lr = get_f64(in, "initial_lr");
  c.lr_step = get_u64(in, "lr_step");
  c.lr_gamma = get_f64(in, "lr_gamma");
  c.batch_size = get_u64(in, "batch_size");
  c.epochs = get_u64(in, "epochs");
  c.validate();

  TSTModel<float> model(c, 0);
  auto params = model.named_parameters();
  const auto count = get<std::uint32_t>(in, "parameter count");
  if (count != params.size())
    throw ConfigError("checkpoint stores " + std::to_string(count) + " parameters, config implies " +
                      std::to_string(params.size()));
  for (auto& [name, t] : params) {
    const auto rank = get<std::uint32_t>(in, "parameter rank");
    Shape shape(rank);
    for (auto& e : shape) e = get_u64(in, "parameter extent");
    if (shape != t.shape())
      throw ConfigError("checkpoint parameter " + name + " has shape " + to_string(shape) + ", config implies " +
                        to_string(t.shape()));
    for (float& v : t.mutable_data()) v = std::bit_cast<float>(get<std::uint32_t>(in, name.c_str()));
  }
  return model;
}

void save_checkpoint(const TSTModel<float>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(out, model);
}

TSTModel<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

TSTModel<float> load_checkpoint(const std::string& path, const TSTConfig& expected) {
  auto model = load_checkpoint(path);
  if (!model.config().same_architecture(expected))
    throw ConfigError("checkpoint architecture does not match the requested config");
  return model;
}

}  // namespace tst
