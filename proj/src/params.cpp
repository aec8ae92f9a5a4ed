#include "swformer/params.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "swformer/error.hpp"

namespace swformer {

namespace {

constexpr std::array<char, 7> kMagic = {'S', 'W', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& is) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw ContractError("checkpoint truncated");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

Tensor ParamStore::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  tensor.set_requires_grad(true);
  entries_.push_back({name, tensor});
  return tensor;
}

Tensor ParamStore::add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  std::vector<double> values(fan_in * fan_out);
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : values) v = rng.normal(0.0, std);
  return add(name, Tensor({fan_in, fan_out}, std::move(values)));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(kVersion));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) put_le<std::uint64_t>(os, d);
    for (double v : e.tensor.values()) put_le<double>(os, v);
  }
  if (!os) throw ContractError("failed writing checkpoint " + path.string());
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("cannot read checkpoint " + path.string());
  std::array<char, 7> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw ContractError("not a checkpoint file: " + path.string());
  const int version = is.get();
  if (version != kVersion) throw ContractError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(is);
  if (count != params.size()) {
    throw ContractError("checkpoint has " + std::to_string(count) + " records, model has " +
                        std::to_string(params.size()));
  }
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = get_le<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ContractError("checkpoint truncated");
    const auto rank = get_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(is);
    Tensor target = params.get(name);
    if (target.shape() != shape) {
      throw ContractError("checkpoint shape " + shape_str(shape) + " for " + name + " expected " +
                          shape_str(target.shape()));
    }
    auto values = target.mutable_values();
    for (auto& v : values) v = get_le<double>(is);
  }
}

}  // namespace swformer
