// SPDX-License-Identifier: Apache-2.0

#include "mtda/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "mtda/error.hpp"

namespace mtda {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'M', 'T', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

class In {
 public:
  In(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename V>
  V get() {
    V v{};
    bytes(reinterpret_cast<char*>(&v), sizeof(V));
    return v;
  }
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ConfigError("checkpoint " + path_ + " is truncated");
    }
  }
  std::string string(std::size_t n) {
    if (n > (std::size_t{1} << 30)) throw ConfigError("checkpoint " + path_ + " is corrupt");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& config_json,
                     const DualBranchModel<float>& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  ParamList<float> tensors = model.parameters();
  for (auto& b : model.buffers()) tensors.push_back(b);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, config_json.size());
  out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot read checkpoint " + path.string());
  In in(file, path.string());
  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError(path.string() + " is not an mtda checkpoint");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  CheckpointData data;
  data.config_json = in.string(in.get<std::uint64_t>());
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = in.string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw ConfigError("checkpoint tensor '" + name + "' has corrupt rank");
    Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint64_t>();
    const std::size_t n = numel(shape);
    if (n > (std::size_t{1} << 28)) throw ConfigError("checkpoint tensor '" + name + "' too large");
    std::vector<float> values(n);
    in.bytes(reinterpret_cast<char*>(values.data()), n * sizeof(float));
    data.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (file.peek() != std::char_traits<char>::eof()) {
    throw ConfigError("checkpoint " + path.string() + " has trailing bytes");
  }
  return data;
}

void load_into(const CheckpointData& data, const DualBranchModel<float>& model) {
  ParamList<float> targets = model.parameters();
  for (auto& b : model.buffers()) targets.push_back(b);
  std::map<std::string, const Tensor<float>*> stored;
  for (const auto& [name, t] : data.tensors) stored[name] = &t;

  std::string problems;
  for (const auto& [name, dst] : targets) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      problems += "\n  missing " + name;
      continue;
    }
    if (it->second->shape() != dst.shape()) {
      problems += "\n  " + name + ": stored " + to_string(it->second->shape()) + ", model " +
                  to_string(dst.shape());
    }
    stored.erase(it);
  }
  for (const auto& [name, t] : stored) problems += "\n  unexpected " + name;
  if (!problems.empty()) throw ConfigError("checkpoint does not match the model:" + problems);

  std::map<std::string, const Tensor<float>*> index;
  for (const auto& [name, t] : data.tensors) index[name] = &t;
  for (const auto& [name, dst] : targets) {
    Tensor<float> handle = dst;
    const auto& src = index.at(name)->values();
    std::copy(src.begin(), src.end(), handle.data().begin());
  }
}

}  // namespace mtda
