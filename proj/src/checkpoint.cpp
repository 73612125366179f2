// SPDX-License-Identifier: Apache-2.0
#include "intent/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"

namespace intent {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'T', 'E', 'N', 'T', 'C', 'K'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw ConfigError("checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += sizeof(U);
  return static_cast<U>(v);
}

struct Header {
  ModelConfig config;
  nlohmann::json tensors;
  std::size_t data_offset = 0;
};

Header read_header(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ConfigError("not a checkpoint file");
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw ConfigError("checkpoint header truncated");
  const auto j = nlohmann::json::parse(bytes.substr(pos, len));
  Header h;
  h.config = j.at("config").get<ModelConfig>();
  h.tensors = j.at("tensors");
  h.data_offset = pos + len;
  return h;
}

}  // namespace

template <typename T>
std::string serialize_checkpoint(const ModelParams<T>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.layout.tensors)
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  const std::string header = nlohmann::json{{"config", params.config}, {"tensors", tensors}}.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, header.size());
  out += header;
  out.reserve(out.size() + params.values.size() * 4);
  for (T v : params.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

ModelConfig checkpoint_config(std::string_view bytes) { return read_header(bytes).config; }

template <typename T>
ModelParams<T> deserialize_checkpoint(std::string_view bytes) {
  const Header h = read_header(bytes);
  ModelParams<T> params{h.config, ParamLayout::build(h.config), {}};
  const auto& specs = params.layout.tensors;
  if (h.tensors.size() != specs.size())
    throw ConfigError("checkpoint declares " + std::to_string(h.tensors.size()) +
                      " tensors, config implies " + std::to_string(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = h.tensors[i];
    if (t.at("name").get<std::string>() != specs[i].name ||
        t.at("rows").get<std::size_t>() != specs[i].rows ||
        t.at("cols").get<std::size_t>() != specs[i].cols)
      throw ConfigError("checkpoint tensor " + std::to_string(i) + " does not match config (" +
                        specs[i].name + ")");
  }
  std::size_t pos = h.data_offset;
  if (bytes.size() - pos != params.layout.total * 4)
    throw ConfigError("checkpoint payload size mismatch");
  params.values.resize(params.layout.total);
  for (auto& v : params.values)
    v = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
  return params;
}

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params));
}

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint<T>(read_file(path));
}

template std::string serialize_checkpoint<float>(const ModelParams<float>&);
template std::string serialize_checkpoint<double>(const ModelParams<double>&);
template ModelParams<float> deserialize_checkpoint<float>(std::string_view);
template ModelParams<double> deserialize_checkpoint<double>(std::string_view);
template void save_checkpoint<float>(const ModelParams<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const ModelParams<double>&, const std::filesystem::path&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace intent
