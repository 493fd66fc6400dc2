#include "atpg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

namespace atpg::checkpoint {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<unsigned char>& out, const T& value) {
  const auto* p = reinterpret_cast<const unsigned char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointFormatError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint32_t crc(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

nlohmann::json headerJson(const Checkpoint& c) {
  const auto& layout = c.params.layout;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layout.layers)
    layers.push_back({{"name", l.name}, {"in", l.in}, {"out", l.out}, {"weight_offset", l.weight_offset},
                      {"bias_offset", l.bias_offset}});
  return {
      {"layers", layers},
      {"widths",
       {{"pose_hidden", layout.widths.pose_hidden},
        {"embedding", layout.widths.embedding},
        {"target_hidden", layout.widths.target_hidden},
        {"output_hidden", layout.widths.output_hidden}}},
      {"num_params", layout.num_params},
      {"alpha", c.params.alpha},
      {"bounds",
       {{"v_min", c.bounds.v_min}, {"v_max", c.bounds.v_max}, {"omega_min", c.bounds.omega_min},
        {"omega_max", c.bounds.omega_max}}},
      {"n_y", layout.state_dim},
      {"n_l_max", layout.max_targets},
      {"training_seed", c.training_seed},
      {"epoch", c.epoch},
  };
}

}  // namespace

std::vector<unsigned char> encode(const Checkpoint& ckpt) {
  const std::string header = headerJson(ckpt).dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (Eigen::Index i = 0; i < ckpt.params.theta.size(); ++i) put(out, ckpt.params.theta(i));
  put(out, crc(out.data(), out.size()));
  return out;
}

Checkpoint decode(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw CheckpointFormatError("not an ATPG checkpoint (bad magic)");
  std::size_t tail = bytes.size() - sizeof(std::uint32_t);
  const auto stored = get<std::uint32_t>(bytes, tail);
  if (stored != crc(bytes.data(), bytes.size() - sizeof(std::uint32_t)))
    throw ChecksumMismatch("checkpoint CRC32 mismatch");

  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<std::uint32_t>(bytes, pos);
  if (pos + header_len > bytes.size() - sizeof(std::uint32_t)) throw CheckpointFormatError("checkpoint header truncated");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  Checkpoint c;
  try {
    PolicyWidths w;
    w.pose_hidden = h.at("widths").at("pose_hidden").get<int>();
    w.embedding = h.at("widths").at("embedding").get<int>();
    w.target_hidden = h.at("widths").at("target_hidden").get<int>();
    w.output_hidden = h.at("widths").at("output_hidden").get<int>();
    c.params.layout = PolicyLayout::make(h.at("n_y").get<int>(), h.at("n_l_max").get<int>(), w);
    c.params.alpha = h.at("alpha").get<double>();
    const auto& b = h.at("bounds");
    c.bounds = {b.at("v_min").get<double>(), b.at("v_max").get<double>(), b.at("omega_min").get<double>(),
                b.at("omega_max").get<double>()};
    c.training_seed = h.at("training_seed").get<std::uint64_t>();
    c.epoch = h.at("epoch").get<int>();
    if (h.at("num_params").get<Eigen::Index>() != c.params.layout.num_params)
      throw CheckpointFormatError("checkpoint num_params disagrees with its layer widths");
    const auto& layers = h.at("layers");
    if (layers.size() != c.params.layout.layers.size()) throw CheckpointFormatError("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = c.params.layout.layers[i];
      if (layers[i].at("name").get<std::string>() != l.name || layers[i].at("in").get<int>() != l.in ||
          layers[i].at("out").get<int>() != l.out || layers[i].at("weight_offset").get<Eigen::Index>() != l.weight_offset ||
          layers[i].at("bias_offset").get<Eigen::Index>() != l.bias_offset)
        throw CheckpointFormatError("checkpoint layer descriptor mismatch at " + l.name);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint header is incomplete: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointFormatError(std::string("checkpoint header is invalid: ") + e.what());
  }

  const Eigen::Index n = c.params.layout.num_params;
  if (pos + n * sizeof(double) != bytes.size() - sizeof(std::uint32_t))
    throw CheckpointFormatError("checkpoint parameter payload has the wrong length");
  c.params.theta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.params.theta(i) = get<double>(bytes, pos);
  c.bounds.validate();
  return c;
}

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointFormatError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace atpg::checkpoint
