#include "bevcast/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace bevcast {

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'E', 'V', 'C'};

template <typename U>
void put_le(std::ostream& os, U value) {
  std::array<unsigned char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), sizeof(U));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(U))) {
    throw std::runtime_error("checkpoint: truncated header");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& os, const UNetModel<float>& model) {
  const auto& cfg = model.config();
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::int32_t>(os, cfg.depth_levels);
  put_le<std::int32_t>(os, cfg.base_features);
  put_le<std::int32_t>(os, cfg.in_channels);
  put_le<std::int32_t>(os, cfg.out_channels);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.terminal));
  put_le<double>(os, cfg.clip_hi);
  put_le<std::uint64_t>(os, model.parameter_count());
  for (const float v : model.parameters()) put_le<float>(os, v);
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

UNetModel<float> read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (is.gcount() != 4 || magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  UNetConfig cfg;
  cfg.depth_levels = get_le<std::int32_t>(is);
  cfg.base_features = get_le<std::int32_t>(is);
  cfg.in_channels = get_le<std::int32_t>(is);
  cfg.out_channels = get_le<std::int32_t>(is);
  const auto terminal = get_le<std::uint32_t>(is);
  if (terminal > static_cast<std::uint32_t>(Terminal::clipped_relu)) {
    throw std::runtime_error("checkpoint: unknown terminal layer");
  }
  cfg.terminal = static_cast<Terminal>(terminal);
  cfg.clip_hi = get_le<double>(is);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  const auto count = get_le<std::uint64_t>(is);
  const auto expected = static_cast<std::uint64_t>(param_count(cfg));
  if (count != expected) {
    throw std::runtime_error("checkpoint: header declares " + std::to_string(count) +
                             " parameters, configuration implies " + std::to_string(expected));
  }
  std::vector<float> params(count);
  for (auto& v : params) {
    try {
      v = get_le<float>(is);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("checkpoint: payload shorter than the declared parameter count");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint: trailing bytes after the parameter payload");
  }
  return UNetModel<float>::from_parameters(cfg, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const UNetModel<float>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, model);
}

UNetModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace bevcast
