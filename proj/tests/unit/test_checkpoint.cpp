#include <sstream>

#include <gtest/gtest.h>

#include "bevcast/checkpoint.hpp"

using namespace bevcast;

namespace {

UNetConfig small_config() {
  UNetConfig cfg;
  cfg.depth_levels = 3;
  cfg.base_features = 4;
  cfg.in_channels = 5;
  cfg.out_channels = 6;
  cfg.terminal = Terminal::clipped_relu;
  cfg.clip_hi = 0.75;
  return cfg;
}

std::string serialized(const UNetModel<float>& m) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(os, m);
  return os.str();
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  const auto m = UNetModel<float>::build(small_config(), 12);
  std::istringstream is(serialized(m), std::ios::binary);
  const auto back = read_checkpoint(is);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_TRUE(std::equal(m.parameters().begin(), m.parameters().end(), back.parameters().begin()));
}

TEST(Checkpoint, HeaderLayout) {
  const auto m = UNetModel<float>::build(small_config(), 12);
  const std::string bytes = serialized(m);
  EXPECT_EQ(bytes.substr(0, 4), "BEVC");
  const std::size_t header = 4 + 4 + 4 * 4 + 4 + 8 + 8;
  EXPECT_EQ(bytes.size(), header + 4 * static_cast<std::size_t>(param_count(small_config())));
}

TEST(Checkpoint, RejectsCorruption) {
  const auto m = UNetModel<float>::build(small_config(), 12);
  const std::string good = serialized(m);
  auto fails = [](std::string bytes) {
    std::istringstream is(bytes, std::ios::binary);
    EXPECT_THROW(read_checkpoint(is), std::runtime_error);
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  fails(bad_magic);
  std::string bad_version = good;
  bad_version[4] = 9;
  fails(bad_version);
  fails(good.substr(0, good.size() - 3));
  fails(good + "extra");
  std::string bad_depth = good;
  bad_depth[8] = 1;  // depth 1 is not a valid configuration
  fails(bad_depth);
  std::string bad_count = good;
  bad_count[4 + 4 + 16 + 4 + 8] ^= 1;
  fails(bad_count);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "bevcast_ckpt_test.bin";
  const auto m = UNetModel<float>::build(small_config(), 3);
  save_checkpoint(path, m);
  const auto back = load_checkpoint(path);
  EXPECT_TRUE(std::equal(m.parameters().begin(), m.parameters().end(), back.parameters().begin()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}
