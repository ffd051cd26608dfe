#include "cli_support.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bevcast::cli {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void echo_options(const CLI::App& app, RunManifest& m) {
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (i > 0) value += ",";
        value += results[i];
      }
    } else {
      value = opt->get_default_str();
    }
    m.set("cli." + name, value);
  }
  if (const CLI::App* parent = app.get_parent()) {
    const CLI::Option* cfg = parent->get_config_ptr();
    if (cfg && cfg->count() > 0) m.set("config", cfg->results().front());
  }
}

LoadedData load_windows(const std::vector<std::string>& files, int keep_every,
                        const GridSpec& grid, int input_len, int output_len, int stride) {
  if (files.empty()) throw UsageError("no data files given");
  if (stride < 1) throw UsageError("--stride must be at least 1");
  LoadedData out;
  bool first = true;
  for (const auto& f : files) {
    auto table = resample(load_csv(f), keep_every);
    if (first) {
      out.dt = table.dt();
      first = false;
    } else if (std::abs(table.dt() - out.dt) > 1e-12) {
      throw UsageError(f + ": sample interval " + format_number(table.dt()) +
                       " s differs from " + format_number(out.dt) + " s");
    }
    auto w = slice_windows(table, grid, input_len, output_len, stride);
    out.windows.insert(out.windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
  }
  if (out.windows.empty()) throw UsageError("data yields no complete windows");
  return out;
}

namespace {

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V take(std::istream& is, const std::string& source) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw std::runtime_error(source + ": truncated block file");
  }
  return v;
}

void put_frames(std::ostream& os, const BevBlock& block) {
  std::vector<float> buf;
  for (const auto& f : block.frames()) {
    buf.assign(f.pixels().begin(), f.pixels().end());
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

BevBlock take_frames(std::istream& is, std::uint32_t n, const GridSpec& g,
                     const std::string& source) {
  std::vector<BevImage> frames;
  const auto count = static_cast<std::size_t>(g.height_px()) * static_cast<std::size_t>(g.width_px());
  std::vector<float> buf(count);
  for (std::uint32_t k = 0; k < n; ++k) {
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(count * sizeof(float)))) {
      throw std::runtime_error(source + ": truncated block file");
    }
    frames.emplace_back(g, std::vector<double>(buf.begin(), buf.end()));
  }
  return BevBlock(std::move(frames));
}

}  // namespace

void write_block_file(const std::filesystem::path& path, const EncodedWindow& enc,
                      double anchor_time) {
  if (enc.input.size() == 0 || enc.target.size() == 0) {
    throw std::invalid_argument("block file: empty block");
  }
  const GridSpec& g = enc.input[0].grid();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os.write("BEVB", 4);
  put(os, kBlockVersion);
  put(os, static_cast<std::uint32_t>(enc.input.size()));
  put(os, static_cast<std::uint32_t>(enc.target.size()));
  put(os, static_cast<std::int32_t>(g.height_px()));
  put(os, static_cast<std::int32_t>(g.width_px()));
  put(os, g.ppm_x());
  put(os, g.ppm_y());
  put(os, g.x_range_m());
  put(os, g.y_half_range_m());
  put(os, anchor_time);
  put_frames(os, enc.input);
  put_frames(os, enc.target);
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

EncodedWindow read_block_file(const std::filesystem::path& path, double* anchor_time) {
  const std::string source = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(source + ": cannot open");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "BEVB", 4) != 0) {
    throw std::runtime_error(source + ": not a block file");
  }
  if (take<std::uint32_t>(is, source) != kBlockVersion) {
    throw std::runtime_error(source + ": unsupported block file version");
  }
  const auto n_in = take<std::uint32_t>(is, source);
  const auto n_out = take<std::uint32_t>(is, source);
  const auto rows = take<std::int32_t>(is, source);
  const auto cols = take<std::int32_t>(is, source);
  const auto ppm_x = take<double>(is, source);
  const auto ppm_y = take<double>(is, source);
  const auto x_range = take<double>(is, source);
  const auto y_half = take<double>(is, source);
  const auto t = take<double>(is, source);
  const auto g = GridSpec::from_extent(ppm_x, ppm_y, x_range, y_half);
  if (g.height_px() != rows || g.width_px() != cols) {
    throw std::runtime_error(source + ": grid header is inconsistent");
  }
  EncodedWindow enc;
  enc.input = take_frames(is, n_in, g, source);
  enc.target = take_frames(is, n_out, g, source);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(source + ": trailing bytes after frames");
  }
  if (anchor_time) *anchor_time = t;
  return enc;
}

GrayImage contact_sheet(const BevBlock& input, const BevBlock& target) {
  std::vector<GrayImage> tiles;
  for (const auto& f : input.frames()) tiles.push_back(to_gray(f));
  for (const auto& f : target.frames()) tiles.push_back(to_gray(f));
  return tile_horizontal(tiles);
}

std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix) {
  return std::filesystem::path(path.string() + suffix);
}

}  // namespace bevcast::cli
