#include "bevcast/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

namespace bevcast {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw DataError(source + ":" + std::to_string(line) + ": " + msg);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void TrajectoryTable::validate() const {
  if (!(frame_rate_hz > 0.0)) throw DataError("table: frame rate must be positive");
  if (frame_stride < 1) throw DataError("table: frame stride must be positive");
  std::set<std::pair<std::int64_t, TrackId>> seen;
  for (const auto& r : rows) {
    if (r.frame < 0) throw DataError("table: negative frame " + std::to_string(r.frame));
    if (!seen.emplace(r.frame, r.id).second) {
      throw DataError("table: duplicate (frame " + std::to_string(r.frame) + ", id " +
                      r.id.str() + ")");
    }
  }
}

TrajectoryTable parse_csv(std::istream& in, const std::string& source, double default_rate_hz) {
  TrajectoryTable t;
  t.frame_rate_hz = default_rate_hz;
  std::string line;
  std::size_t line_no = 0;
  int col_frame = -1, col_id = -1, col_x = -1, col_y = -1, col_lane = -1;
  std::size_t n_cols = 0;
  bool have_header = false;
  std::set<std::pair<std::int64_t, TrackId>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      std::istringstream ss(text.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "frame_rate_hz") {
          if (!parse_number(val, t.frame_rate_hz) || !(t.frame_rate_hz > 0.0)) {
            fail(source, line_no, "invalid frame_rate_hz '" + val + "'");
          }
        } else if (key == "frame_stride") {
          if (!parse_number(val, t.frame_stride) || t.frame_stride < 1) {
            fail(source, line_no, "invalid frame_stride '" + val + "'");
          }
        }
      }
      continue;
    }
    const auto fields = split(text, ',');
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const int idx = static_cast<int>(i);
        if (fields[i] == "frame") col_frame = idx;
        else if (fields[i] == "id") col_id = idx;
        else if (fields[i] == "x") col_x = idx;
        else if (fields[i] == "y") col_y = idx;
        else if (fields[i] == "lane") col_lane = idx;
      }
      std::string missing;
      for (const auto& [name, col] : {std::pair{"frame", col_frame}, std::pair{"id", col_id},
                                      std::pair{"x", col_x}, std::pair{"y", col_y}}) {
        if (col < 0) missing += (missing.empty() ? "" : ", ") + std::string(name);
      }
      if (!missing.empty()) fail(source, line_no, "header lacks column(s): " + missing);
      n_cols = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols) {
      fail(source, line_no,
           "expected " + std::to_string(n_cols) + " fields, found " + std::to_string(fields.size()));
    }
    TrajectoryRow row;
    if (!parse_number(fields[col_frame], row.frame)) {
      fail(source, line_no, "non-integer frame '" + fields[col_frame] + "'");
    }
    if (row.frame < 0) fail(source, line_no, "negative frame");
    if (fields[col_id].empty()) fail(source, line_no, "empty id");
    row.id = TrackId(fields[col_id]);
    if (!parse_number(fields[col_x], row.x_m) || !std::isfinite(row.x_m)) {
      fail(source, line_no, "non-numeric x '" + fields[col_x] + "'");
    }
    if (!parse_number(fields[col_y], row.y_m) || !std::isfinite(row.y_m)) {
      fail(source, line_no, "non-numeric y '" + fields[col_y] + "'");
    }
    if (col_lane >= 0 && !fields[col_lane].empty()) {
      int lane = 0;
      if (!parse_number(fields[col_lane], lane)) {
        fail(source, line_no, "non-integer lane '" + fields[col_lane] + "'");
      }
      row.lane = lane;
    }
    if (!seen.emplace(row.frame, row.id).second) {
      fail(source, line_no,
           "duplicate (frame " + std::to_string(row.frame) + ", id " + row.id.str() + ")");
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) fail(source, line_no, "missing header");
  return t;
}

std::filesystem::path lanes_sidecar(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".lanes");
  return p;
}

TrajectoryTable load_csv(const std::filesystem::path& path, double default_rate_hz) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  TrajectoryTable t = parse_csv(in, path.string(), default_rate_hz);
  const auto side = lanes_sidecar(path);
  if (std::filesystem::exists(side)) {
    std::ifstream lin(side);
    if (!lin) throw DataError(side.string() + ": cannot open");
    t.lanes = parse_lanes(lin, side.string());
  }
  return t;
}

void write_csv(std::ostream& out, const TrajectoryTable& t) {
  out << "# frame_rate_hz=" << format_double(t.frame_rate_hz)
      << " frame_stride=" << t.frame_stride << '\n';
  const bool with_lane =
      std::any_of(t.rows.begin(), t.rows.end(), [](const auto& r) { return r.lane.has_value(); });
  out << (with_lane ? "frame,id,x,y,lane\n" : "frame,id,x,y\n");
  for (const auto& r : t.rows) {
    out << r.frame << ',' << r.id.str() << ',' << format_double(r.x_m) << ','
        << format_double(r.y_m);
    if (with_lane) {
      out << ',';
      if (r.lane) out << *r.lane;
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const TrajectoryTable& t) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write");
  write_csv(out, t);
  if (!out) throw DataError(path.string() + ": write failed");
  if (!t.lanes.empty()) {
    std::ofstream lout(lanes_sidecar(path));
    if (!lout) throw DataError(lanes_sidecar(path).string() + ": cannot write");
    write_lanes(lout, t.lanes);
  }
}

std::vector<Polyline> parse_lanes(std::istream& in, const std::string& source) {
  std::vector<Polyline> lanes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    std::istringstream ss(text);
    std::vector<double> values;
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      if (!parse_number(tok, v) || !std::isfinite(v)) {
        fail(source, line_no, "non-numeric coordinate '" + tok + "'");
      }
      values.push_back(v);
    }
    if (values.size() % 2 != 0 || values.size() < 4) {
      fail(source, line_no, "a polyline needs at least two x y pairs");
    }
    Polyline p;
    for (std::size_t i = 0; i < values.size(); i += 2) p.push_back({values[i], values[i + 1]});
    lanes.push_back(std::move(p));
  }
  return lanes;
}

void write_lanes(std::ostream& out, const std::vector<Polyline>& lanes) {
  for (const auto& p : lanes) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      out << (i ? " " : "") << format_double(p[i].x) << ' ' << format_double(p[i].y);
    }
    out << '\n';
  }
}

TrajectoryTable resample(const TrajectoryTable& t, int keep_every) {
  if (keep_every < 1) throw std::invalid_argument("resample: keep_every must be >= 1");
  TrajectoryTable out;
  out.frame_stride = t.frame_stride * keep_every;
  out.frame_rate_hz = t.frame_rate_hz / keep_every;
  out.lanes = t.lanes;
  for (const auto& r : t.rows) {
    if (r.frame % out.frame_stride == 0) out.rows.push_back(r);
  }
  return out;
}

std::vector<SceneWindow> slice_windows(const TrajectoryTable& t, const GridSpec& grid,
                                       int input_len, int output_len, int stride) {
  if (input_len < 1 || output_len < 1) {
    throw std::invalid_argument("slice: D and M must be >= 1");
  }
  if (stride < 1) throw std::invalid_argument("slice: stride must be >= 1");

  std::map<std::int64_t, Frame> by_frame;
  for (const auto& r : t.rows) {
    if (r.frame % t.frame_stride != 0) continue;
    by_frame[r.frame].push_back({r.id, r.x_m, r.y_m, t.time_of(r.frame)});
  }
  for (auto& [f, frame] : by_frame) {
    std::erase_if(frame, [&](const VehicleState& v) { return !grid.contains(v.position()); });
    std::sort(frame.begin(), frame.end(),
              [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
  }

  std::vector<SceneWindow> windows;
  if (by_frame.empty()) return windows;
  const std::int64_t first = by_frame.begin()->first;
  const std::int64_t last = by_frame.rbegin()->first;
  const std::int64_t len = input_len + output_len;
  const std::int64_t step = t.frame_stride;

  for (std::int64_t f0 = first; f0 + (len - 1) * step <= last; f0 += stride * step) {
    bool complete = true;
    for (std::int64_t k = 0; k < len && complete; ++k) {
      complete = by_frame.contains(f0 + k * step);
    }
    if (!complete) continue;
    std::vector<Frame> in;
    std::vector<Frame> out;
    for (std::int64_t k = 0; k < input_len; ++k) in.push_back(by_frame.at(f0 + k * step));
    std::set<TrackId> latest;
    for (const auto& v : in.back()) latest.insert(v.id);
    for (std::int64_t k = input_len; k < len; ++k) {
      Frame f = by_frame.at(f0 + k * step);
      std::erase_if(f, [&](const VehicleState& v) { return !latest.contains(v.id); });
      out.push_back(std::move(f));
    }
    const double anchor = t.time_of(f0 + (input_len - 1) * step);
    windows.emplace_back(std::move(in), std::move(out), t.lanes, anchor);
  }
  return windows;
}

}  // namespace bevcast
