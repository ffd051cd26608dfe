#include "bevcast/manifest.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bevcast {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<std::string> RunManifest::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const std::string& RunManifest::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw std::runtime_error("manifest: missing key '" + key + "'");
  return it->second;
}

RunManifest RunManifest::parse(std::istream& in, const std::string& source) {
  RunManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    m.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return parse(in, path.string());
}

void RunManifest::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

void RunManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  write(out);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace bevcast
