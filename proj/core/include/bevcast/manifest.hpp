#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace bevcast {

// Ordered key=value settings. Lines starting with '#' are comments.
class RunManifest {
 public:
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool contains(const std::string& key) const { return entries_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  // Throws std::runtime_error naming the key when absent.
  const std::string& require(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Throws std::runtime_error with the line number on malformed lines.
  static RunManifest parse(std::istream& in, const std::string& source);
  static RunManifest load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace bevcast
