#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

#include "coordnet/ingest.hpp"

namespace coordnet::testing {

inline Timestamp at_minute(long minute) {
  return Timestamp{std::chrono::seconds{1573516800 + 60 * minute}};
}

inline PostRecord make_post(std::string id, std::string author, long minute, PostKind kind, std::string text = "text",
                            std::optional<std::string> ref_post = std::nullopt,
                            std::optional<std::string> ref_author = std::nullopt) {
  PostRecord p;
  p.post_id = std::move(id);
  p.author_id = std::move(author);
  p.created_at = at_minute(minute);
  p.kind = kind;
  p.text = std::move(text);
  p.hashtags = extract_hashtags(p.text);
  p.referenced_post_id = std::move(ref_post);
  p.referenced_author_id = std::move(ref_author);
  return p;
}

inline PostRecord original(std::string id, std::string author, long minute, std::string text = "text") {
  return make_post(std::move(id), std::move(author), minute, PostKind::original, std::move(text));
}

inline PostRecord retweet(std::string id, std::string author, long minute, std::string ref,
                          std::optional<std::string> ref_author = std::nullopt) {
  return make_post(std::move(id), std::move(author), minute, PostKind::retweet, "RT", std::move(ref),
                   std::move(ref_author));
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("coordnet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace coordnet::testing
