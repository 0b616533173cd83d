#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peak/error.hpp"

namespace peak {

struct TaggerConfig {
  std::string endpoint;  // e.g. "https://api.example.com/v2/tag"
  std::string auth_env = "PEAK_TAGGER_TOKEN";
  std::size_t tags_per_image = 20;
  std::size_t max_in_flight = 4;
  std::size_t attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after each failure
  std::chrono::seconds timeout{30};
};

class AuthError : public IoError {
 public:
  using IoError::IoError;
};

class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<std::string> fetch_tags(const std::string& image_ref) = 0;
};

// POSTs {"image": ref} with a bearer token read from the configured
// environment variable. Transient failures (transport errors, 429, 5xx) are
// retried; 401 and 403 fail at once.
class HttpTagger : public Tagger {
 public:
  explicit HttpTagger(TaggerConfig config);
  std::vector<std::string> fetch_tags(const std::string& image_ref) override;

 private:
  TaggerConfig config_;
  std::string base_;
  std::string path_;
};

// Accepts {"concepts": [...]} or {"outputs": [{"data": {"concepts": [...]}}]},
// where each concept is {"name": str, "value": number}. Returns names by
// descending value, normalized, truncated to `limit`.
std::vector<std::string> parse_concepts(std::string_view body, std::size_t limit);

// Runs fetch_tags over `refs` with at most `max_in_flight` concurrent calls.
// Results keep input order. The first failing ref (by position) is rethrown.
std::vector<std::vector<std::string>> fetch_all(Tagger& tagger,
                                                std::span<const std::string> refs,
                                                std::size_t max_in_flight);

}  // namespace peak
