#include "peak/tagger.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <optional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "peak/corpus.hpp"

namespace peak {

namespace {

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpTagger::HttpTagger(TaggerConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw UsageError("tagger endpoint is not configured");
  if (config_.attempts == 0) throw UsageError("tagger attempts must be at least 1");
  const auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) throw UsageError("tagger endpoint needs a scheme: " + config_.endpoint);
  const auto slash = config_.endpoint.find('/', scheme + 3);
  base_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
}

std::vector<std::string> HttpTagger::fetch_tags(const std::string& image_ref) {
  const char* token = std::getenv(config_.auth_env.c_str());
  if (token == nullptr || *token == '\0')
    throw AuthError("environment variable " + config_.auth_env + " is not set");

  httplib::Client client(base_);
  if (!client.is_valid()) throw UsageError("unsupported tagger endpoint: " + base_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + token}};
  const std::string body = nlohmann::json{{"image", image_ref}}.dump();

  std::string last_failure;
  auto delay = config_.backoff;
  for (std::size_t attempt = 1; attempt <= config_.attempts; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    if (res) {
      if (res->status == 401 || res->status == 403)
        throw AuthError("tagger rejected the credentials in " + config_.auth_env + " (HTTP " +
                        std::to_string(res->status) + ")");
      if (res->status >= 200 && res->status < 300)
        return parse_concepts(res->body, config_.tags_per_image);
      last_failure = "HTTP " + std::to_string(res->status);
      if (!transient(res->status)) break;
    } else {
      last_failure = httplib::to_string(res.error());
    }
    if (attempt < config_.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw IoError("tagger request for \"" + image_ref + "\" failed: " + last_failure);
}

std::vector<std::string> parse_concepts(std::string_view body, std::size_t limit) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("malformed tagger response: not a JSON object");
  const nlohmann::json* concepts = nullptr;
  if (j.contains("concepts")) {
    concepts = &j["concepts"];
  } else if (j.contains("outputs") && j["outputs"].is_array() && !j["outputs"].empty()) {
    const auto& first = j["outputs"][0];
    if (first.is_object() && first.contains("data") && first["data"].is_object() &&
        first["data"].contains("concepts"))
      concepts = &first["data"]["concepts"];
  }
  if (concepts == nullptr || !concepts->is_array())
    throw DataError("malformed tagger response: no concepts array");

  std::vector<std::pair<double, std::string>> scored;
  for (const auto& c : *concepts) {
    if (!c.is_object() || !c.contains("name") || !c["name"].is_string() || !c.contains("value") ||
        !c["value"].is_number())
      throw DataError("malformed tagger response: concept needs a name and a numeric value");
    std::string tag = normalize_tag(c["name"].get<std::string>());
    if (!tag.empty()) scored.emplace_back(c["value"].get<double>(), std::move(tag));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (scored.size() > limit) scored.resize(limit);
  std::vector<std::string> tags;
  tags.reserve(scored.size());
  for (auto& [v, t] : scored) tags.push_back(std::move(t));
  return tags;
}

std::vector<std::vector<std::string>> fetch_all(Tagger& tagger,
                                                std::span<const std::string> refs,
                                                std::size_t max_in_flight) {
  std::vector<std::vector<std::string>> out(refs.size());
  std::vector<std::exception_ptr> errors(refs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < refs.size(); i = next++) {
      try {
        out[i] = tagger.fetch_tags(refs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(max_in_flight, 1), refs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace peak
