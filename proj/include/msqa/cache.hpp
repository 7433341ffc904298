#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "msqa/backend.hpp"

namespace msqa {

/// Everything a cached backend response depends on. `purpose` names the
/// call site, e.g. a strategy name, "EXPERT_OPINION" or "JUDGE_REPHRASE".
struct CacheKey {
    std::string question_id;
    std::string purpose;
    std::string backend_fingerprint;
    std::string prompt_hash;

    static CacheKey for_prompt(std::string question_id, std::string purpose, std::string backend_fingerprint,
                               std::string_view prompt);
    std::string digest() const;
    nlohmann::json to_json() const;
    bool operator==(const CacheKey&) const = default;
};

/// Content-addressed store of JSON payloads under <dir>/<aa>/<digest>.json.
/// A lookup succeeds only when the stored key matches field for field.
/// Concurrent readers are allowed; writes are serialized and atomic.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<nlohmann::json> get(const CacheKey& key) const;
    void put(const CacheKey& key, const nlohmann::json& payload);

    std::size_t hits() const noexcept { return hits_.load(); }
    std::size_t misses() const noexcept { return misses_.load(); }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(const std::string& digest) const;

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

/// Serves (question_id, purpose, backend fingerprint, prompt) from the cache
/// when present; otherwise calls the backend and stores successful results
/// as {response, latency_ms}. A null cache always calls the backend.
GenerationOutcome cached_generate(const GenClient& client, ResponseCache* cache, std::string question_id,
                                  std::string purpose, std::string_view prompt, bool* from_cache = nullptr);

}  // namespace msqa
