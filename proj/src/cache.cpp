#include "msqa/cache.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"

namespace msqa {

CacheKey CacheKey::for_prompt(std::string question_id, std::string purpose, std::string backend_fingerprint,
                              std::string_view prompt) {
    return CacheKey{std::move(question_id), std::move(purpose), std::move(backend_fingerprint), sha256_hex(prompt)};
}

nlohmann::json CacheKey::to_json() const {
    return nlohmann::json{{"question_id", question_id},
                          {"purpose", purpose},
                          {"backend_fingerprint", backend_fingerprint},
                          {"prompt_hash", prompt_hash}};
}

std::string CacheKey::digest() const { return sha256_hex(to_json().dump()); }

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::path_for(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<nlohmann::json> ResponseCache::get(const CacheKey& key) const {
    const auto path = path_for(key.digest());
    std::shared_lock lock(mutex_);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ++misses_;
        return std::nullopt;
    }
    try {
        const auto entry = nlohmann::json::parse(in);
        if (entry.at("key") != key.to_json()) {
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        return entry.at("payload");
    } catch (const nlohmann::json::exception&) {
        ++misses_;
        return std::nullopt;
    }
}

void ResponseCache::put(const CacheKey& key, const nlohmann::json& payload) {
    const auto digest = key.digest();
    const auto path = path_for(digest);
    const nlohmann::json entry{{"key", key.to_json()}, {"payload", payload}};
    std::unique_lock lock(mutex_);
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write cache entry " + tmp);
        out << entry.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

GenerationOutcome cached_generate(const GenClient& client, ResponseCache* cache, std::string question_id,
                                  std::string purpose, std::string_view prompt, bool* from_cache) {
    if (from_cache) *from_cache = false;
    const auto key = CacheKey::for_prompt(std::move(question_id), std::move(purpose), client.backend().fingerprint(), prompt);
    if (cache != nullptr) {
        if (auto hit = cache->get(key)) {
            try {
                GenerationOutcome out;
                out.ok = true;
                out.text = hit->at("response").get<std::string>();
                out.latency_ms = hit->at("latency_ms").get<std::int64_t>();
                if (from_cache) *from_cache = true;
                return out;
            } catch (const nlohmann::json::exception&) {
                // fall through to a fresh call
            }
        }
    }
    auto out = client.generate(prompt);
    if (out.ok && cache != nullptr) cache->put(key, {{"response", out.text}, {"latency_ms", out.latency_ms}});
    return out;
}

}  // namespace msqa
