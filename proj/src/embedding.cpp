#include "msqa/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "msqa/cache.hpp"
#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"
#include "msqa/http.hpp"
#include "msqa/tokenizer.hpp"

namespace msqa {

namespace {

Vector parse_vector(const nlohmann::json& j, std::size_t dimension) {
    if (!j.is_array() || j.size() != dimension) throw ProtocolError("embedding vector does not match the declared dimension");
    Vector v;
    v.reserve(dimension);
    for (const auto& x : j) {
        if (!x.is_number()) throw ProtocolError("embedding vector holds a non-number");
        v.push_back(x.get<double>());
    }
    return v;
}

nlohmann::json parse_reply(std::string_view body, std::size_t expected_texts, std::size_t& dimension) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError("embedding reply is not JSON");
    }
    if (!j.is_object() || !j.contains("dimension") || !j["dimension"].is_number_integer() || j["dimension"].get<long long>() <= 0)
        throw ProtocolError("embedding reply needs a positive integer 'dimension'");
    dimension = j["dimension"].get<std::size_t>();
    if (!j.contains("vectors") || !j["vectors"].is_array() || j["vectors"].size() != expected_texts)
        throw ProtocolError("embedding reply must hold one 'vectors' entry per text");
    return j;
}

}  // namespace

std::string_view to_string(Granularity g) noexcept { return g == Granularity::sentence ? "sentence" : "token"; }

nlohmann::json make_embed_request(const std::vector<std::string>& texts, Granularity granularity) {
    return nlohmann::json{{"texts", texts}, {"granularity", std::string(to_string(granularity))}};
}

std::vector<Vector> parse_sentence_reply(std::string_view body, std::size_t expected_texts) {
    std::size_t dim = 0;
    const auto j = parse_reply(body, expected_texts, dim);
    std::vector<Vector> out;
    for (const auto& v : j["vectors"]) out.push_back(parse_vector(v, dim));
    return out;
}

std::vector<TokenEmbedding> parse_token_reply(std::string_view body, std::size_t expected_texts) {
    std::size_t dim = 0;
    const auto j = parse_reply(body, expected_texts, dim);
    if (!j.contains("tokens") || !j["tokens"].is_array() || j["tokens"].size() != expected_texts)
        throw ProtocolError("token embedding reply must hold one 'tokens' entry per text");
    std::vector<TokenEmbedding> out(expected_texts);
    for (std::size_t i = 0; i < expected_texts; ++i) {
        const auto& vecs = j["vectors"][i];
        const auto& toks = j["tokens"][i];
        if (!vecs.is_array() || !toks.is_array() || vecs.size() != toks.size())
            throw ProtocolError("token strings and vectors are misaligned for text " + std::to_string(i));
        for (std::size_t t = 0; t < vecs.size(); ++t) {
            if (!toks[t].is_string()) throw ProtocolError("token entry is not a string");
            out[i].tokens.push_back(toks[t].get<std::string>());
            out[i].vectors.push_back(parse_vector(vecs[t], dim));
        }
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::chrono::milliseconds timeout, ResponseCache* cache,
                                             std::size_t batch_size, std::string auth_env)
    : url_(std::move(url)), auth_env_(std::move(auth_env)), timeout_(timeout), cache_(cache), batch_size_(batch_size == 0 ? 1 : batch_size) {
    http::parse_url(url_);
}

std::string HttpEmbeddingProvider::post(const std::vector<std::string>& texts, Granularity granularity) {
    ++requests_;
    std::map<std::string, std::string> headers;
    if (!auth_env_.empty()) {
        if (const char* token = std::getenv(auth_env_.c_str())) headers["Authorization"] = std::string("Bearer ") + token;
    }
    const auto res = http::post_json(url_, make_embed_request(texts, granularity).dump(), headers, timeout_);
    if (res.status == 429 || res.status >= 500) throw TransientBackendError("embedding service returned HTTP " + std::to_string(res.status));
    if (res.status != 200) throw BackendError("embedding service returned HTTP " + std::to_string(res.status) + ": " + res.body);
    return res.body;
}

std::vector<Vector> HttpEmbeddingProvider::embed_sentences(const std::vector<std::string>& texts) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> todo;
    for (const auto& t : texts) {
        if (sentence_memo_.count(t)) continue;
        if (cache_) {
            if (auto hit = cache_->get(CacheKey::for_prompt("", "EMBED_SENTENCE", id(), t))) {
                sentence_memo_[t] = hit->get<Vector>();
                continue;
            }
        }
        if (std::find(todo.begin(), todo.end(), t) == todo.end()) todo.push_back(t);
    }
    for (std::size_t i = 0; i < todo.size(); i += batch_size_) {
        const std::vector<std::string> batch(todo.begin() + static_cast<std::ptrdiff_t>(i),
                                             todo.begin() + static_cast<std::ptrdiff_t>(std::min(todo.size(), i + batch_size_)));
        const auto vecs = parse_sentence_reply(post(batch, Granularity::sentence), batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
            sentence_memo_[batch[k]] = vecs[k];
            if (cache_) cache_->put(CacheKey::for_prompt("", "EMBED_SENTENCE", id(), batch[k]), vecs[k]);
        }
    }
    std::vector<Vector> out;
    for (const auto& t : texts) out.push_back(sentence_memo_.at(t));
    return out;
}

std::vector<TokenEmbedding> HttpEmbeddingProvider::embed_tokens(const std::vector<std::string>& texts) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> todo;
    for (const auto& t : texts) {
        if (token_memo_.count(t)) continue;
        if (cache_) {
            if (auto hit = cache_->get(CacheKey::for_prompt("", "EMBED_TOKEN", id(), t))) {
                token_memo_[t] = TokenEmbedding{hit->at("tokens").get<std::vector<std::string>>(), hit->at("vectors").get<std::vector<Vector>>()};
                continue;
            }
        }
        if (std::find(todo.begin(), todo.end(), t) == todo.end()) todo.push_back(t);
    }
    for (std::size_t i = 0; i < todo.size(); i += batch_size_) {
        const std::vector<std::string> batch(todo.begin() + static_cast<std::ptrdiff_t>(i),
                                             todo.begin() + static_cast<std::ptrdiff_t>(std::min(todo.size(), i + batch_size_)));
        auto embs = parse_token_reply(post(batch, Granularity::token), batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
            if (cache_)
                cache_->put(CacheKey::for_prompt("", "EMBED_TOKEN", id(), batch[k]), {{"tokens", embs[k].tokens}, {"vectors", embs[k].vectors}});
            token_memo_[batch[k]] = std::move(embs[k]);
        }
    }
    std::vector<TokenEmbedding> out;
    for (const auto& t : texts) out.push_back(token_memo_.at(t));
    return out;
}

HashedEmbeddingProvider::HashedEmbeddingProvider(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

Vector HashedEmbeddingProvider::term_vector(std::string_view term) const {
    const std::uint64_t seed = fnv1a64(term);
    Vector v(dimension_);
    for (std::size_t d = 0; d < dimension_; ++d) {
        const std::uint64_t x = splitmix64(seed + d);
        v[d] = static_cast<double>(x >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
    return v;
}

std::vector<Vector> HashedEmbeddingProvider::embed_sentences(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    for (const auto& text : texts) {
        Vector sum(dimension_, 0.0);
        for (const auto& term : normalized_terms(text)) {
            const auto v = term_vector(term);
            for (std::size_t d = 0; d < dimension_; ++d) sum[d] += v[d];
        }
        out.push_back(std::move(sum));
    }
    return out;
}

std::vector<TokenEmbedding> HashedEmbeddingProvider::embed_tokens(const std::vector<std::string>& texts) {
    std::vector<TokenEmbedding> out;
    for (const auto& text : texts) {
        TokenEmbedding e;
        e.tokens = normalized_terms(text);
        for (const auto& term : e.tokens) e.vectors.push_back(term_vector(term));
        out.push_back(std::move(e));
    }
    return out;
}

OneHotEmbeddingProvider::OneHotEmbeddingProvider(const std::vector<std::string>& vocabulary) {
    for (const auto& term : vocabulary) index_.emplace(term, index_.size());
    if (index_.empty()) throw ValidationError("one-hot vocabulary is empty");
}

std::size_t OneHotEmbeddingProvider::slot(const std::string& term) const {
    const auto it = index_.find(term);
    if (it == index_.end()) throw ValidationError("term '" + term + "' is outside the one-hot vocabulary");
    return it->second;
}

std::vector<Vector> OneHotEmbeddingProvider::embed_sentences(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    for (const auto& text : texts) {
        Vector v(index_.size(), 0.0);
        for (const auto& term : normalized_terms(text)) v[slot(term)] += 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<TokenEmbedding> OneHotEmbeddingProvider::embed_tokens(const std::vector<std::string>& texts) {
    std::vector<TokenEmbedding> out;
    for (const auto& text : texts) {
        TokenEmbedding e;
        e.tokens = normalized_terms(text);
        for (const auto& term : e.tokens) {
            Vector v(index_.size(), 0.0);
            v[slot(term)] = 1.0;
            e.vectors.push_back(std::move(v));
        }
        out.push_back(std::move(e));
    }
    return out;
}

double raw_cosine(const Vector& a, const Vector& b) {
    const std::size_t n = std::min(a.size(), b.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += a[i] * b[i];
    double na = 0.0;
    double nb = 0.0;
    for (double x : a) na += x * x;
    for (double x : b) nb += x * x;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace msqa
