#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace msqa {

class ResponseCache;

enum class Granularity { sentence, token };

std::string_view to_string(Granularity g) noexcept;

using Vector = std::vector<double>;

struct TokenEmbedding {
    std::vector<std::string> tokens;
    std::vector<Vector> vectors;  // one per token
};

/// Source of sentence- and token-level vectors. Implementations throw
/// TransientBackendError or ProtocolError on failure.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) = 0;
    virtual std::vector<TokenEmbedding> embed_tokens(const std::vector<std::string>& texts) = 0;
};

/// Request body of the embedding wire contract.
nlohmann::json make_embed_request(const std::vector<std::string>& texts, Granularity granularity);
/// Validates and decodes a reply: dimension > 0, one entry per text, every
/// vector of the declared dimension, token strings aligned with vectors.
std::vector<Vector> parse_sentence_reply(std::string_view body, std::size_t expected_texts);
std::vector<TokenEmbedding> parse_token_reply(std::string_view body, std::size_t expected_texts);

/// Client of an embedding service (POST {texts, granularity}). Vectors are
/// memoized per text and, when a cache is given, persisted in it.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(std::string url, std::chrono::milliseconds timeout = std::chrono::milliseconds(60000),
                                   ResponseCache* cache = nullptr, std::size_t batch_size = 32, std::string auth_env = {});

    std::string id() const override { return "http:" + url_; }
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override;
    std::vector<TokenEmbedding> embed_tokens(const std::vector<std::string>& texts) override;
    std::size_t requests() const noexcept { return requests_; }

private:
    std::string post(const std::vector<std::string>& texts, Granularity granularity);

    std::string url_;
    std::string auth_env_;  // names the variable holding the shared token, if any
    std::chrono::milliseconds timeout_;
    ResponseCache* cache_;
    std::size_t batch_size_;
    std::size_t requests_ = 0;
    std::mutex mutex_;
    std::map<std::string, Vector> sentence_memo_;
    std::map<std::string, TokenEmbedding> token_memo_;
};

/// Deterministic offline provider: each normalized term gets a pseudo-random
/// vector derived from its hash; a sentence vector is the sum of its term
/// vectors.
class HashedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashedEmbeddingProvider(std::size_t dimension = 64);

    std::string id() const override { return "hashed-" + std::to_string(dimension_); }
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override;
    std::vector<TokenEmbedding> embed_tokens(const std::vector<std::string>& texts) override;

    Vector term_vector(std::string_view term) const;

private:
    std::size_t dimension_;
};

/// One-hot vector per vocabulary term; sentence vectors are term counts.
/// Throws ValidationError for a term outside the vocabulary.
class OneHotEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit OneHotEmbeddingProvider(const std::vector<std::string>& vocabulary);

    std::string id() const override { return "onehot-" + std::to_string(index_.size()); }
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override;
    std::vector<TokenEmbedding> embed_tokens(const std::vector<std::string>& texts) override;

private:
    std::size_t slot(const std::string& term) const;

    std::map<std::string, std::size_t> index_;
};

/// Raw cosine of two vectors; 0 if either has zero norm. Shorter vectors are
/// treated as zero-padded.
double raw_cosine(const Vector& a, const Vector& b);

}  // namespace msqa
