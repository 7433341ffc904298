#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace msqa {

/// A bounded fragment of a documentation page.
struct Chunk {
    std::string chunk_id;
    std::string doc_path;
    std::vector<std::string> heading_trail;
    std::string body;
    std::size_t token_count = 0;  // whitespace tokens in body

    bool operator==(const Chunk&) const = default;
};

struct MarkdownDoc {
    std::string path;
    std::string text;
};

struct ChunkOptions {
    std::size_t target_tokens = 512;
    std::size_t overlap_tokens = 64;
};

struct Chunking {
    std::vector<Chunk> chunks;
    std::vector<std::string> warnings;
};

/// Splits each document at ATX heading boundaries, then cuts every section
/// into windows of at most target_tokens whitespace tokens, consecutive
/// windows sharing overlap_tokens. A fenced code block is never split; one
/// larger than the target becomes a chunk of its own and a warning is logged.
/// Throws ValidationError unless target_tokens > overlap_tokens.
Chunking chunk_docs(std::span<const MarkdownDoc> docs, const ChunkOptions& options = {});

/// All *.md / *.markdown files below root, ordered by relative path.
std::vector<MarkdownDoc> load_markdown_tree(const std::filesystem::path& root);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::string chunk_id;
    std::uint32_t term_frequency = 0;

    bool operator==(const Posting&) const = default;
};

struct SearchHit {
    std::string chunk_id;
    double score = 0.0;

    bool operator==(const SearchHit&) const = default;
};

/// Okapi BM25 over normalized_terms() of the chunk bodies. Immutable once
/// built; concurrent searches are safe.
class Bm25Index {
public:
    /// Throws ValidationError for an empty chunk list, duplicate chunk ids,
    /// k1 <= 0 or b outside [0, 1].
    static Bm25Index build(std::span<const Chunk> chunks, Bm25Params params = {});

    /// Top-k chunks by descending score, ties broken by ascending chunk id.
    /// score = sum over query terms t (repeats included) of
    ///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))
    /// with idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
    std::vector<SearchHit> search(std::string_view query, std::size_t k = 3) const;

    double idf(std::string_view term) const;

    const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }
    const std::map<std::string, std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
    const Bm25Params& params() const noexcept { return params_; }

    nlohmann::json to_json() const;
    static Bm25Index from_json(const nlohmann::json& j);

private:
    std::map<std::string, std::vector<Posting>> postings_;
    std::map<std::string, std::size_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

inline constexpr int kIndexFormatVersion = 1;

/// Chunks plus their index, persisted together as one JSON document carrying
/// a format_version field.
struct RetrievalStore {
    std::vector<Chunk> chunks;
    Bm25Index index;
    ChunkOptions chunking;

    const Chunk& chunk(std::string_view chunk_id) const;
};

RetrievalStore build_store(std::span<const MarkdownDoc> docs, const ChunkOptions& chunking, Bm25Params params,
                           std::vector<std::string>* warnings = nullptr);
std::string serialize_store(const RetrievalStore& store);
RetrievalStore deserialize_store(std::string_view text);
void save_store(const std::filesystem::path& path, const RetrievalStore& store);
RetrievalStore load_store(const std::filesystem::path& path);

}  // namespace msqa
