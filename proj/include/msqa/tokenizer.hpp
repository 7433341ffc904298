#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace msqa {

/// Splits text into tokens for length statistics and budgets.
///
/// Counts produced by different tokenizers are not comparable, so every
/// number derived from a tokenizer is reported together with its id().
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string_view id() const noexcept = 0;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
    virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

class WhitespaceTokenizer final : public Tokenizer {
public:
    std::string_view id() const noexcept override { return "whitespace"; }
    std::vector<std::string> tokenize(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
};

// Runs of word characters are tokens; every ASCII punctuation character is a
// token of its own. Bytes >= 0x80 are treated as word characters.
class WordPunctTokenizer final : public Tokenizer {
public:
    std::string_view id() const noexcept override { return "wordpunct"; }
    std::vector<std::string> tokenize(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
};

// Throws ValidationError on an unknown id.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id);

/// Lowercased word terms with ASCII punctuation acting as a separator.
/// Shared by the BM25 index and the lexical metrics.
std::vector<std::string> normalized_terms(std::string_view text);

inline bool is_word_byte(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c >= 0x80;
}

inline bool is_space_byte(unsigned char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace msqa
