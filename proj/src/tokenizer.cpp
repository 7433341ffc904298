#include "msqa/tokenizer.hpp"

#include "msqa/errors.hpp"

namespace msqa {

namespace {

template <typename Emit>
void scan_whitespace(std::string_view text, Emit&& emit) {
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) emit(text.substr(start, i - start));
    }
}

template <typename Emit>
void scan_word_punct(std::string_view text, Emit&& emit) {
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t start = i;
            while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
            emit(text.substr(start, i - start));
        } else {
            emit(text.substr(i, 1));
            ++i;
        }
    }
}

}  // namespace

std::vector<std::string> WhitespaceTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> out;
    scan_whitespace(text, [&](std::string_view t) { out.emplace_back(t); });
    return out;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    scan_whitespace(text, [&](std::string_view) { ++n; });
    return n;
}

std::vector<std::string> WordPunctTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> out;
    scan_word_punct(text, [&](std::string_view t) { out.emplace_back(t); });
    return out;
}

std::size_t WordPunctTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    scan_word_punct(text, [&](std::string_view) { ++n; });
    return n;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id) {
    if (id == "whitespace") return std::make_unique<WhitespaceTokenizer>();
    if (id == "wordpunct") return std::make_unique<WordPunctTokenizer>();
    throw ValidationError("unknown tokenizer id '" + std::string(id) + "'");
}

std::vector<std::string> normalized_terms(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back(c < 0x80 && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

}  // namespace msqa
