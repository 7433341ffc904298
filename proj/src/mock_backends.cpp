#include "msqa/mock_backends.hpp"

#include "msqa/hashing.hpp"
#include "msqa/metrics.hpp"

namespace msqa::mock {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string first_words(std::string_view text, std::size_t n) {
    std::string out;
    std::size_t i = 0;
    std::size_t taken = 0;
    while (i < text.size() && taken < n) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
        const auto start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\n' && text[i] != '\t') ++i;
        if (start == i) break;
        if (!out.empty()) out += ' ';
        out.append(text.substr(start, i - start));
        ++taken;
    }
    return out;
}

const std::string& prompt_of(const std::vector<ChatMessage>& messages) {
    static const std::string empty;
    return messages.empty() ? empty : messages.back().content;
}

}  // namespace

std::optional<std::string> section(std::string_view prompt, std::string_view open, std::string_view close) {
    const auto b = prompt.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    const auto start = b + open.size();
    if (close.empty()) return std::string(prompt.substr(start));
    const auto e = prompt.find(close, start);
    if (e == std::string_view::npos) return std::nullopt;
    return std::string(prompt.substr(start, e - start));
}

MockChatTransport::Handler expert_handler(std::map<std::string, std::string> opinions) {
    return [opinions = std::move(opinions)](const std::vector<ChatMessage>& messages) {
        const auto question = trim(section(prompt_of(messages), "\nInput: ", "\nResponse:").value_or(""));
        const auto it = opinions.find(question);
        if (it != opinions.end()) return it->second;
        return std::string("Check the product documentation for the setting involved and review the activity log.");
    };
}

MockChatTransport::Handler llm_handler() {
    return [](const std::vector<ChatMessage>& messages) {
        const auto& prompt = prompt_of(messages);
        const auto question = trim(section(prompt, "Question:\n", "").value_or(prompt));
        const auto opinion = section(prompt, "Expert opinion:\n", "\n\n");
        auto chunk = section(prompt, "Reference chunks:\n[1] ", "\n[2] ");
        if (!chunk) chunk = section(prompt, "Reference chunks:\n[1] ", "\n\n");
        if (opinion && chunk) return trim(*opinion) + " " + first_words(*chunk, 25);
        if (opinion) return "Based on experience with this product: " + trim(*opinion);
        if (chunk) return "According to the documentation, " + first_words(*chunk, 40);
        if (fnv1a64(question) % 4 == 0) return std::string(kRefusal);
        return "To resolve this, review the configuration related to your question: " + question;
    };
}

MockChatTransport::Handler judge_handler() {
    return [](const std::vector<ChatMessage>& messages) -> std::string {
        const auto& prompt = prompt_of(messages);
        if (auto answer = section(prompt, "[Answer]\n", "\n[End of answer]")) return *answer;
        const auto a = section(prompt, "[Answer A]\n", "\n\n[Answer B]\n");
        const auto b = section(prompt, "[Answer B]\n", "\n\n[End of answers]");
        if (a && b) {
            if (a->size() == b->size()) return "TIE";
            return a->size() > b->size() ? "A" : "B";
        }
        if (auto response = section(prompt, "[Response]\n", "\n[End of response]"))
            return matches_no_answer_pattern(*response) ? "YES" : "NO";
        return "I cannot evaluate this.";
    };
}

}  // namespace msqa::mock
