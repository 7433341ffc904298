#include "msqa/clean.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "msqa/errors.hpp"
#include "msqa/markdown.hpp"

namespace msqa {

namespace {

using Span = std::pair<std::size_t, std::size_t>;

constexpr std::string_view kUserIdPattern = R"([A-Za-z][A-Za-z0-9_.\-]*@[0-9]{5,}(?![A-Za-z0-9_@]|\.[A-Za-z0-9]))";

constexpr std::array<std::string_view, 6> kImageExtensions = {".png", ".jpg", ".jpeg", ".gif", ".bmp", ".webp"};

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool istarts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
    if (pos + prefix.size() > s.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (lower(s[pos + i]) != lower(prefix[i])) return false;
    }
    return true;
}

std::size_t ifind(std::string_view s, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
        if (istarts_with(s, i, needle)) return i;
    }
    return std::string_view::npos;
}

bool is_h_space(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space_byte(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space_byte(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Removes the spans right to left so earlier offsets stay valid.
void remove_spans(std::string& text, std::vector<Span> spans) {
    std::sort(spans.begin(), spans.end());
    std::vector<Span> merged;
    for (const auto& s : spans) {
        if (!merged.empty() && s.first < merged.back().second) {
            merged.back().second = std::max(merged.back().second, s.second);
        } else {
            merged.push_back(s);
        }
    }
    for (auto it = merged.rbegin(); it != merged.rend(); ++it) markdown::remove_span(text, it->first, it->second);
}

bool inside(const std::vector<Span>& spans, std::size_t pos) {
    return std::any_of(spans.begin(), spans.end(), [&](const Span& s) { return pos >= s.first && pos < s.second; });
}

std::vector<Span> regex_matches(const std::string& text, const std::regex& re) {
    std::vector<Span> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        if (it->length(0) == 0) continue;
        const auto begin = static_cast<std::size_t>(it->position(0));
        out.emplace_back(begin, begin + static_cast<std::size_t>(it->length(0)));
    }
    return out;
}

// ---- link parsing -------------------------------------------------------

struct ParsedLink {
    std::string description;
    std::string target;
    std::size_t end = 0;  // one past the closing ')'
};

bool looks_like_url(std::string_view target) {
    return target.find("://") != std::string_view::npos || target.starts_with("/") || target.starts_with("#") ||
           istarts_with(target, 0, "www.") || istarts_with(target, 0, "mailto:");
}

// Parses "[desc](target)" starting at the '['. Tolerates whitespace between
// "]" and "(", whitespace around the target and a trailing quoted title.
std::optional<ParsedLink> parse_markdown_link(std::string_view s, std::size_t open) {
    int depth = 0;
    std::size_t close = std::string_view::npos;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '\n' && i + 1 < s.size() && s[i + 1] == '\n') return std::nullopt;
        if (s[i] == '[') ++depth;
        if (s[i] == ']' && --depth == 0) {
            close = i;
            break;
        }
    }
    if (close == std::string_view::npos) return std::nullopt;
    std::size_t k = close + 1;
    std::size_t gap = 0;
    while (k < s.size() && is_h_space(s[k])) ++k, ++gap;
    if (k >= s.size() || s[k] != '(') return std::nullopt;
    ++k;
    while (k < s.size() && is_h_space(s[k])) ++k;
    const std::size_t target_begin = k;
    int parens = 0;
    while (k < s.size() && !is_space_byte(static_cast<unsigned char>(s[k]))) {
        if (s[k] == '(') ++parens;
        if (s[k] == ')') {
            if (parens == 0) break;
            --parens;
        }
        ++k;
    }
    std::string_view target = s.substr(target_begin, k - target_begin);
    if (target.empty()) return std::nullopt;
    while (k < s.size() && is_h_space(s[k])) ++k;
    if (k < s.size() && (s[k] == '"' || s[k] == '\'')) {
        const char quote = s[k];
        const std::size_t end_quote = s.find(quote, k + 1);
        if (end_quote == std::string_view::npos) return std::nullopt;
        k = end_quote + 1;
        while (k < s.size() && is_h_space(s[k])) ++k;
    }
    if (k >= s.size() || s[k] != ')') return std::nullopt;
    if (gap > 0 && !looks_like_url(target)) return std::nullopt;

    ParsedLink link;
    link.description = std::string(trim(s.substr(open + 1, close - open - 1)));
    link.target = std::string(target);
    link.end = k + 1;
    return link;
}

std::string strip_tags(std::string_view html) {
    std::string out;
    bool in_tag = false;
    for (char c : html) {
        if (c == '<') {
            in_tag = true;
        } else if (c == '>' && in_tag) {
            in_tag = false;
        } else if (!in_tag) {
            out.push_back(c);
        }
    }
    // Collapse internal whitespace of the description.
    std::string collapsed;
    bool pending_space = false;
    for (char c : trim(out)) {
        if (is_space_byte(static_cast<unsigned char>(c))) {
            pending_space = true;
        } else {
            if (pending_space) collapsed.push_back(' ');
            pending_space = false;
            collapsed.push_back(c);
        }
    }
    return collapsed;
}

// Parses '<a ... href="..." ...>text</a>' starting at the '<'.
std::optional<ParsedLink> parse_anchor(std::string_view s, std::size_t open) {
    if (!istarts_with(s, open, "<a") || open + 2 >= s.size() ||
        !(is_space_byte(static_cast<unsigned char>(s[open + 2])) || s[open + 2] == '>'))
        return std::nullopt;
    const std::size_t tag_end = s.find('>', open);
    if (tag_end == std::string_view::npos) return std::nullopt;
    std::string_view tag = s.substr(open, tag_end - open);
    std::size_t h = ifind(tag, "href", 0);
    if (h == std::string_view::npos) return std::nullopt;
    h += 4;
    while (h < tag.size() && is_space_byte(static_cast<unsigned char>(tag[h]))) ++h;
    if (h >= tag.size() || tag[h] != '=') return std::nullopt;
    ++h;
    while (h < tag.size() && is_space_byte(static_cast<unsigned char>(tag[h]))) ++h;
    if (h >= tag.size()) return std::nullopt;
    std::string href;
    if (tag[h] == '"' || tag[h] == '\'') {
        const std::size_t q = tag.find(tag[h], h + 1);
        if (q == std::string_view::npos) return std::nullopt;
        href = std::string(tag.substr(h + 1, q - h - 1));
    } else {
        std::size_t e = h;
        while (e < tag.size() && !is_space_byte(static_cast<unsigned char>(tag[e]))) ++e;
        href = std::string(tag.substr(h, e - h));
    }
    href = std::string(trim(href));
    if (href.empty()) return std::nullopt;
    const std::size_t close = ifind(s, "</a>", tag_end + 1);
    if (close == std::string_view::npos) return std::nullopt;
    ParsedLink link;
    link.description = strip_tags(s.substr(tag_end + 1, close - tag_end - 1));
    link.target = std::move(href);
    link.end = close + 4;
    return link;
}

// Length of a bare URL starting at pos, with trailing punctuation and
// unbalanced closing brackets trimmed off.
std::size_t bare_url_length(std::string_view s, std::size_t pos) {
    std::size_t end = pos;
    while (end < s.size()) {
        const char c = s[end];
        if (is_space_byte(static_cast<unsigned char>(c)) || c == '<' || c == '>' || c == '"' || c == '`') break;
        ++end;
    }
    static constexpr std::string_view kTrailing = ".,;:!?*'";
    while (end > pos) {
        const char c = s[end - 1];
        std::string_view url = s.substr(pos, end - pos);
        if (kTrailing.find(c) != std::string_view::npos) {
            --end;
        } else if (c == ')' && std::count(url.begin(), url.end(), '(') < std::count(url.begin(), url.end(), ')')) {
            --end;
        } else if (c == ']' && std::count(url.begin(), url.end(), '[') < std::count(url.begin(), url.end(), ']')) {
            --end;
        } else {
            break;
        }
    }
    return end - pos;
}

bool starts_bare_url(std::string_view s, std::size_t i) {
    if (!istarts_with(s, i, "http://") && !istarts_with(s, i, "https://")) return false;
    if (i == 0) return true;
    const auto prev = static_cast<unsigned char>(s[i - 1]);
    return !is_word_byte(prev) && prev != '/' && prev != '=' && prev != '@';
}

std::string format_link(const std::string& description, const std::string& target) {
    return "[" + (description.empty() ? target : description) + "](" + target + ")";
}

std::string normalize_links_prose(std::string_view s, std::size_t& hits) {
    const auto code = markdown::inline_code_spans(s);
    std::size_t next_code = 0;
    std::string out;
    out.reserve(s.size() + 32);
    std::size_t i = 0;
    while (i < s.size()) {
        if (next_code < code.size() && i == code[next_code].first) {
            out.append(s.substr(i, code[next_code].second - i));
            i = code[next_code].second;
            ++next_code;
            continue;
        }
        const char c = s[i];
        if (c == '!' && i + 1 < s.size() && s[i + 1] == '[') {
            if (auto link = parse_markdown_link(s, i + 1)) {
                out.append(s.substr(i, link->end - i));
                i = link->end;
                continue;
            }
        } else if (c == '[') {
            if (auto link = parse_markdown_link(s, i)) {
                const std::string normalized = format_link(link->description, link->target);
                if (normalized != s.substr(i, link->end - i)) ++hits;
                out.append(normalized);
                i = link->end;
                continue;
            }
        } else if (c == '<') {
            if (auto link = parse_anchor(s, i)) {
                out.append(format_link(link->description, link->target));
                ++hits;
                i = link->end;
                continue;
            }
            if (istarts_with(s, i + 1, "http://") || istarts_with(s, i + 1, "https://")) {
                const std::size_t close = s.find('>', i);
                if (close != std::string_view::npos) {
                    std::string_view url = s.substr(i + 1, close - i - 1);
                    if (std::none_of(url.begin(), url.end(), [](char ch) { return is_space_byte(static_cast<unsigned char>(ch)); })) {
                        out.append(format_link("", std::string(url)));
                        ++hits;
                        i = close + 1;
                        continue;
                    }
                }
            }
            // Other HTML tags are copied verbatim so attribute URLs stay intact.
            if (i + 1 < s.size() && (std::isalpha(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '/' || s[i + 1] == '!')) {
                const std::size_t close = s.find('>', i);
                const std::size_t line_end = s.find('\n', i);
                if (close != std::string_view::npos && close < line_end) {
                    out.append(s.substr(i, close + 1 - i));
                    i = close + 1;
                    continue;
                }
            }
        } else if (starts_bare_url(s, i)) {
            const std::size_t len = bare_url_length(s, i);
            if (len > std::string_view("https://").size() - 1) {
                const std::string url(s.substr(i, len));
                out.append(format_link("", url));
                ++hits;
                i += len;
                continue;
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

// ---- decoration ---------------------------------------------------------

constexpr std::string_view kDecorLineChars = "*-=_~#+.:<>/\\";
constexpr std::string_view kDecorTokenChars = "*=~_-+";

bool has_run(std::string_view s, std::size_t min_run) {
    std::size_t run = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        run = (i > 0 && s[i] == s[i - 1]) ? run + 1 : 1;
        if (run >= min_run && !is_h_space(s[i])) return true;
    }
    return false;
}

bool is_decoration_line(std::string_view line) {
    std::string_view t = trim(line);
    if (t.size() < 4 || !has_run(t, 4)) return false;
    return std::all_of(t.begin(), t.end(), [](char c) { return is_h_space(c) || kDecorLineChars.find(c) != std::string_view::npos; });
}

// Byte ranges shielded from inline decoration removal: code spans and link targets.
std::vector<Span> protected_spans(std::string_view s) {
    auto spans = markdown::inline_code_spans(s);
    std::size_t pos = 0;
    while ((pos = s.find("](", pos)) != std::string_view::npos) {
        int depth = 0;
        std::size_t k = pos + 2;
        for (; k < s.size() && !is_space_byte(static_cast<unsigned char>(s[k])); ++k) {
            if (s[k] == '(') ++depth;
            if (s[k] == ')' && depth-- == 0) break;
        }
        spans.emplace_back(pos, k);
        pos = k;
    }
    return spans;
}

std::string strip_decoration_prose(std::string_view prose, std::size_t& hits) {
    // Whole decorative lines first.
    std::string text;
    text.reserve(prose.size());
    std::size_t pos = 0;
    while (pos < prose.size()) {
        std::size_t nl = prose.find('\n', pos);
        const std::size_t line_end = nl == std::string_view::npos ? prose.size() : nl + 1;
        std::string_view line = prose.substr(pos, line_end - pos);
        if (is_decoration_line(line)) {
            ++hits;
            if (nl == std::string_view::npos && !text.empty() && text.back() == '\n') {
                text.pop_back();
                if (!text.empty() && text.back() == '\r') text.pop_back();
            }
        } else {
            text.append(line);
        }
        pos = line_end;
    }

    // Then inline runs: any run of 4+ '*', or a standalone token made of 4+
    // copies of one decoration character.
    const auto shielded = protected_spans(text);
    std::vector<Span> removals;
    std::size_t i = 0;
    while (i < text.size()) {
        if (inside(shielded, i)) {
            ++i;
            continue;
        }
        if (text[i] == '*') {
            std::size_t j = i;
            while (j < text.size() && text[j] == '*') ++j;
            if (j - i >= 4) removals.emplace_back(i, j);
            i = j;
            continue;
        }
        if (kDecorTokenChars.find(text[i]) != std::string_view::npos &&
            (i == 0 || is_space_byte(static_cast<unsigned char>(text[i - 1])))) {
            std::size_t j = i;
            while (j < text.size() && text[j] == text[i]) ++j;
            if (j - i >= 4 && (j == text.size() || is_space_byte(static_cast<unsigned char>(text[j])))) {
                removals.emplace_back(i, j);
            }
            i = j;
            continue;
        }
        ++i;
    }
    hits += removals.size();
    remove_spans(text, std::move(removals));
    return text;
}

// ---- newlines -----------------------------------------------------------

std::string collapse_newlines_prose(std::string_view prose, std::size_t& hits) {
    std::string lf;
    lf.reserve(prose.size());
    for (std::size_t i = 0; i < prose.size(); ++i) {
        if (prose[i] == '\r') {
            lf.push_back('\n');
            if (i + 1 < prose.size() && prose[i + 1] == '\n') ++i;
        } else {
            lf.push_back(prose[i]);
        }
    }
    std::string out;
    out.reserve(lf.size());
    std::size_t i = 0;
    while (i < lf.size()) {
        if (lf[i] != '\n') {
            out.push_back(lf[i++]);
            continue;
        }
        // A run is newline ( [ \t]* newline )*; blank lines holding only
        // horizontal whitespace are part of the run.
        std::size_t after_last = i + 1;
        std::size_t breaks = 1;
        std::size_t j = i + 1;
        while (true) {
            std::size_t k = j;
            while (k < lf.size() && is_h_space(lf[k])) ++k;
            if (k < lf.size() && lf[k] == '\n') {
                ++breaks;
                j = k + 1;
                after_last = j;
            } else {
                break;
            }
        }
        if (breaks >= 2) ++hits;
        out.push_back('\n');
        i = after_last;
    }
    return out;
}

// Leading blank lines and trailing whitespace, unless the text ends inside an
// unterminated fence.
std::string trim_edges(std::string text) {
    std::size_t lead = 0;
    std::size_t scan = 0;
    while (scan < text.size() && is_space_byte(static_cast<unsigned char>(text[scan]))) {
        if (text[scan] == '\n') lead = scan + 1;
        ++scan;
    }
    if (scan == text.size()) return {};
    text.erase(0, lead);
    const auto split = markdown::split_fences(text);
    if (!split.unterminated) {
        while (!text.empty() && is_space_byte(static_cast<unsigned char>(text.back()))) text.pop_back();
    }
    return text;
}

std::regex compile_boilerplate(const std::string& pattern) {
    std::vector<std::string> words;
    std::string current;
    for (char c : pattern) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(lower(c));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    if (words.empty()) throw ValidationError("boilerplate pattern has no words: '" + pattern + "'");
    const std::string dash = "(?:-|\xE2\x80\x93|\xE2\x80\x94)";
    std::string re = dash + "*[ \\t]*\\b";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) re += "[^A-Za-z0-9\\n]*";
        re += words[i];
    }
    re += "\\b[.!]*[ \\t]*" + dash + "*";
    return std::regex(re, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
}

void check_rule_order(std::span<const CleanRule> rules) {
    for (std::size_t i = 1; i < rules.size(); ++i) {
        if (static_cast<int>(rules[i].rule_id) <= static_cast<int>(rules[i - 1].rule_id)) {
            throw ValidationError("clean rules must be listed once each in canonical order; '" +
                                  std::string(to_string(rules[i].rule_id)) + "' is out of place");
        }
    }
}

}  // namespace

std::string_view to_string(CleanRuleId id) noexcept {
    switch (id) {
        case CleanRuleId::strip_user_ids: return "STRIP_USER_IDS";
        case CleanRuleId::normalize_links: return "NORMALIZE_LINKS";
        case CleanRuleId::strip_boilerplate: return "STRIP_BOILERPLATE";
        case CleanRuleId::strip_decoration: return "STRIP_DECORATION";
        case CleanRuleId::collapse_newlines: return "COLLAPSE_NEWLINES";
        case CleanRuleId::drop_image_samples: return "DROP_IMAGE_SAMPLES";
        case CleanRuleId::label_over_length: return "LABEL_OVER_LENGTH";
    }
    return "UNKNOWN";
}

CleanRuleId parse_clean_rule(std::string_view name) {
    for (std::size_t i = 0; i < kCleanRuleCount; ++i) {
        const auto id = static_cast<CleanRuleId>(i);
        if (to_string(id) == name) return id;
    }
    throw ValidationError("unknown clean rule '" + std::string(name) + "'");
}

std::vector<CleanRule> default_rules() {
    std::vector<CleanRule> rules;
    for (std::size_t i = 0; i < kCleanRuleCount; ++i) rules.push_back({static_cast<CleanRuleId>(i), true});
    return rules;
}

std::vector<std::string> CleanReport::dropped_ids() const {
    std::vector<std::string> ids;
    for (const auto& d : dropped) ids.push_back(d.id);
    return ids;
}

nlohmann::json to_json(const CleanReport& report) {
    nlohmann::json hits = nlohmann::json::object();
    for (const auto& [rule, n] : report.per_rule_hits) hits[std::string(to_string(rule))] = n;
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : report.dropped) dropped.push_back({{"id", d.id}, {"reason", d.reason}});
    return nlohmann::json{{"input_count", report.input_count},
                          {"output_count", report.output_count},
                          {"dropped_ids", report.dropped_ids()},
                          {"dropped", dropped},
                          {"per_rule_hits", hits},
                          {"warnings", report.warnings}};
}

Cleaner::Cleaner(CleanOptions options) : options_(std::move(options)) {
    if (options_.length_limit == 0) throw ValidationError("length limit must be positive");
    if (!options_.tokenizer) options_.tokenizer = std::make_shared<WordPunctTokenizer>();
    user_id_patterns_.emplace_back(std::string(kUserIdPattern), std::regex::ECMAScript | std::regex::optimize);
    for (const auto& p : options_.extra_user_id_patterns) {
        try {
            user_id_patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw ValidationError("invalid user-id pattern '" + p + "': " + e.what());
        }
    }
    if (options_.boilerplate_patterns.empty()) throw ValidationError("boilerplate pattern list is empty");
    for (const auto& p : options_.boilerplate_patterns) boilerplate_patterns_.push_back(compile_boilerplate(p));
}

TextEdit Cleaner::strip_user_ids(std::string_view text) const {
    TextEdit edit;
    edit.text = markdown::map_prose(text, [&](std::string_view prose) {
        std::string s(prose);
        std::vector<Span> spans;
        for (const auto& re : user_id_patterns_) {
            auto found = regex_matches(s, re);
            spans.insert(spans.end(), found.begin(), found.end());
        }
        edit.hits += spans.size();
        remove_spans(s, std::move(spans));
        return s;
    });
    return edit;
}

TextEdit Cleaner::normalize_links(std::string_view text) const {
    TextEdit edit;
    edit.text = markdown::map_prose(text, [&](std::string_view prose) { return normalize_links_prose(prose, edit.hits); });
    return edit;
}

TextEdit Cleaner::strip_boilerplate(std::string_view text) const {
    TextEdit edit;
    edit.text = markdown::map_prose(text, [&](std::string_view prose) {
        std::string s(prose);
        for (const auto& re : boilerplate_patterns_) {
            auto spans = regex_matches(s, re);
            edit.hits += spans.size();
            remove_spans(s, std::move(spans));
        }
        return s;
    });
    return edit;
}

TextEdit Cleaner::strip_decoration(std::string_view text) const {
    TextEdit edit;
    edit.text = markdown::map_prose(text, [&](std::string_view prose) { return strip_decoration_prose(prose, edit.hits); });
    return edit;
}

TextEdit Cleaner::collapse_newlines(std::string_view text) const {
    TextEdit edit;
    bool unterminated = false;
    edit.text = markdown::map_prose(
        text, [&](std::string_view prose) { return collapse_newlines_prose(prose, edit.hits); }, &unterminated);
    if (unterminated) edit.warnings.emplace_back("unterminated code fence; remainder preserved as code");
    return edit;
}

bool Cleaner::detect_image_sample(std::string_view q) const {
    static const std::regex markdown_image(R"(!\[[^\]\n]*\][ \t]*\()");
    static const std::regex html_image(R"(<img[\s/>])", std::regex::icase);
    const std::string s(q);
    if (std::regex_search(s, markdown_image) || std::regex_search(s, html_image)) return true;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!istarts_with(q, i, "http://") && !istarts_with(q, i, "https://")) continue;
        std::size_t end = i;
        while (end < q.size() && !is_space_byte(static_cast<unsigned char>(q[end])) &&
               std::string_view("<>\"'`()[]").find(q[end]) == std::string_view::npos)
            ++end;
        std::string_view url = q.substr(i, end - i);
        url = url.substr(0, std::min(url.find('?'), url.find('#')));
        while (!url.empty() && std::string_view(".,;:!*").find(url.back()) != std::string_view::npos) url.remove_suffix(1);
        for (auto ext : kImageExtensions) {
            if (url.size() > ext.size() && istarts_with(url, url.size() - ext.size(), ext)) return true;
        }
        i = end;
    }
    return false;
}

std::optional<RecordFlag> Cleaner::label_over_length(std::string_view question) const {
    if (options_.tokenizer->count(question) > options_.length_limit) return RecordFlag::over_length;
    return std::nullopt;
}

CleanResult Cleaner::run(std::span<const QARecord> corpus, std::span<const CleanRule> rules) const {
    check_rule_order(rules);
    auto enabled = [&](CleanRuleId id) {
        return std::any_of(rules.begin(), rules.end(), [&](const CleanRule& r) { return r.rule_id == id && r.enabled; });
    };
    using TextRule = TextEdit (Cleaner::*)(std::string_view) const;
    const std::array<std::pair<CleanRuleId, TextRule>, 5> text_rules{{
        {CleanRuleId::strip_user_ids, &Cleaner::strip_user_ids},
        {CleanRuleId::normalize_links, &Cleaner::normalize_links},
        {CleanRuleId::strip_boilerplate, &Cleaner::strip_boilerplate},
        {CleanRuleId::strip_decoration, &Cleaner::strip_decoration},
        {CleanRuleId::collapse_newlines, &Cleaner::collapse_newlines},
    }};

    CleanResult result;
    auto& report = result.report;
    report.input_count = corpus.size();
    for (const auto& rule : rules) report.per_rule_hits[rule.rule_id] = 0;

    std::unordered_set<std::string> seen;
    for (const auto& input : corpus) {
        if (trim(input.id).empty()) {
            report.dropped.push_back({input.id, "empty id"});
            continue;
        }
        if (!seen.insert(input.id).second) {
            report.dropped.push_back({input.id, "duplicate id"});
            continue;
        }
        QARecord record = input;
        for (std::string* field : {&record.question, &record.answer}) {
            for (const auto& [id, rule] : text_rules) {
                if (!enabled(id)) continue;
                TextEdit edit = (this->*rule)(*field);
                report.per_rule_hits[id] += edit.hits;
                for (auto& w : edit.warnings) report.warnings.push_back(record.id + ": " + w);
                *field = std::move(edit.text);
            }
            *field = trim_edges(std::move(*field));
        }
        if (enabled(CleanRuleId::drop_image_samples) && detect_image_sample(record.question)) {
            ++report.per_rule_hits[CleanRuleId::drop_image_samples];
            report.dropped.push_back({record.id, "question contains an image"});
            continue;
        }
        if (record.question.empty() || record.answer.empty()) {
            report.dropped.push_back({record.id, "empty question or answer after cleaning"});
            continue;
        }
        if (enabled(CleanRuleId::label_over_length) && label_over_length(record.question)) {
            if (record.flags.insert(RecordFlag::over_length).second) ++report.per_rule_hits[CleanRuleId::label_over_length];
        }
        result.records.push_back(std::move(record));
    }
    report.output_count = result.records.size();
    return result;
}

namespace {
const Cleaner& default_cleaner() {
    static const Cleaner cleaner;
    return cleaner;
}
}  // namespace

std::string strip_user_ids(std::string_view text) { return default_cleaner().strip_user_ids(text).text; }
std::string normalize_links(std::string_view text) { return default_cleaner().normalize_links(text).text; }
std::string strip_decoration(std::string_view text) { return default_cleaner().strip_decoration(text).text; }
std::string collapse_newlines(std::string_view text) { return default_cleaner().collapse_newlines(text).text; }
bool detect_image_sample(std::string_view question) { return default_cleaner().detect_image_sample(question); }

std::string strip_boilerplate(std::string_view text, std::span<const std::string> patterns) {
    CleanOptions options;
    options.boilerplate_patterns.assign(patterns.begin(), patterns.end());
    return Cleaner(std::move(options)).strip_boilerplate(text).text;
}

std::optional<RecordFlag> label_over_length(std::string_view question, const Tokenizer& tokenizer, std::size_t limit) {
    if (limit == 0) throw ValidationError("length limit must be positive");
    if (tokenizer.count(question) > limit) return RecordFlag::over_length;
    return std::nullopt;
}

CleanResult run_pipeline(std::span<const QARecord> corpus, std::span<const CleanRule> rules, const CleanOptions& options) {
    return Cleaner(options).run(corpus, rules);
}

}  // namespace msqa
