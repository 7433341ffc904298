#include "msqa/markdown.hpp"

namespace msqa::markdown {

namespace {

struct Line {
    std::size_t begin;       // first byte of the line
    std::size_t content_end; // first byte of the terminator
    std::size_t end;         // first byte after the terminator
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t i = pos;
        while (i < text.size() && text[i] != '\n' && text[i] != '\r') ++i;
        std::size_t next = i;
        if (i < text.size()) next = (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ? i + 2 : i + 1;
        lines.push_back({pos, i, next});
        pos = next;
    }
    return lines;
}

// Length of the backtick run opening a fence line, or 0.
std::size_t fence_run(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] == '`') ++i;
    return i - start >= 3 ? i - start : 0;
}

bool closes_fence(std::string_view line, std::size_t open_run) {
    const std::size_t run = fence_run(line);
    if (run < open_run) return false;
    std::size_t i = line.find('`');
    i += run;
    for (; i < line.size(); ++i) {
        if (line[i] != ' ' && line[i] != '\t') return false;
    }
    return true;
}

bool opens_fence(std::string_view line) {
    const std::size_t run = fence_run(line);
    if (run == 0) return false;
    // Backtick fences may not carry backticks in their info string.
    const std::size_t after = line.find('`') + run;
    return line.find('`', after) == std::string_view::npos;
}

bool is_h_space(char c) { return c == ' ' || c == '\t'; }
bool is_break(char c) { return c == '\n' || c == '\r'; }

}  // namespace

FenceSplit split_fences(std::string_view text) {
    FenceSplit result;
    const auto lines = split_lines(text);
    std::size_t prose_begin = 0;
    std::size_t i = 0;
    while (i < lines.size()) {
        const auto& open = lines[i];
        std::string_view open_text = text.substr(open.begin, open.content_end - open.begin);
        if (!opens_fence(open_text)) {
            ++i;
            continue;
        }
        const std::size_t run = fence_run(open_text);
        std::size_t j = i + 1;
        while (j < lines.size() && !closes_fence(text.substr(lines[j].begin, lines[j].content_end - lines[j].begin), run)) ++j;
        if (open.begin > prose_begin) result.segments.push_back({text.substr(prose_begin, open.begin - prose_begin), false});
        if (j == lines.size()) {
            result.segments.push_back({text.substr(open.begin), true});
            result.unterminated = true;
            return result;
        }
        const std::size_t fence_end = lines[j].content_end;
        result.segments.push_back({text.substr(open.begin, fence_end - open.begin), true});
        prose_begin = fence_end;
        i = j + 1;
    }
    if (prose_begin < text.size()) result.segments.push_back({text.substr(prose_begin), false});
    return result;
}

void remove_span(std::string& text, std::size_t begin, std::size_t end) {
    std::size_t left = begin;
    while (left > 0 && is_h_space(text[left - 1])) --left;
    std::size_t right = end;
    while (right < text.size() && is_h_space(text[right])) ++right;
    const bool at_line_start = left == 0 || is_break(text[left - 1]);
    const bool at_line_end = right == text.size() || is_break(text[right]);

    if (at_line_start && at_line_end) {
        if (right < text.size()) {
            right += (text[right] == '\r' && right + 1 < text.size() && text[right + 1] == '\n') ? 2 : 1;
        } else if (left > 0) {
            left -= 1;
            if (text[left] == '\n' && left > 0 && text[left - 1] == '\r') left -= 1;
        }
        text.erase(left, right - left);
    } else if (at_line_start) {
        text.erase(begin, right - begin);
    } else if (at_line_end) {
        text.erase(left, right - left);
    } else {
        static constexpr std::string_view kClosers = ",.;:!?)]}";
        if (kClosers.find(text[right]) != std::string_view::npos) {
            text.erase(left, right - left);
        } else {
            text.replace(left, right - left, " ");
        }
    }
}

std::vector<std::pair<std::size_t, std::size_t>> inline_code_spans(std::string_view prose) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t i = 0;
    while (i < prose.size()) {
        if (prose[i] != '`') {
            ++i;
            continue;
        }
        std::size_t run_start = i;
        while (i < prose.size() && prose[i] == '`') ++i;
        const std::size_t run = i - run_start;
        // Look for a closing run of exactly the same length.
        std::size_t j = i;
        bool closed = false;
        while (j < prose.size()) {
            if (prose[j] != '`') {
                ++j;
                continue;
            }
            std::size_t k = j;
            while (k < prose.size() && prose[k] == '`') ++k;
            if (k - j == run) {
                spans.emplace_back(run_start, k);
                i = k;
                closed = true;
                break;
            }
            j = k;
        }
        if (!closed) i = run_start + run;
    }
    return spans;
}

}  // namespace msqa::markdown
