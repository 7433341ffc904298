#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace msqa::markdown {

struct Segment {
    std::string_view text;
    bool fenced = false;
};

struct FenceSplit {
    std::vector<Segment> segments;
    bool unterminated = false;
};

/// Splits text into alternating prose and fenced-code segments.
///
/// A fence opens on a line holding at most three spaces of indentation and a
/// run of three or more backticks, and closes on a later line holding a
/// backtick run at least as long and nothing else. A fenced segment spans from
/// the start of its opening line to the end of its closing line, excluding the
/// closing line terminator. "\n", "\r\n" and a lone "\r" all end a line.
/// An unterminated fence extends to the end of the text.
FenceSplit split_fences(std::string_view text);

/// Applies `transform` to each prose segment and reassembles the text with
/// fenced segments copied byte for byte.
template <typename Transform>
std::string map_prose(std::string_view text, Transform&& transform, bool* unterminated = nullptr) {
    const FenceSplit split = split_fences(text);
    if (unterminated != nullptr) *unterminated = split.unterminated;
    std::string out;
    out.reserve(text.size());
    for (const auto& seg : split.segments) {
        if (seg.fenced) {
            out.append(seg.text);
        } else {
            out.append(transform(seg.text));
        }
    }
    return out;
}

/// Erases [begin, end) from `text` and tidies the horizontal whitespace left
/// behind: a line that becomes blank is removed together with one line break,
/// whitespace before closing punctuation or a line end is dropped, and a gap
/// between two words becomes a single space.
void remove_span(std::string& text, std::size_t begin, std::size_t end);

/// Byte ranges of inline code spans (`...`) inside a prose segment.
std::vector<std::pair<std::size_t, std::size_t>> inline_code_spans(std::string_view prose);

}  // namespace msqa::markdown
