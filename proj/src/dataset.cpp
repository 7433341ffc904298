#include "msqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <unordered_set>

#include "msqa/errors.hpp"

namespace msqa {

namespace {

int parse_digits(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw ValidationError("truncated timestamp '" + std::string(text) + "'");
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        char c = text[i];
        if (c < '0' || c > '9') throw ValidationError("bad timestamp '" + std::string(text) + "'");
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) throw ValidationError("bad timestamp '" + std::string(text) + "'");
}

// Uniform integer in [0, bound) by rejection; portable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

std::string_view to_string(RecordFlag flag) noexcept {
    switch (flag) {
        case RecordFlag::over_length: return "OVER_LENGTH";
        case RecordFlag::has_image: return "HAS_IMAGE";
    }
    return "UNKNOWN";
}

RecordFlag parse_record_flag(std::string_view label) {
    if (label == "OVER_LENGTH") return RecordFlag::over_length;
    if (label == "HAS_IMAGE") return RecordFlag::has_image;
    throw ValidationError("unknown record flag '" + std::string(label) + "'");
}

Timestamp parse_iso8601(std::string_view text) {
    using namespace std::chrono;
    const int y = parse_digits(text, 0, 4);
    expect_char(text, 4, '-');
    const int mo = parse_digits(text, 5, 2);
    expect_char(text, 7, '-');
    const int d = parse_digits(text, 8, 2);
    if (text.size() < 11 || (text[10] != 'T' && text[10] != 't' && text[10] != ' '))
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    const int h = parse_digits(text, 11, 2);
    expect_char(text, 13, ':');
    const int mi = parse_digits(text, 14, 2);
    expect_char(text, 16, ':');
    const int s = parse_digits(text, 17, 2);
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    int offset_minutes = 0;
    if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
        ++pos;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '+' ? 1 : -1;
        const int oh = parse_digits(text, pos + 1, 2);
        expect_char(text, pos + 3, ':');
        const int om = parse_digits(text, pos + 4, 2);
        offset_minutes = sign * (oh * 60 + om);
        pos += 6;
    } else {
        throw ValidationError("timestamp without zone designator '" + std::string(text) + "'");
    }
    if (pos != text.size()) throw ValidationError("trailing characters in timestamp '" + std::string(text) + "'");

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw ValidationError("out-of-range timestamp '" + std::string(text) + "'");
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} - minutes{offset_minutes};
}

std::string format_iso8601(Timestamp ts) {
    using namespace std::chrono;
    const auto day_point = floor<days>(ts);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{ts - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

nlohmann::json to_json(const QARecord& r) {
    nlohmann::json flags = nlohmann::json::array();
    for (RecordFlag f : r.flags) flags.push_back(std::string(to_string(f)));
    return nlohmann::json{{"id", r.id},
                          {"question", r.question},
                          {"answer", r.answer},
                          {"tags", r.tags},
                          {"question_upvotes", r.question_upvotes},
                          {"answer_upvotes", r.answer_upvotes},
                          {"posted_at", format_iso8601(r.posted_at)},
                          {"flags", flags}};
}

QARecord record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    auto require = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
        return *it;
    };
    try {
        QARecord r;
        r.id = require("id").get<std::string>();
        r.question = require("question").get<std::string>();
        r.answer = require("answer").get<std::string>();
        r.tags = j.value("tags", std::vector<std::string>{});
        r.question_upvotes = j.value("question_upvotes", std::int64_t{0});
        r.answer_upvotes = j.value("answer_upvotes", std::int64_t{0});
        if (r.question_upvotes < 0 || r.answer_upvotes < 0) throw ValidationError("negative upvote count");
        r.posted_at = parse_iso8601(require("posted_at").get<std::string>());
        for (const auto& f : j.value("flags", nlohmann::json::array())) r.flags.insert(parse_record_flag(f.get<std::string>()));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("ill-typed record field: ") + e.what());
    }
}

CorpusLoad load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus file " + path.string());
    CorpusLoad load;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            load.records.push_back(record_from_json(j));
        } catch (const std::exception& e) {
            std::string id;
            if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
            load.malformed.push_back({line_number, id, e.what()});
        }
    }
    return load;
}

void save_corpus(const std::filesystem::path& path, std::span<const QARecord> records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write corpus file " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

CorpusStats compute_stats(std::span<const QARecord> corpus, const Tokenizer& tokenizer) {
    CorpusStats stats;
    stats.tokenizer_id = std::string(tokenizer.id());
    stats.record_count = static_cast<std::int64_t>(corpus.size());
    if (corpus.empty()) return stats;

    std::map<std::string, std::int64_t> questions_per_tag;
    std::int64_t tag_assignments = 0;
    std::uint64_t question_tokens = 0;
    std::uint64_t answer_tokens = 0;
    std::int64_t question_upvotes = 0;
    std::int64_t answer_upvotes = 0;
    Timestamp first = corpus.front().posted_at;
    Timestamp last = first;
    for (const auto& r : corpus) {
        std::set<std::string> distinct(r.tags.begin(), r.tags.end());
        for (const auto& t : distinct) ++questions_per_tag[t];
        tag_assignments += static_cast<std::int64_t>(distinct.size());
        question_tokens += tokenizer.count(r.question);
        answer_tokens += tokenizer.count(r.answer);
        question_upvotes += r.question_upvotes;
        answer_upvotes += r.answer_upvotes;
        first = std::min(first, r.posted_at);
        last = std::max(last, r.posted_at);
    }
    const auto n = static_cast<double>(corpus.size());
    stats.tag_count = static_cast<std::int64_t>(questions_per_tag.size());
    stats.avg_questions_per_tag =
        stats.tag_count == 0 ? 0.0 : static_cast<double>(tag_assignments) / static_cast<double>(stats.tag_count);
    stats.avg_tags_per_question = static_cast<double>(tag_assignments) / n;
    stats.avg_question_tokens = static_cast<double>(question_tokens) / n;
    stats.avg_answer_tokens = static_cast<double>(answer_tokens) / n;
    stats.avg_question_upvotes = static_cast<double>(question_upvotes) / n;
    stats.avg_answer_upvotes = static_cast<double>(answer_upvotes) / n;
    stats.avg_sample_upvotes = stats.avg_question_upvotes + stats.avg_answer_upvotes;
    stats.date_range_days = std::chrono::floor<std::chrono::days>(last - first).count();
    return stats;
}

nlohmann::json to_json(const CorpusStats& s) {
    return nlohmann::json{{"tokenizer", s.tokenizer_id},
                          {"record_count", s.record_count},
                          {"tag_count", s.tag_count},
                          {"avg_questions_per_tag", s.avg_questions_per_tag},
                          {"avg_tags_per_question", s.avg_tags_per_question},
                          {"avg_question_tokens", s.avg_question_tokens},
                          {"avg_answer_tokens", s.avg_answer_tokens},
                          {"avg_question_upvotes", s.avg_question_upvotes},
                          {"avg_answer_upvotes", s.avg_answer_upvotes},
                          {"avg_sample_upvotes", s.avg_sample_upvotes},
                          {"date_range_days", s.date_range_days}};
}

std::size_t train_size(std::size_t n, double ratio) {
    // The epsilon absorbs representation error, e.g. 0.29 * 100 = 28.999999999999996.
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

SplitResult split(std::span<const QARecord> corpus, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& r : corpus) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
        throw ValidationError("duplicate record id '" + *dup + "'");

    std::mt19937_64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(ids[i - 1], ids[j]);
    }
    const std::size_t n_train = train_size(ids.size(), ratio);
    SplitResult result;
    result.seed = seed;
    result.train.assign(std::make_move_iterator(ids.begin()), std::make_move_iterator(ids.begin() + static_cast<std::ptrdiff_t>(n_train)));
    result.test.assign(std::make_move_iterator(ids.begin() + static_cast<std::ptrdiff_t>(n_train)), std::make_move_iterator(ids.end()));
    return result;
}

nlohmann::json to_json(const SplitResult& s) {
    return nlohmann::json{{"seed", s.seed}, {"train", s.train}, {"test", s.test}};
}

SplitResult split_from_json(const nlohmann::json& j) {
    try {
        SplitResult s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.train = j.at("train").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed split document: ") + e.what());
    }
}

}  // namespace msqa
