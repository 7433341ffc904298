#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msqa/tokenizer.hpp"

namespace msqa {

using Timestamp = std::chrono::sys_seconds;

enum class RecordFlag { over_length, has_image };

std::string_view to_string(RecordFlag flag) noexcept;
RecordFlag parse_record_flag(std::string_view label);

/// One forum question with its accepted answer.
struct QARecord {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<std::string> tags;
    std::int64_t question_upvotes = 0;
    std::int64_t answer_upvotes = 0;
    Timestamp posted_at{};
    std::set<RecordFlag> flags;

    bool operator==(const QARecord&) const = default;
};

// ISO-8601 "YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)", normalized to UTC.
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp ts);

nlohmann::json to_json(const QARecord& record);
// Throws ValidationError on missing or ill-typed fields.
QARecord record_from_json(const nlohmann::json& j);

struct MalformedLine {
    std::size_t line_number = 0;  // 1-based
    std::string id;               // best effort, may be empty
    std::string reason;
};

struct CorpusLoad {
    std::vector<QARecord> records;
    std::vector<MalformedLine> malformed;
};

// Lines that fail to parse are collected in `malformed` instead of aborting.
CorpusLoad load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, std::span<const QARecord> records);

struct CorpusStats {
    std::string tokenizer_id;
    std::int64_t record_count = 0;
    std::int64_t tag_count = 0;
    double avg_questions_per_tag = 0.0;
    double avg_tags_per_question = 0.0;
    double avg_question_tokens = 0.0;
    double avg_answer_tokens = 0.0;
    double avg_question_upvotes = 0.0;
    double avg_answer_upvotes = 0.0;
    double avg_sample_upvotes = 0.0;
    std::int64_t date_range_days = 0;

    bool operator==(const CorpusStats&) const = default;
};

CorpusStats compute_stats(std::span<const QARecord> corpus, const Tokenizer& tokenizer);
nlohmann::json to_json(const CorpusStats& stats);

struct SplitResult {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::uint64_t seed = 0;

    bool operator==(const SplitResult&) const = default;
};

/// Number of records assigned to the training side: floor(ratio * n).
std::size_t train_size(std::size_t n, double ratio);

/// Sorts ids, shuffles them with a seeded Fisher-Yates pass and assigns the
/// first train_size(n, ratio) ids to train. The result does not depend on the
/// input order. Throws ValidationError for ratio outside (0, 1) or duplicate ids.
SplitResult split(std::span<const QARecord> corpus, double ratio, std::uint64_t seed);

nlohmann::json to_json(const SplitResult& split);
SplitResult split_from_json(const nlohmann::json& j);

}  // namespace msqa
