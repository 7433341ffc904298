#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msqa/dataset.hpp"
#include "msqa/tokenizer.hpp"

namespace msqa {

// Listed in the fixed order in which the pipeline applies them.
enum class CleanRuleId {
    strip_user_ids,
    normalize_links,
    strip_boilerplate,
    strip_decoration,
    collapse_newlines,
    drop_image_samples,
    label_over_length,
};

inline constexpr std::size_t kCleanRuleCount = 7;

std::string_view to_string(CleanRuleId id) noexcept;
CleanRuleId parse_clean_rule(std::string_view name);

struct CleanRule {
    CleanRuleId rule_id;
    bool enabled = true;
};

std::vector<CleanRule> default_rules();

inline const std::string kDefaultBoilerplate =
    "--please don't forget to upvote and Accept as answer if the reply is helpful--";

struct CleanOptions {
    // Regexes (ECMAScript) matched in addition to the built-in handle@digits form.
    std::vector<std::string> extra_user_id_patterns;
    std::vector<std::string> boilerplate_patterns{kDefaultBoilerplate};
    std::size_t length_limit = 8192;
    std::shared_ptr<const Tokenizer> tokenizer = std::make_shared<WordPunctTokenizer>();
};

struct TextEdit {
    std::string text;
    std::size_t hits = 0;
    std::vector<std::string> warnings;
};

struct DroppedRecord {
    std::string id;
    std::string reason;
};

struct CleanReport {
    std::size_t input_count = 0;
    std::size_t output_count = 0;
    std::vector<DroppedRecord> dropped;
    std::map<CleanRuleId, std::size_t> per_rule_hits;
    std::vector<std::string> warnings;

    std::vector<std::string> dropped_ids() const;
};

nlohmann::json to_json(const CleanReport& report);

struct CleanResult {
    std::vector<QARecord> records;
    CleanReport report;
};

/// The seven-rule filtering pipeline. Patterns are compiled once at
/// construction; every method is const and safe to share between threads.
class Cleaner {
public:
    explicit Cleaner(CleanOptions options = {});

    TextEdit strip_user_ids(std::string_view text) const;
    TextEdit normalize_links(std::string_view text) const;
    TextEdit strip_boilerplate(std::string_view text) const;
    TextEdit strip_decoration(std::string_view text) const;
    TextEdit collapse_newlines(std::string_view text) const;
    bool detect_image_sample(std::string_view question) const;
    std::optional<RecordFlag> label_over_length(std::string_view question) const;

    /// Rules 1-5 rewrite question and answer, rule 6 drops records whose
    /// question carries an image, rule 7 labels over-length questions.
    /// Records with an empty id, a duplicate id, or text that is empty after
    /// cleaning are dropped and reported. Throws ValidationError when `rules`
    /// is not in canonical order.
    CleanResult run(std::span<const QARecord> corpus, std::span<const CleanRule> rules) const;

    const CleanOptions& options() const noexcept { return options_; }

private:
    CleanOptions options_;
    std::vector<std::regex> user_id_patterns_;
    std::vector<std::regex> boilerplate_patterns_;
};

// Free-function forms using the default options.
std::string strip_user_ids(std::string_view text);
std::string normalize_links(std::string_view text);
std::string strip_boilerplate(std::string_view text, std::span<const std::string> patterns);
std::string strip_decoration(std::string_view text);
std::string collapse_newlines(std::string_view text);
bool detect_image_sample(std::string_view question);
std::optional<RecordFlag> label_over_length(std::string_view question, const Tokenizer& tokenizer,
                                            std::size_t limit = 8192);
CleanResult run_pipeline(std::span<const QARecord> corpus, std::span<const CleanRule> rules,
                         const CleanOptions& options = {});

}  // namespace msqa
