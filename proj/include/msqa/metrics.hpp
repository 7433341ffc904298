#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msqa/backend.hpp"
#include "msqa/cache.hpp"
#include "msqa/embedding.hpp"
#include "msqa/fusion.hpp"

namespace msqa {

enum class Metric { bleu, rouge1, rouge2, rougeL, cosine_sim, bertscore_p, bertscore_r, bertscore_f1, nar, llm_eval };

inline constexpr std::array<Metric, 10> kAllMetrics{Metric::bleu,        Metric::rouge1,      Metric::rouge2,
                                                    Metric::rougeL,      Metric::cosine_sim,  Metric::bertscore_p,
                                                    Metric::bertscore_r, Metric::bertscore_f1, Metric::nar,
                                                    Metric::llm_eval};

std::string_view to_string(Metric m) noexcept;
std::string_view row_label(Metric m) noexcept;  // "BLEU", "Cosine Sim.", ...
Metric parse_metric(std::string_view name);
bool is_ratio_metric(Metric m) noexcept;       // nar, llm_eval: rendered as percent
bool lower_is_better(Metric m) noexcept;       // nar

// Lexical metrics over normalized_terms().
double bleu(std::string_view candidate, std::string_view reference);
double rouge_n(std::string_view candidate, std::string_view reference, int n);
double rouge_l(std::string_view candidate, std::string_view reference);

/// Cosine clamped to [0,1].
double clamped_cosine(const Vector& a, const Vector& b);

struct BertScore {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
    bool empty = false;  // a side had no tokens
};

/// Greedy max-cosine matching without IDF weighting or rescaling.
BertScore bertscore(const TokenEmbedding& candidate, const TokenEmbedding& reference);

// Judge prompt texts. Each is a template with named placeholders.
struct JudgeTemplates {
    std::string rephrase;   // {answer}
    std::string pairwise;   // {question} {answer_a} {answer_b}
    std::string no_answer;  // {response}

    static JudgeTemplates defaults();
    // Reads judge_rephrase.txt, judge_pairwise.txt and judge_no_answer.txt,
    // keeping the default for any file that is absent.
    static JudgeTemplates load(const std::filesystem::path& dir);
    std::map<std::string, std::string> hashes() const;
};

enum class NarTier { pattern, judge };
std::string_view to_string(NarTier t) noexcept;

/// Tier one: clarification-request phrasings anywhere in the response.
bool matches_no_answer_pattern(std::string_view response);

struct NoAnswerVerdict {
    bool no_answer = false;
    bool judged = false;   // the judge's verdict was used
    bool flagged = false;  // judge failed or was unparseable, pattern tier used instead
};

NoAnswerVerdict detect_no_answer(std::string_view response, const GenClient* judge = nullptr,
                                 const JudgeTemplates& templates = JudgeTemplates::defaults(), ResponseCache* cache = nullptr,
                                 std::string_view question_id = {});

/// Fraction of no-answer indicators. Throws ValidationError when empty.
double nar(std::span<const bool> no_answer);

enum class Verdict { a, b, tie, unparseable };
Verdict parse_verdict(std::string_view reply);

/// True when the candidate takes position A for this question.
bool candidate_first(std::uint64_t seed, std::string_view question_id) noexcept;

struct PairwiseOutcome {
    bool candidate_superior = false;
    bool flagged = false;
    bool candidate_was_a = false;
};

struct EvalResources {
    EmbeddingProvider* sentence = nullptr;  // cosine_sim
    EmbeddingProvider* token = nullptr;     // BERTScore
    const GenClient* judge = nullptr;       // llm_eval, and NAR tier two when nar_tier = judge
    ResponseCache* cache = nullptr;
};

struct EvalOptions {
    std::uint64_t ab_seed = 0;
    std::size_t workers = 4;
    NarTier nar_tier = NarTier::pattern;
    JudgeTemplates templates = JudgeTemplates::defaults();
};

/// Two-phase judge protocol for one sample: rephrase the golden answer, then
/// compare it with the candidate at a seeded A/B position.
PairwiseOutcome judge_pair(const GenClient& judge, std::string_view question_id, std::string_view question,
                           std::string_view candidate, std::string_view golden, const EvalOptions& options,
                           ResponseCache* cache);

struct MetricReport {
    StrategyKind strategy = StrategyKind::llm_only;
    std::size_t sample_count = 0;
    std::map<std::string, std::map<std::string, double>> per_sample;  // question id -> metric -> value
    std::map<std::string, double> aggregate;                          // metrics that were computed
    std::map<std::string, std::string> skipped;                       // metric -> reason
    std::map<std::string, std::size_t> unmetricated;                  // metric -> samples excluded
    std::map<std::string, std::vector<std::string>> flags;            // question id -> flags
    std::map<std::string, double> raw_cosine;                         // question id -> unclamped cosine
    std::optional<double> raw_cosine_mean;
    std::string nar_tier;
    std::map<std::string, std::string> template_hashes;
    std::vector<std::string> warnings;

    std::optional<double> value(Metric m) const;
};

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Scores one strategy's records against the golden answers. Failed records
/// are scored as empty responses. Metrics without a provider or judge are
/// reported as skipped, never as 0. Throws ValidationError if records are
/// empty, mix strategies, or lack a golden answer.
MetricReport evaluate_run(std::span<const GenerationRecord> records, const std::map<std::string, std::string>& golden,
                          const std::map<std::string, std::string>& questions, const EvalResources& resources,
                          const EvalOptions& options = {});

}  // namespace msqa
