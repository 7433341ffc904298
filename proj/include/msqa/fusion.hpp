#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msqa/backend.hpp"
#include "msqa/bm25.hpp"
#include "msqa/cache.hpp"
#include "msqa/dataset.hpp"
#include "msqa/instructions.hpp"
#include "msqa/tokenizer.hpp"

namespace msqa {

/// The five experimental arms, in report column order.
enum class StrategyKind { expert_only, llm_only, llm_bm25, llm_expert, llm_bm25_expert };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{StrategyKind::expert_only, StrategyKind::llm_only,
                                                            StrategyKind::llm_bm25, StrategyKind::llm_expert,
                                                            StrategyKind::llm_bm25_expert};

std::string_view to_string(StrategyKind kind) noexcept;
std::string_view column_label(StrategyKind kind) noexcept;
StrategyKind parse_strategy(std::string_view name);
bool uses_bm25(StrategyKind kind) noexcept;
bool uses_expert(StrategyKind kind) noexcept;

struct FusionRequest {
    std::string question;
    StrategyKind strategy = StrategyKind::llm_only;
    std::vector<Chunk> retrieved;  // in retrieval rank order
    std::optional<std::string> expert_opinion;
    std::size_t budget_tokens = 4096;
};

/// Prompt layout for the LLM arms. `base` must contain the {context} and
/// {question} placeholders; {context} expands to the labeled chunk and
/// expert sections, or to nothing.
struct PromptTemplates {
    std::string base;
    std::string chunk_label = "Reference chunks";
    std::string expert_label = "Expert opinion";

    static PromptTemplates defaults();
    // Reads llm_base.txt from dir, falling back to the defaults when absent.
    static PromptTemplates load(const std::filesystem::path& dir);
    std::string hash() const;
};

/// Renders the prompt for an LLM arm. Over budget, the lowest-ranked chunk
/// is cut word by word and then dropped, repeating up the ranking, and only
/// then the expert opinion; the question is never shortened. Throws
/// ValidationError if the request breaks the FusionRequest invariants or the
/// question alone exceeds the budget.
std::string compose_prompt(const FusionRequest& request, const PromptTemplates& templates, const Tokenizer& tokenizer);
std::string compose_prompt(const FusionRequest& request, const PromptTemplates& templates);

/// One response R_i from one arm.
struct GenerationRecord {
    std::string question_id;
    StrategyKind strategy = StrategyKind::llm_only;
    std::string prompt;
    std::string response;
    std::int64_t latency_ms = 0;
    std::string backend_fingerprint;
    bool failed = false;
    std::string error;

    bool operator==(const GenerationRecord&) const = default;
};

nlohmann::json to_json(const GenerationRecord& record);
GenerationRecord generation_record_from_json(const nlohmann::json& j);
void save_records(const std::filesystem::path& path, std::span<const GenerationRecord> records);
std::vector<GenerationRecord> load_records(const std::filesystem::path& path);

struct ExpertQuery {
    std::string instruction_template = kDefaultInstructionTemplate;
    std::string preamble = kDefaultPreamble;
};

/// The expert's own instruction format with an empty response section.
std::string expert_prompt(const QARecord& question, const ExpertQuery& query = {});

struct ExpertOpinion {
    std::string prompt;
    GenerationOutcome outcome;
    bool from_cache = false;
};

/// Asks the expert backend for its opinion on a question; results are cached
/// under the purpose "EXPERT_OPINION". Throws ValidationError if the client's
/// role is not EXPERT.
ExpertOpinion consult_expert(const GenClient& expert, const QARecord& question, ResponseCache* cache,
                             const ExpertQuery& query = {});

struct FusionBackends {
    std::shared_ptr<const GenClient> llm;
    std::shared_ptr<const GenClient> expert;
};

struct RunOptions {
    std::size_t top_k = 3;
    std::size_t budget_tokens = 4096;
    std::size_t workers = 4;
    double failure_ceiling = 0.05;
    ExpertQuery expert_query;
    std::shared_ptr<const Tokenizer> tokenizer = std::make_shared<WordPunctTokenizer>();
};

struct RunStats {
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t failures = 0;
};

struct StrategyRun {
    std::vector<GenerationRecord> records;
    RunStats stats;
};

/// One record per question, in input order. Identical (question, strategy,
/// backend fingerprint, prompt) is served from the cache without a backend
/// call. Per-question failures are recorded; FailureCeilingExceeded is thrown
/// when the failure rate exceeds options.failure_ceiling.
StrategyRun run_strategy(std::span<const QARecord> questions, StrategyKind strategy, const FusionBackends& backends,
                         const RetrievalStore* store, ResponseCache& cache, const PromptTemplates& templates,
                         const RunOptions& options);

}  // namespace msqa
