#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msqa/backend.hpp"
#include "msqa/bm25.hpp"
#include "msqa/clean.hpp"
#include "msqa/fusion.hpp"
#include "msqa/metrics.hpp"

namespace msqa {

struct BackendConfig {
    std::string url;
    std::string model;
    std::string auth_env;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{120000};

    GenBackend to_backend(BackendRole role) const;
};

struct EmbeddingConfig {
    std::string url;
    std::chrono::milliseconds timeout{60000};
    std::size_t batch_size = 32;
    std::string auth_env;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::uint64_t> seed;  // replaces split.seed and eval.ab_seed
    std::optional<std::vector<std::string>> strategies;
    bool dry_run = false;
};

struct RunConfig {
    std::filesystem::path config_path;
    std::filesystem::path raw_corpus;
    std::filesystem::path docs_dir;
    std::filesystem::path output_dir;
    std::filesystem::path cache_dir;
    std::filesystem::path prompts_dir;

    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;

    std::vector<CleanRule> clean_rules = default_rules();
    std::vector<std::string> user_id_patterns;
    std::vector<std::string> boilerplate_patterns{kDefaultBoilerplate};
    std::size_t length_limit = 8192;
    std::string clean_tokenizer = "wordpunct";
    std::string stats_tokenizer = "wordpunct";

    std::string instruction_template = kDefaultInstructionTemplate;
    bool exclude_over_length = false;

    Bm25Params bm25;
    std::size_t top_k = 3;
    ChunkOptions chunking;

    std::optional<BackendConfig> llm;
    std::optional<BackendConfig> expert;
    std::optional<BackendConfig> judge;
    std::optional<EmbeddingConfig> embedding;
    RetryPolicy retry;

    std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    std::size_t budget_tokens = 4096;
    std::size_t workers = 4;
    double failure_ceiling = 0.05;

    std::uint64_t ab_seed = 0;
    NarTier nar_tier = NarTier::pattern;

    bool dry_run = false;
    std::filesystem::path expert_opinions;  // canned mock-expert replies keyed by question text
    std::size_t stub_dimension = 64;

    nlohmann::json effective;  // the file after overrides, before ${VAR} expansion
    std::string hash;          // sha256 of effective.dump()
};

/// Replaces ${NAME} with the environment value. Unset names are appended to
/// `missing` and left in place.
std::string interpolate_env(std::string_view text, std::vector<std::string>& missing);

/// Parses and validates a config document. Relative paths resolve against
/// `base_dir`. Every problem found is listed in one ValidationError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir, const ConfigOverrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

}  // namespace msqa
