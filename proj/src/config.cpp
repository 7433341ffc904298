#include "msqa/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"

namespace msqa {

namespace {

// Collects every problem instead of stopping at the first.
class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    template <typename T>
    void get(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            errors_.push_back(where + "." + key + " has the wrong type");
        }
    }

    void error(std::string message) { errors_.push_back(std::move(message)); }

private:
    std::vector<std::string>& errors_;
};

void expand_env(nlohmann::json& j, std::vector<std::string>& missing) {
    if (j.is_string()) {
        j = interpolate_env(j.get<std::string>(), missing);
    } else if (j.is_array() || j.is_object()) {
        for (auto& child : j) expand_env(child, missing);
    }
}

std::optional<BackendConfig> read_backend(Reader& rd, const nlohmann::json& backends, const char* name) {
    if (!backends.is_object() || !backends.contains(name) || backends[name].is_null()) return std::nullopt;
    const auto& j = backends[name];
    const std::string where = std::string("backends.") + name;
    BackendConfig b;
    rd.get(j, "url", b.url, where);
    rd.get(j, "model", b.model, where);
    rd.get(j, "auth_env", b.auth_env, where);
    rd.get(j, "temperature", b.temperature, where);
    rd.get(j, "max_tokens", b.max_tokens, where);
    std::int64_t timeout_ms = b.timeout.count();
    rd.get(j, "timeout_ms", timeout_ms, where);
    b.timeout = std::chrono::milliseconds(timeout_ms);
    if (b.url.empty()) rd.error(where + ".url is required");
    if (b.model.empty()) rd.error(where + ".model is required");
    if (b.temperature < 0.0) rd.error(where + ".temperature must be >= 0");
    if (b.max_tokens <= 0) rd.error(where + ".max_tokens must be > 0");
    if (timeout_ms <= 0) rd.error(where + ".timeout_ms must be > 0");
    return b;
}

}  // namespace

GenBackend BackendConfig::to_backend(BackendRole role) const {
    GenBackend b;
    b.endpoint = {url, model, auth_env};
    b.role = role;
    b.decoding = {temperature, max_tokens};
    b.timeout = timeout;
    return b;
}

std::string interpolate_env(std::string_view text, std::vector<std::string>& missing) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, 2, "${") == 0) {
            const auto close = text.find('}', i + 2);
            if (close != std::string_view::npos) {
                const std::string name(text.substr(i + 2, close - i - 2));
                if (const char* value = std::getenv(name.c_str())) {
                    out += value;
                } else {
                    missing.push_back(name);
                    out.append(text.substr(i, close - i + 1));
                }
                i = close + 1;
                continue;
            }
        }
        out += text[i++];
    }
    return out;
}

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir, const ConfigOverrides& overrides) {
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    RunConfig cfg;
    cfg.effective = doc;
    if (overrides.output_dir) cfg.effective["output_dir"] = overrides.output_dir->string();
    if (overrides.seed) {
        cfg.effective["split"]["seed"] = *overrides.seed;
        cfg.effective["eval"]["ab_seed"] = *overrides.seed;
    }
    if (overrides.strategies) cfg.effective["strategies"] = *overrides.strategies;
    if (overrides.dry_run) cfg.effective["dry_run"]["enabled"] = true;
    cfg.hash = sha256_hex(cfg.effective.dump());

    std::vector<std::string> errors;
    std::vector<std::string> missing_env;
    nlohmann::json j = cfg.effective;
    expand_env(j, missing_env);
    for (const auto& name : missing_env) errors.push_back("environment variable " + name + " is not set");
    Reader rd(errors);

    const auto path = [&](const nlohmann::json& obj, const char* key, const std::string& where) -> std::filesystem::path {
        std::string p;
        rd.get(obj, key, p, where);
        if (p.empty()) return {};
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : (base_dir / fp).lexically_normal();
    };

    const nlohmann::json empty = nlohmann::json::object();
    const auto section = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) return empty;
        if (!j[key].is_object()) {
            errors.push_back(std::string(key) + " must be an object");
            return empty;
        }
        return j[key];
    };

    cfg.raw_corpus = path(section("dataset"), "raw", "dataset");
    cfg.docs_dir = path(j, "docs", "config");
    cfg.output_dir = path(j, "output_dir", "config");
    cfg.cache_dir = path(j, "cache_dir", "config");
    cfg.prompts_dir = path(j, "prompts_dir", "config");
    if (cfg.raw_corpus.empty()) errors.push_back("dataset.raw is required");
    if (cfg.output_dir.empty()) errors.push_back("output_dir is required");
    if (cfg.cache_dir.empty() && !cfg.output_dir.empty()) cfg.cache_dir = cfg.output_dir / "cache";
    if (cfg.prompts_dir.empty()) cfg.prompts_dir = MSQA_PROMPT_DIR;

    const auto& split = section("split");
    rd.get(split, "ratio", cfg.split_ratio, "split");
    rd.get(split, "seed", cfg.split_seed, "split");
    if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) errors.push_back("split.ratio must lie in (0, 1)");

    const auto& clean = section("clean");
    if (clean.contains("rules")) {
        if (!clean["rules"].is_object()) {
            errors.push_back("clean.rules must map rule names to booleans");
        } else {
            for (const auto& [name, value] : clean["rules"].items()) {
                try {
                    const auto id = parse_clean_rule(name);
                    if (!value.is_boolean()) {
                        errors.push_back("clean.rules." + name + " must be a boolean");
                        continue;
                    }
                    for (auto& r : cfg.clean_rules) {
                        if (r.rule_id == id) r.enabled = value.get<bool>();
                    }
                } catch (const ValidationError& e) {
                    errors.push_back(std::string("clean.rules: ") + e.what());
                }
            }
        }
    }
    rd.get(clean, "user_id_patterns", cfg.user_id_patterns, "clean");
    rd.get(clean, "boilerplate_patterns", cfg.boilerplate_patterns, "clean");
    rd.get(clean, "length_limit", cfg.length_limit, "clean");
    rd.get(clean, "tokenizer", cfg.clean_tokenizer, "clean");
    rd.get(section("stats"), "tokenizer", cfg.stats_tokenizer, "stats");
    for (const auto* tok : {&cfg.clean_tokenizer, &cfg.stats_tokenizer}) {
        try {
            make_tokenizer(*tok);
        } catch (const ValidationError& e) {
            errors.push_back(e.what());
        }
    }

    const auto& instr = section("instructions");
    rd.get(instr, "template", cfg.instruction_template, "instructions");
    rd.get(instr, "exclude_over_length", cfg.exclude_over_length, "instructions");
    if (cfg.instruction_template.find("{tags}") == std::string::npos) errors.push_back("instructions.template needs a {tags} placeholder");

    const auto& bm25 = section("bm25");
    rd.get(bm25, "k1", cfg.bm25.k1, "bm25");
    rd.get(bm25, "b", cfg.bm25.b, "bm25");
    rd.get(bm25, "k", cfg.top_k, "bm25");
    rd.get(bm25, "target_tokens", cfg.chunking.target_tokens, "bm25");
    rd.get(bm25, "overlap_tokens", cfg.chunking.overlap_tokens, "bm25");
    if (cfg.top_k < 1) errors.push_back("bm25.k must be >= 1");
    if (cfg.bm25.k1 < 0.0) errors.push_back("bm25.k1 must be >= 0");
    if (cfg.bm25.b < 0.0 || cfg.bm25.b > 1.0) errors.push_back("bm25.b must lie in [0, 1]");
    if (cfg.chunking.target_tokens == 0) errors.push_back("bm25.target_tokens must be > 0");
    if (cfg.chunking.overlap_tokens >= cfg.chunking.target_tokens) errors.push_back("bm25.overlap_tokens must be below target_tokens");

    const auto& backends = section("backends");
    cfg.llm = read_backend(rd, backends, "llm");
    cfg.expert = read_backend(rd, backends, "expert");
    cfg.judge = read_backend(rd, backends, "judge");
    if (backends.contains("embedding") && !backends["embedding"].is_null()) {
        EmbeddingConfig e;
        const auto& ej = backends["embedding"];
        rd.get(ej, "url", e.url, "backends.embedding");
        std::int64_t timeout_ms = e.timeout.count();
        rd.get(ej, "timeout_ms", timeout_ms, "backends.embedding");
        e.timeout = std::chrono::milliseconds(timeout_ms);
        rd.get(ej, "batch_size", e.batch_size, "backends.embedding");
        rd.get(ej, "auth_env", e.auth_env, "backends.embedding");
        if (e.url.empty()) errors.push_back("backends.embedding.url is required");
        cfg.embedding = e;
    }

    const auto& retry = section("retry");
    std::int64_t backoff_ms = cfg.retry.initial_backoff.count();
    rd.get(retry, "max_retries", cfg.retry.max_retries, "retry");
    rd.get(retry, "initial_backoff_ms", backoff_ms, "retry");
    rd.get(retry, "multiplier", cfg.retry.multiplier, "retry");
    cfg.retry.initial_backoff = std::chrono::milliseconds(backoff_ms);
    if (cfg.retry.max_retries < 0) errors.push_back("retry.max_retries must be >= 0");

    if (j.contains("strategies")) {
        std::vector<std::string> names;
        rd.get(j, "strategies", names, "config");
        cfg.strategies.clear();
        for (const auto& n : names) {
            try {
                const auto k = parse_strategy(n);
                if (std::find(cfg.strategies.begin(), cfg.strategies.end(), k) == cfg.strategies.end()) cfg.strategies.push_back(k);
            } catch (const ValidationError& e) {
                errors.push_back(std::string("strategies: ") + e.what());
            }
        }
        if (names.empty()) errors.push_back("strategies must name at least one strategy");
        std::sort(cfg.strategies.begin(), cfg.strategies.end());
    }
    rd.get(j, "budget_tokens", cfg.budget_tokens, "config");
    rd.get(j, "workers", cfg.workers, "config");
    rd.get(j, "failure_ceiling", cfg.failure_ceiling, "config");
    if (cfg.workers == 0) errors.push_back("workers must be >= 1");
    if (cfg.failure_ceiling < 0.0 || cfg.failure_ceiling > 1.0) errors.push_back("failure_ceiling must lie in [0, 1]");

    const auto& eval = section("eval");
    rd.get(eval, "ab_seed", cfg.ab_seed, "eval");
    std::string tier = "pattern";
    rd.get(eval, "nar_tier", tier, "eval");
    if (tier == "judge") {
        cfg.nar_tier = NarTier::judge;
    } else if (tier != "pattern") {
        errors.push_back("eval.nar_tier must be \"pattern\" or \"judge\"");
    }

    const auto& dry = section("dry_run");
    rd.get(dry, "enabled", cfg.dry_run, "dry_run");
    cfg.expert_opinions = path(dry, "expert_opinions", "dry_run");
    rd.get(dry, "embedding_dimension", cfg.stub_dimension, "dry_run");
    if (cfg.stub_dimension == 0) errors.push_back("dry_run.embedding_dimension must be > 0");

    // Paths must exist at run start.
    if (!cfg.raw_corpus.empty() && !std::filesystem::is_regular_file(cfg.raw_corpus))
        errors.push_back("dataset.raw does not exist: " + cfg.raw_corpus.string());
    if (!cfg.docs_dir.empty() && !std::filesystem::is_directory(cfg.docs_dir))
        errors.push_back("docs directory does not exist: " + cfg.docs_dir.string());
    if (!cfg.expert_opinions.empty() && !std::filesystem::is_regular_file(cfg.expert_opinions))
        errors.push_back("dry_run.expert_opinions does not exist: " + cfg.expert_opinions.string());

    const bool needs_bm25 = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](auto k) { return uses_bm25(k); });
    if (needs_bm25 && cfg.docs_dir.empty()) errors.push_back("a BM25 strategy is selected but docs is not set");
    if (!cfg.dry_run) {
        const bool needs_expert = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](auto k) { return uses_expert(k); });
        const bool needs_llm = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](auto k) { return k != StrategyKind::expert_only; });
        if (needs_expert && !cfg.expert) errors.push_back("an expert strategy is selected but backends.expert is not configured");
        if (needs_llm && !cfg.llm) errors.push_back("an LLM strategy is selected but backends.llm is not configured");
        if (cfg.nar_tier == NarTier::judge && !cfg.judge) errors.push_back("eval.nar_tier is \"judge\" but backends.judge is not configured");
    }

    if (!errors.empty()) {
        std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" + (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    auto cfg = parse_config(doc, std::filesystem::absolute(path).parent_path(), overrides);
    cfg.config_path = path;
    return cfg;
}

}  // namespace msqa
