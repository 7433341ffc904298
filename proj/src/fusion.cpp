#include "msqa/fusion.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"
#include "msqa/worker_pool.hpp"

namespace msqa {

namespace {

constexpr std::string_view kDefaultBase =
    "Answer the following question about Microsoft cloud products as accurately as you can.\n"
    "\n"
    "{context}Question:\n"
    "{question}\n";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
}

// Prefix of text holding its first `words` whitespace-separated words.
std::string_view word_prefix(std::string_view text, std::size_t words) {
    std::size_t i = 0;
    std::size_t seen = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i == text.size()) break;
        while (i < text.size() && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (++seen == words) return text.substr(0, i);
    }
    return text;
}

std::string render(const PromptTemplates& t, std::string_view question, const std::vector<std::string>& chunks,
                   const std::optional<std::string>& opinion) {
    std::string context;
    if (!chunks.empty()) {
        context += t.chunk_label + ":\n";
        for (std::size_t i = 0; i < chunks.size(); ++i) context += "[" + std::to_string(i + 1) + "] " + chunks[i] + "\n";
        context += "\n";
    }
    if (opinion) context += t.expert_label + ":\n" + *opinion + "\n\n";
    std::string out = t.base;
    // {question} last so that question text containing "{context}" is left alone.
    replace_all(out, "{context}", context);
    const auto q = out.find("{question}");
    out.replace(q, std::string_view("{question}").size(), question);
    return out;
}

// Largest word count m in [1, total) for which fits(m) holds, or 0.
template <typename Fits>
std::size_t largest_fitting_prefix(std::size_t total, Fits&& fits) {
    std::size_t lo = 0;
    std::size_t hi = total == 0 ? 0 : total - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (fits(mid)) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

void validate(const FusionRequest& req, const PromptTemplates& templates) {
    if (req.strategy == StrategyKind::expert_only)
        throw ValidationError("EXPERT_ONLY questions are answered by the expert directly, not through an LLM prompt");
    if (!uses_bm25(req.strategy) && !req.retrieved.empty())
        throw ValidationError(std::string(to_string(req.strategy)) + " request must not carry retrieved chunks");
    if (uses_expert(req.strategy) != req.expert_opinion.has_value())
        throw ValidationError(std::string(to_string(req.strategy)) + " request has a mismatched expert opinion");
    if (templates.base.find("{question}") == std::string::npos || templates.base.find("{context}") == std::string::npos)
        throw ValidationError("base prompt template needs {context} and {question} placeholders");
}

}  // namespace

std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::expert_only: return "EXPERT_ONLY";
        case StrategyKind::llm_only: return "LLM_ONLY";
        case StrategyKind::llm_bm25: return "LLM_BM25";
        case StrategyKind::llm_expert: return "LLM_EXPERT";
        case StrategyKind::llm_bm25_expert: return "LLM_BM25_EXPERT";
    }
    return "UNKNOWN";
}

std::string_view column_label(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::expert_only: return "Expert";
        case StrategyKind::llm_only: return "LLM";
        case StrategyKind::llm_bm25: return "+BM25";
        case StrategyKind::llm_expert: return "+Expert";
        case StrategyKind::llm_bm25_expert: return "+BM25 & Expert";
    }
    return "UNKNOWN";
}

StrategyKind parse_strategy(std::string_view name) {
    for (StrategyKind k : kAllStrategies) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown strategy '" + std::string(name) + "'");
}

bool uses_bm25(StrategyKind kind) noexcept {
    return kind == StrategyKind::llm_bm25 || kind == StrategyKind::llm_bm25_expert;
}

bool uses_expert(StrategyKind kind) noexcept {
    return kind == StrategyKind::expert_only || kind == StrategyKind::llm_expert || kind == StrategyKind::llm_bm25_expert;
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.base = std::string(kDefaultBase);
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    std::ifstream in(dir / "llm_base.txt", std::ios::binary);
    if (in) {
        std::ostringstream buf;
        buf << in.rdbuf();
        t.base = buf.str();
    }
    return t;
}

std::string PromptTemplates::hash() const {
    return sha256_hex(base + '\0' + chunk_label + '\0' + expert_label);
}

std::string compose_prompt(const FusionRequest& req, const PromptTemplates& templates, const Tokenizer& tokenizer) {
    validate(req, templates);
    const auto fits = [&](const std::string& prompt) { return tokenizer.count(prompt) <= req.budget_tokens; };
    if (!fits(render(templates, req.question, {}, std::nullopt)))
        throw ValidationError("question alone exceeds the prompt budget of " + std::to_string(req.budget_tokens) + " tokens");

    std::vector<std::string> chunks;
    for (const auto& c : req.retrieved) chunks.push_back(c.body);
    std::optional<std::string> opinion = req.expert_opinion;

    std::string prompt = render(templates, req.question, chunks, opinion);
    while (!fits(prompt)) {
        std::string* victim = !chunks.empty() ? &chunks.back() : (opinion ? &*opinion : nullptr);
        if (victim == nullptr) break;  // unreachable: the bare question fits
        const std::string original = *victim;
        const std::size_t words = WhitespaceTokenizer{}.count(original);
        const std::size_t keep = largest_fitting_prefix(words, [&](std::size_t m) {
            *victim = std::string(word_prefix(original, m));
            return fits(render(templates, req.question, chunks, opinion));
        });
        if (keep > 0) {
            *victim = std::string(word_prefix(original, keep));
        } else if (!chunks.empty()) {
            chunks.pop_back();
        } else {
            opinion.reset();
        }
        prompt = render(templates, req.question, chunks, opinion);
    }
    return prompt;
}

std::string compose_prompt(const FusionRequest& request, const PromptTemplates& templates) {
    return compose_prompt(request, templates, WordPunctTokenizer{});
}

nlohmann::json to_json(const GenerationRecord& r) {
    return nlohmann::json{{"question_id", r.question_id},
                          {"strategy", std::string(to_string(r.strategy))},
                          {"prompt", r.prompt},
                          {"response", r.response},
                          {"latency_ms", r.latency_ms},
                          {"backend_fingerprint", r.backend_fingerprint},
                          {"failed", r.failed},
                          {"error", r.error}};
}

GenerationRecord generation_record_from_json(const nlohmann::json& j) {
    try {
        GenerationRecord r;
        r.question_id = j.at("question_id").get<std::string>();
        r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        r.prompt = j.at("prompt").get<std::string>();
        r.response = j.at("response").get<std::string>();
        r.latency_ms = j.at("latency_ms").get<std::int64_t>();
        r.backend_fingerprint = j.at("backend_fingerprint").get<std::string>();
        r.failed = j.value("failed", false);
        r.error = j.value("error", std::string{});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed generation record: ") + e.what());
    }
}

void save_records(const std::filesystem::path& path, std::span<const GenerationRecord> records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<GenerationRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<GenerationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            records.push_back(generation_record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ": " + e.what());
        }
    }
    return records;
}

std::string expert_prompt(const QARecord& question, const ExpertQuery& query) {
    const std::string instruction =
        question.tags.empty() ? kFallbackInstruction : render_instruction(query.instruction_template, question.tags);
    return render_query(instruction, question.question, query.preamble);
}

ExpertOpinion consult_expert(const GenClient& expert, const QARecord& question, ResponseCache* cache, const ExpertQuery& query) {
    if (expert.backend().role != BackendRole::expert) throw ValidationError("consult_expert needs a backend with role EXPERT");
    ExpertOpinion opinion;
    opinion.prompt = expert_prompt(question, query);
    opinion.outcome = cached_generate(expert, cache, question.id, "EXPERT_OPINION", opinion.prompt, &opinion.from_cache);
    return opinion;
}

StrategyRun run_strategy(std::span<const QARecord> questions, StrategyKind strategy, const FusionBackends& backends,
                         const RetrievalStore* store, ResponseCache& cache, const PromptTemplates& templates,
                         const RunOptions& options) {
    if (uses_bm25(strategy) && store == nullptr)
        throw ValidationError(std::string(to_string(strategy)) + " needs a BM25 index");
    if (uses_expert(strategy) && !backends.expert) throw ValidationError(std::string(to_string(strategy)) + " needs an expert backend");
    if (strategy != StrategyKind::expert_only && !backends.llm)
        throw ValidationError(std::string(to_string(strategy)) + " needs an LLM backend");

    const auto calls_now = [&] {
        return (backends.llm ? backends.llm->transport_calls() : 0) + (backends.expert ? backends.expert->transport_calls() : 0);
    };
    const std::size_t calls_before = calls_now();
    const std::size_t hits_before = cache.hits();

    StrategyRun run;
    run.records.resize(questions.size());
    parallel_for(questions.size(), options.workers, [&](std::size_t i) {
        const QARecord& q = questions[i];
        GenerationRecord& rec = run.records[i];
        rec.question_id = q.id;
        rec.strategy = strategy;
        const auto fail = [&](std::string error) {
            rec.failed = true;
            rec.response.clear();
            rec.error = std::move(error);
        };

        std::optional<ExpertOpinion> opinion;
        if (uses_expert(strategy)) {
            opinion = consult_expert(*backends.expert, q, &cache, options.expert_query);
            if (strategy == StrategyKind::expert_only) {
                rec.prompt = opinion->prompt;
                rec.backend_fingerprint = backends.expert->backend().fingerprint();
                rec.latency_ms = opinion->outcome.latency_ms;
                if (opinion->outcome.ok) {
                    rec.response = opinion->outcome.text;
                } else {
                    fail("expert: " + opinion->outcome.error);
                }
                return;
            }
            if (!opinion->outcome.ok) {
                rec.backend_fingerprint = backends.llm->backend().fingerprint();
                fail("expert: " + opinion->outcome.error);
                return;
            }
        }

        FusionRequest req;
        req.question = q.question;
        req.strategy = strategy;
        req.budget_tokens = options.budget_tokens;
        if (opinion) req.expert_opinion = opinion->outcome.text;
        if (uses_bm25(strategy)) {
            for (const auto& hit : store->index.search(q.question, options.top_k)) req.retrieved.push_back(store->chunk(hit.chunk_id));
        }
        rec.backend_fingerprint = backends.llm->backend().fingerprint();
        try {
            rec.prompt = compose_prompt(req, templates, *options.tokenizer);
        } catch (const ValidationError& e) {
            fail(e.what());
            return;
        }

        const auto outcome = cached_generate(*backends.llm, &cache, q.id, std::string(to_string(strategy)), rec.prompt);
        rec.latency_ms = outcome.latency_ms;
        if (!outcome.ok) {
            fail(outcome.error);
            return;
        }
        rec.response = outcome.text;
    });

    run.stats.backend_calls = calls_now() - calls_before;
    run.stats.cache_hits = cache.hits() - hits_before;
    run.stats.failures = static_cast<std::size_t>(std::count_if(run.records.begin(), run.records.end(), [](const auto& r) { return r.failed; }));
    if (!questions.empty() &&
        static_cast<double>(run.stats.failures) / static_cast<double>(questions.size()) > options.failure_ceiling) {
        throw FailureCeilingExceeded(std::string(to_string(strategy)) + ": " + std::to_string(run.stats.failures) + " of " +
                                     std::to_string(questions.size()) + " questions failed");
    }
    return run;
}

}  // namespace msqa
