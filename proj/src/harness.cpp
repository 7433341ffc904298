#include "msqa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "msqa/cache.hpp"
#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"
#include "msqa/mock_backends.hpp"

namespace msqa {

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& p, std::string_view content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << content;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(p.string() + " is not valid JSON: " + e.what());
    }
}

void require(const std::filesystem::path& p, const std::string& stage, const std::string& needed_by) {
    if (!std::filesystem::exists(p))
        throw DependencyError(stage, needed_by + " needs " + p.string() + "; run `msqa " + stage + "` first");
}

std::string records_name(StrategyKind k) { return "records/" + std::string(to_string(k)) + ".jsonl"; }
std::string metrics_name(StrategyKind k) { return "metrics/" + std::string(to_string(k)) + ".json"; }

}  // namespace

std::string_view code_version() noexcept { return MSQA_VERSION; }

nlohmann::json to_json(const RunManifest& m) {
    return nlohmann::json{{"stage", m.stage},
                          {"config_hash", m.config_hash},
                          {"code_version", m.code_version},
                          {"timings_ms", m.timings_ms},
                          {"backend_fingerprints", m.backend_fingerprints},
                          {"template_hashes", m.template_hashes},
                          {"seeds", m.seeds},
                          {"outputs", m.outputs},
                          {"details", m.details}};
}

struct Harness::Clients {
    std::shared_ptr<GenClient> llm;
    std::shared_ptr<GenClient> expert;
    std::shared_ptr<GenClient> judge;
    std::unique_ptr<EmbeddingProvider> sentence;
    std::unique_ptr<EmbeddingProvider> token;
    std::unique_ptr<ResponseCache> cache;
    PromptTemplates prompts;
    JudgeTemplates judge_prompts;
};

Harness::Harness(RunConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {
    std::filesystem::create_directories(config_.output_dir);
}

Harness::~Harness() = default;

void Harness::log(const std::string& stage, const std::string& message) const {
    if (log_ != nullptr) *log_ << "[" << stage << "] " << message << '\n';
}

Harness::Clients& Harness::clients() {
    if (clients_) return *clients_;
    auto c = std::make_unique<Clients>();
    c->cache = std::make_unique<ResponseCache>(config_.cache_dir);
    c->prompts = PromptTemplates::load(config_.prompts_dir);
    c->judge_prompts = JudgeTemplates::load(config_.prompts_dir);

    const auto make = [&](const std::optional<BackendConfig>& cfg, BackendRole role, MockChatTransport::Handler mock) -> std::shared_ptr<GenClient> {
        if (config_.dry_run) {
            GenBackend b;
            const std::string name = "mock-" + std::string(to_string(role));
            b.endpoint = {"mock://" + name, name, ""};
            b.role = role;
            return std::make_shared<GenClient>(b, std::make_shared<MockChatTransport>(std::move(mock)), config_.retry);
        }
        if (!cfg) return nullptr;
        return std::make_shared<GenClient>(cfg->to_backend(role), std::make_shared<HttpChatTransport>(), config_.retry);
    };

    std::map<std::string, std::string> opinions;
    if (config_.dry_run && !config_.expert_opinions.empty())
        opinions = read_json(config_.expert_opinions).get<std::map<std::string, std::string>>();
    c->llm = make(config_.llm, BackendRole::llm, mock::llm_handler());
    c->expert = make(config_.expert, BackendRole::expert, mock::expert_handler(std::move(opinions)));
    c->judge = make(config_.judge, BackendRole::judge, mock::judge_handler());

    if (config_.dry_run) {
        c->sentence = std::make_unique<HashedEmbeddingProvider>(config_.stub_dimension);
        c->token = std::make_unique<HashedEmbeddingProvider>(config_.stub_dimension);
    } else if (config_.embedding) {
        const auto& e = *config_.embedding;
        c->sentence = std::make_unique<HttpEmbeddingProvider>(e.url, e.timeout, c->cache.get(), e.batch_size, e.auth_env);
        c->token = std::make_unique<HttpEmbeddingProvider>(e.url, e.timeout, c->cache.get(), e.batch_size, e.auth_env);
    }
    clients_ = std::move(c);
    return *clients_;
}

std::size_t Harness::backend_calls() const {
    if (!clients_) return 0;
    std::size_t n = 0;
    for (const auto* c : {clients_->llm.get(), clients_->expert.get(), clients_->judge.get()}) {
        if (c != nullptr) n += c->transport_calls();
    }
    return n;
}

void Harness::write_manifest(RunManifest m, std::chrono::steady_clock::time_point start,
                             const std::vector<std::string>& outputs) const {
    m.config_hash = config_.hash;
    m.code_version = std::string(code_version());
    m.timings_ms[m.stage] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    m.seeds["split"] = config_.split_seed;
    m.seeds["ab"] = config_.ab_seed;
    for (const auto& rel : outputs) m.outputs[rel] = sha256_hex(read_file(output(rel)));
    write_json(output(m.stage + ".manifest.json"), to_json(m));
}

std::vector<QARecord> Harness::load_clean() const {
    const auto path = output("clean/corpus.jsonl");
    require(path, "clean", "this stage");
    auto load = load_corpus(path);
    if (!load.malformed.empty()) throw ValidationError(path.string() + " has malformed lines; rerun `msqa clean`");
    return std::move(load.records);
}

std::vector<QARecord> Harness::test_questions() const {
    require(output("split.json"), "split", "run");
    const auto corpus = load_clean();
    const auto sp = split_from_json(read_json(output("split.json")));
    std::map<std::string, const QARecord*> by_id;
    for (const auto& r : corpus) by_id[r.id] = &r;
    std::vector<QARecord> out;
    for (const auto& id : sp.test) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw DependencyError("split", "split.json names " + id + ", which is not in the cleaned corpus; rerun `msqa split`");
        out.push_back(*it->second);
    }
    return out;
}

CleanResult Harness::clean() {
    const auto start = std::chrono::steady_clock::now();
    auto load = load_corpus(config_.raw_corpus);
    CleanOptions opts;
    opts.extra_user_id_patterns = config_.user_id_patterns;
    opts.boilerplate_patterns = config_.boilerplate_patterns;
    opts.length_limit = config_.length_limit;
    opts.tokenizer = make_tokenizer(config_.clean_tokenizer);
    auto result = Cleaner(opts).run(load.records, config_.clean_rules);
    for (const auto& m : load.malformed) {
        result.report.dropped.push_back({m.id, "malformed line " + std::to_string(m.line_number) + ": " + m.reason});
        ++result.report.input_count;
    }
    save_corpus(output("clean/corpus.jsonl"), result.records);
    write_json(output("clean/clean_report.json"), to_json(result.report));
    RunManifest m;
    m.stage = "clean";
    m.details = {{"tokenizer", config_.clean_tokenizer}, {"length_limit", config_.length_limit}, {"input", config_.raw_corpus.string()}};
    write_manifest(m, start, {"clean/corpus.jsonl", "clean/clean_report.json"});
    log("clean", std::to_string(result.report.input_count) + " records in, " + std::to_string(result.report.output_count) + " kept, " +
                     std::to_string(result.report.dropped.size()) + " dropped");
    return result;
}

SplitResult Harness::split() {
    const auto start = std::chrono::steady_clock::now();
    const auto corpus = load_clean();
    auto sp = msqa::split(corpus, config_.split_ratio, config_.split_seed);
    write_json(output("split.json"), to_json(sp));
    RunManifest m;
    m.stage = "split";
    m.details = {{"ratio", config_.split_ratio}};
    write_manifest(m, start, {"split.json"});
    log("split", std::to_string(sp.train.size()) + " train / " + std::to_string(sp.test.size()) + " test");
    return sp;
}

CorpusStats Harness::stats() {
    const auto start = std::chrono::steady_clock::now();
    const auto corpus = load_clean();
    const auto tok = make_tokenizer(config_.stats_tokenizer);
    auto s = compute_stats(corpus, *tok);
    write_json(output("stats.json"), to_json(s));
    RunManifest m;
    m.stage = "stats";
    write_manifest(m, start, {"stats.json"});
    log("stats", std::to_string(s.record_count) + " records, " + std::to_string(s.tag_count) + " tags");
    return s;
}

InstructionBuild Harness::instructions() {
    const auto start = std::chrono::steady_clock::now();
    require(output("split.json"), "split", "instructions");
    const auto corpus = load_clean();
    const auto sp = split_from_json(read_json(output("split.json")));
    const std::set<std::string> train_ids(sp.train.begin(), sp.train.end());
    std::vector<QARecord> train;
    for (const auto& r : corpus) {
        if (train_ids.count(r.id)) train.push_back(r);
    }
    InstructionOptions opts;
    opts.instruction_template = config_.instruction_template;
    opts.exclude_over_length = config_.exclude_over_length;
    auto build = build_tuples(train, opts);
    save_instructions(output("instructions.jsonl"), build.tuples);
    write_json(output("instructions_report.json"),
               {{"tuples", build.tuples.size()}, {"fallback_ids", build.fallback_ids}, {"skipped_ids", build.skipped_ids}});
    RunManifest m;
    m.stage = "instructions";
    m.template_hashes["instruction"] = sha256_hex(config_.instruction_template);
    write_manifest(m, start, {"instructions.jsonl", "instructions_report.json"});
    log("instructions", std::to_string(build.tuples.size()) + " tuples, " + std::to_string(build.fallback_ids.size()) + " untagged");
    return build;
}

RetrievalStore Harness::index() {
    const auto start = std::chrono::steady_clock::now();
    if (config_.docs_dir.empty()) throw ValidationError("index needs a docs directory in the config");
    const auto docs = load_markdown_tree(config_.docs_dir);
    std::vector<std::string> warnings;
    auto store = build_store(docs, config_.chunking, config_.bm25, &warnings);
    save_store(output("index.json"), store);
    RunManifest m;
    m.stage = "index";
    m.details = {{"docs", docs.size()},
                 {"chunks", store.chunks.size()},
                 {"k1", config_.bm25.k1},
                 {"b", config_.bm25.b},
                 {"target_tokens", config_.chunking.target_tokens},
                 {"overlap_tokens", config_.chunking.overlap_tokens},
                 {"tokenizer", "normalized_terms"},
                 {"warnings", warnings}};
    write_manifest(m, start, {"index.json"});
    log("index", std::to_string(docs.size()) + " docs, " + std::to_string(store.chunks.size()) + " chunks");
    return store;
}

RunStageResult Harness::run() {
    const auto start = std::chrono::steady_clock::now();
    const auto questions = test_questions();
    std::optional<RetrievalStore> store;
    const bool needs_bm25 = std::any_of(config_.strategies.begin(), config_.strategies.end(), [](auto k) { return uses_bm25(k); });
    if (needs_bm25) {
        require(output("index.json"), "index", "run with a BM25 strategy");
        store = load_store(output("index.json"));
    }
    auto& c = clients();
    RunOptions opts;
    opts.top_k = config_.top_k;
    opts.budget_tokens = config_.budget_tokens;
    opts.workers = config_.workers;
    opts.failure_ceiling = config_.failure_ceiling;
    opts.expert_query.instruction_template = config_.instruction_template;

    RunStageResult result;
    RunManifest m;
    m.stage = "run";
    std::vector<std::string> outputs;
    for (StrategyKind k : config_.strategies) {
        const auto t0 = std::chrono::steady_clock::now();
        auto sr = run_strategy(questions, k, {c.llm, c.expert}, store ? &*store : nullptr, *c.cache, c.prompts, opts);
        save_records(output(records_name(k)), sr.records);
        outputs.push_back(records_name(k));
        result.stats[k] = sr.stats;
        result.records += sr.records.size();
        m.timings_ms[std::string(to_string(k))] =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        m.details["strategies"][std::string(to_string(k))] = {
            {"records", sr.records.size()}, {"failures", sr.stats.failures}, {"backend_calls", sr.stats.backend_calls}, {"cache_hits", sr.stats.cache_hits}};
        log("run", std::string(to_string(k)) + ": " + std::to_string(sr.records.size()) + " records, " +
                       std::to_string(sr.stats.failures) + " failed, " + std::to_string(sr.stats.backend_calls) + " backend calls, " +
                       std::to_string(sr.stats.cache_hits) + " cache hits");
    }
    if (c.llm) m.backend_fingerprints["llm"] = c.llm->backend().fingerprint();
    if (c.expert) m.backend_fingerprints["expert"] = c.expert->backend().fingerprint();
    m.template_hashes["llm_prompt"] = c.prompts.hash();
    m.template_hashes["expert_instruction"] = sha256_hex(config_.instruction_template);
    m.details["top_k"] = config_.top_k;
    m.details["budget_tokens"] = config_.budget_tokens;
    write_manifest(m, start, outputs);
    return result;
}

std::vector<MetricReport> Harness::eval() {
    const auto start = std::chrono::steady_clock::now();
    for (StrategyKind k : config_.strategies) require(output(records_name(k)), "run", "eval");
    const auto questions = test_questions();
    std::map<std::string, std::string> golden;
    std::map<std::string, std::string> question_text;
    for (const auto& q : questions) {
        golden[q.id] = q.answer;
        question_text[q.id] = q.question;
    }
    auto& c = clients();
    EvalResources res{c.sentence.get(), c.token.get(), c.judge.get(), c.cache.get()};
    EvalOptions opts;
    opts.ab_seed = config_.ab_seed;
    opts.workers = config_.workers;
    opts.nar_tier = config_.nar_tier;
    opts.templates = c.judge_prompts;

    std::vector<MetricReport> reports;
    std::vector<std::string> outputs;
    for (StrategyKind k : config_.strategies) {
        const auto records = load_records(output(records_name(k)));
        auto rep = evaluate_run(records, golden, question_text, res, opts);
        write_json(output(metrics_name(k)), to_json(rep));
        outputs.push_back(metrics_name(k));
        log("eval", std::string(to_string(k)) + ": " + std::to_string(rep.sample_count) + " samples, " +
                        std::to_string(rep.skipped.size()) + " metrics skipped");
        reports.push_back(std::move(rep));
    }
    RunManifest m;
    m.stage = "eval";
    m.template_hashes = c.judge_prompts.hashes();
    if (c.judge) m.backend_fingerprints["judge"] = c.judge->backend().fingerprint();
    if (c.sentence) m.backend_fingerprints["embedding"] = c.sentence->id();
    m.details["nar_tier"] = std::string(to_string(config_.nar_tier));
    write_manifest(m, start, outputs);
    return reports;
}

ReportTable Harness::report() {
    const auto start = std::chrono::steady_clock::now();
    std::vector<MetricReport> reports;
    for (StrategyKind k : config_.strategies) {
        require(output(metrics_name(k)), "eval", "report");
        reports.push_back(metric_report_from_json(read_json(output(metrics_name(k)))));
    }
    auto table = build_table(reports);
    write_file(output("report.md"), render_markdown(table));
    write_file(output("report.csv"), render_csv(table));
    write_json(output("report.json"), to_json(table));
    RunManifest m;
    m.stage = "report";
    write_manifest(m, start, {"report.md", "report.csv", "report.json"});
    log("report", "wrote report.md, report.csv, report.json");
    return table;
}

}  // namespace msqa
