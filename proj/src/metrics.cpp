#include "msqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"
#include "msqa/tokenizer.hpp"
#include "msqa/worker_pool.hpp"

namespace msqa {

namespace {

using Counts = std::map<std::string, int>;

Counts ngram_counts(const std::vector<std::string>& terms, std::size_t n) {
    Counts counts;
    if (terms.size() < n) return counts;
    for (std::size_t i = 0; i + n <= terms.size(); ++i) {
        std::string key = terms[i];
        for (std::size_t k = 1; k < n; ++k) (key += '\x1f') += terms[i + k];
        ++counts[key];
    }
    return counts;
}

int clipped_overlap(const Counts& cand, const Counts& ref) {
    int overlap = 0;
    for (const auto& [gram, c] : cand) {
        const auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(c, it->second);
    }
    return overlap;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Single pass, so substituted values are never rescanned for placeholders.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string_view>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                const auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string read_or(const std::filesystem::path& path, std::string fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string straighten_quotes(std::string_view text) {
    std::string out(text);
    for (const std::string_view curly : {"\xE2\x80\x99", "\xE2\x80\x98"}) {
        for (auto p = out.find(curly); p != std::string::npos; p = out.find(curly, p + 1)) out.replace(p, curly.size(), "'");
    }
    return out;
}

const std::vector<std::regex>& no_answer_patterns() {
    static const std::vector<std::regex> patterns = [] {
        const auto flags = std::regex::ECMAScript | std::regex::icase | std::regex::optimize;
        std::vector<std::regex> p;
        p.emplace_back(R"(not (?:entirely |quite |completely |exactly |really )?(?:sure|certain|clear) (?:what|which) you(?:'re| are)? (?:mean|asking|referring|trying))", flags);
        p.emplace_back(R"((?:could|can|would) you (?:please )?(?:provide|give|share)(?: me| us)? (?:some |a bit |a little )?(?:more|additional|further) (?:information|details|context))", flags);
        p.emplace_back(R"((?:could|can|would) you (?:please )?(?:clarify|rephrase) (?:your|the|what))", flags);
        p.emplace_back(R"(please (?:clarify|rephrase) your question)", flags);
        p.emplace_back(R"((?:i'm|i am) (?:unable|not able) to understand (?:your|the) question)", flags);
        return p;
    }();
    return patterns;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
    static const std::regex re(R"(^\W*(yes|no)\b)", std::regex::ECMAScript | std::regex::icase);
    std::cmatch m;
    if (!std::regex_search(reply.data(), reply.data() + reply.size(), m, re)) return std::nullopt;
    const char c = m[1].str()[0];
    return c == 'y' || c == 'Y';
}

constexpr std::string_view kDefaultRephrase =
    "Rephrase the following answer in your own words. Keep every fact, step and caveat, add nothing new, "
    "and reply with the rephrased answer only.\n"
    "\n"
    "[Answer]\n"
    "{answer}\n"
    "[End of answer]\n";

constexpr std::string_view kDefaultPairwise =
    "You are comparing two answers to a user's question about Microsoft cloud products.\n"
    "Judge which answer is more helpful, correct and complete. Ignore differences in length or style.\n"
    "\n"
    "[Question]\n"
    "{question}\n"
    "\n"
    "[Answer A]\n"
    "{answer_a}\n"
    "\n"
    "[Answer B]\n"
    "{answer_b}\n"
    "\n"
    "[End of answers]\n"
    "Reply with exactly one of: A, B, TIE.\n";

constexpr std::string_view kDefaultNoAnswer =
    "Does the following response avoid answering the user's question, for example by asking for clarification "
    "or more information instead of giving an answer? Reply with YES or NO.\n"
    "\n"
    "[Response]\n"
    "{response}\n"
    "[End of response]\n";

constexpr std::string_view kReask = "\n\nYour previous reply could not be read. Reply with exactly one of: A, B, TIE.\n";

}  // namespace

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::bleu: return "bleu";
        case Metric::rouge1: return "rouge1";
        case Metric::rouge2: return "rouge2";
        case Metric::rougeL: return "rougeL";
        case Metric::cosine_sim: return "cosine_sim";
        case Metric::bertscore_p: return "bertscore_p";
        case Metric::bertscore_r: return "bertscore_r";
        case Metric::bertscore_f1: return "bertscore_f1";
        case Metric::nar: return "nar";
        case Metric::llm_eval: return "llm_eval";
    }
    return "unknown";
}

std::string_view row_label(Metric m) noexcept {
    switch (m) {
        case Metric::bleu: return "BLEU";
        case Metric::rouge1: return "ROUGE-1";
        case Metric::rouge2: return "ROUGE-2";
        case Metric::rougeL: return "ROUGE-L";
        case Metric::cosine_sim: return "Cosine Sim.";
        case Metric::bertscore_p: return "BERTScore-P";
        case Metric::bertscore_r: return "BERTScore-R";
        case Metric::bertscore_f1: return "BERTScore-F1";
        case Metric::nar: return "NAR";
        case Metric::llm_eval: return "LLM Eval.";
    }
    return "unknown";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : kAllMetrics) {
        if (to_string(m) == name) return m;
    }
    throw ValidationError("unknown metric '" + std::string(name) + "'");
}

bool is_ratio_metric(Metric m) noexcept { return m == Metric::nar || m == Metric::llm_eval; }
bool lower_is_better(Metric m) noexcept { return m == Metric::nar; }

double bleu(std::string_view candidate, std::string_view reference) {
    const auto c = normalized_terms(candidate);
    const auto r = normalized_terms(reference);
    if (c.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const double matches = clipped_overlap(ngram_counts(c, n), ngram_counts(r, n));
        const double total = c.size() >= n ? static_cast<double>(c.size() - n + 1) : 0.0;
        if (n == 1) {
            if (matches == 0.0) return 0.0;
            log_sum += std::log(matches / total);
        } else {
            log_sum += std::log((matches + 1.0) / (total + 1.0));
        }
    }
    const double cl = static_cast<double>(c.size());
    const double rl = static_cast<double>(r.size());
    const double bp = cl < rl ? std::exp(1.0 - rl / cl) : 1.0;
    return bp * std::exp(log_sum / 4.0);
}

double rouge_n(std::string_view candidate, std::string_view reference, int n) {
    if (n != 1 && n != 2) throw ValidationError("rouge_n supports n = 1 or 2");
    const auto c = normalized_terms(candidate);
    const auto r = normalized_terms(reference);
    if (c.empty() || r.empty()) return 0.0;
    if (c == r) return 1.0;
    const auto cn = ngram_counts(c, static_cast<std::size_t>(n));
    const auto rn = ngram_counts(r, static_cast<std::size_t>(n));
    const double overlap = clipped_overlap(cn, rn);
    if (overlap == 0.0) return 0.0;
    const double total_c = static_cast<double>(c.size() - static_cast<std::size_t>(n) + 1);
    const double total_r = static_cast<double>(r.size() - static_cast<std::size_t>(n) + 1);
    return f1(overlap / total_c, overlap / total_r);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = normalized_terms(candidate);
    const auto r = normalized_terms(reference);
    if (c.empty() || r.empty()) return 0.0;
    const double lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0.0) return 0.0;
    return f1(lcs / static_cast<double>(c.size()), lcs / static_cast<double>(r.size()));
}

double clamped_cosine(const Vector& a, const Vector& b) { return std::clamp(raw_cosine(a, b), 0.0, 1.0); }

BertScore bertscore(const TokenEmbedding& candidate, const TokenEmbedding& reference) {
    BertScore s;
    if (candidate.vectors.empty() || reference.vectors.empty()) {
        s.empty = true;
        return s;
    }
    const std::size_t nc = candidate.vectors.size();
    const std::size_t nr = reference.vectors.size();
    std::vector<double> sim(nc * nr);
    for (std::size_t i = 0; i < nc; ++i) {
        for (std::size_t j = 0; j < nr; ++j) sim[i * nr + j] = raw_cosine(candidate.vectors[i], reference.vectors[j]);
    }
    double p = 0.0;
    for (std::size_t i = 0; i < nc; ++i) p += *std::max_element(sim.begin() + static_cast<std::ptrdiff_t>(i * nr),
                                                                sim.begin() + static_cast<std::ptrdiff_t>((i + 1) * nr));
    double r = 0.0;
    for (std::size_t j = 0; j < nr; ++j) {
        double best = sim[j];
        for (std::size_t i = 1; i < nc; ++i) best = std::max(best, sim[i * nr + j]);
        r += best;
    }
    s.p = std::clamp(p / static_cast<double>(nc), 0.0, 1.0);
    s.r = std::clamp(r / static_cast<double>(nr), 0.0, 1.0);
    s.f1 = f1(s.p, s.r);
    return s;
}

JudgeTemplates JudgeTemplates::defaults() {
    return JudgeTemplates{std::string(kDefaultRephrase), std::string(kDefaultPairwise), std::string(kDefaultNoAnswer)};
}

JudgeTemplates JudgeTemplates::load(const std::filesystem::path& dir) {
    auto t = defaults();
    t.rephrase = read_or(dir / "judge_rephrase.txt", t.rephrase);
    t.pairwise = read_or(dir / "judge_pairwise.txt", t.pairwise);
    t.no_answer = read_or(dir / "judge_no_answer.txt", t.no_answer);
    return t;
}

std::map<std::string, std::string> JudgeTemplates::hashes() const {
    return {{"judge_rephrase", sha256_hex(rephrase)}, {"judge_pairwise", sha256_hex(pairwise)}, {"judge_no_answer", sha256_hex(no_answer)}};
}

std::string_view to_string(NarTier t) noexcept { return t == NarTier::judge ? "judge" : "pattern"; }

bool matches_no_answer_pattern(std::string_view response) {
    const std::string text = straighten_quotes(response);
    for (const auto& re : no_answer_patterns()) {
        if (std::regex_search(text, re)) return true;
    }
    return false;
}

NoAnswerVerdict detect_no_answer(std::string_view response, const GenClient* judge, const JudgeTemplates& templates,
                                 ResponseCache* cache, std::string_view question_id) {
    NoAnswerVerdict v;
    v.no_answer = matches_no_answer_pattern(response);
    if (judge == nullptr) return v;
    const auto prompt = fill(templates.no_answer, {{"response", response}});
    const auto out = cached_generate(*judge, cache, std::string(question_id), "JUDGE_NO_ANSWER", prompt);
    const auto parsed = out.ok ? parse_yes_no(out.text) : std::nullopt;
    if (!parsed) {
        v.flagged = true;
        return v;
    }
    v.no_answer = *parsed;
    v.judged = true;
    return v;
}

double nar(std::span<const bool> no_answer) {
    if (no_answer.empty()) throw ValidationError("NAR needs at least one response");
    const auto n = std::count(no_answer.begin(), no_answer.end(), true);
    return static_cast<double>(n) / static_cast<double>(no_answer.size());
}

Verdict parse_verdict(std::string_view reply) {
    static const std::regex re(R"(^[^A-Za-z0-9]*(?:(?:Verdict|Winner|Better|Answer)\s*:?\s*)?(?:Answer\s+)?(A|B|TIE|Tie|tie)\b)",
                               std::regex::ECMAScript);
    std::cmatch m;
    if (!std::regex_search(reply.data(), reply.data() + reply.size(), m, re)) return Verdict::unparseable;
    const auto s = m[1].str();
    if (s == "A") return Verdict::a;
    if (s == "B") return Verdict::b;
    return Verdict::tie;
}

bool candidate_first(std::uint64_t seed, std::string_view question_id) noexcept {
    return (splitmix64(seed ^ fnv1a64(question_id)) & 1U) != 0;
}

PairwiseOutcome judge_pair(const GenClient& judge, std::string_view question_id, std::string_view question,
                           std::string_view candidate, std::string_view golden, const EvalOptions& options,
                           ResponseCache* cache) {
    PairwiseOutcome out;
    out.candidate_was_a = candidate_first(options.ab_seed, question_id);
    const std::string qid(question_id);
    const auto rephrased = cached_generate(judge, cache, qid, "JUDGE_REPHRASE", fill(options.templates.rephrase, {{"answer", golden}}));
    if (!rephrased.ok) {
        out.flagged = true;
        return out;
    }
    const std::string_view a = out.candidate_was_a ? candidate : std::string_view(rephrased.text);
    const std::string_view b = out.candidate_was_a ? std::string_view(rephrased.text) : candidate;
    const auto prompt = fill(options.templates.pairwise, {{"question", question}, {"answer_a", a}, {"answer_b", b}});
    auto reply = cached_generate(judge, cache, qid, "JUDGE_PAIRWISE", prompt);
    Verdict verdict = reply.ok ? parse_verdict(reply.text) : Verdict::unparseable;
    if (verdict == Verdict::unparseable) {
        reply = cached_generate(judge, cache, qid, "JUDGE_PAIRWISE_REASK", prompt + std::string(kReask));
        verdict = reply.ok ? parse_verdict(reply.text) : Verdict::unparseable;
    }
    if (verdict == Verdict::unparseable) {
        out.flagged = true;
        return out;
    }
    out.candidate_superior = (verdict == Verdict::a && out.candidate_was_a) || (verdict == Verdict::b && !out.candidate_was_a);
    return out;
}

std::optional<double> MetricReport::value(Metric m) const {
    const auto it = aggregate.find(std::string(to_string(m)));
    if (it == aggregate.end()) return std::nullopt;
    return it->second;
}

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j{{"strategy", std::string(to_string(r.strategy))},
                     {"sample_count", r.sample_count},
                     {"per_sample", r.per_sample},
                     {"aggregate", r.aggregate},
                     {"skipped", r.skipped},
                     {"unmetricated", r.unmetricated},
                     {"flags", r.flags},
                     {"raw_cosine", r.raw_cosine},
                     {"nar_tier", r.nar_tier},
                     {"template_hashes", r.template_hashes},
                     {"warnings", r.warnings}};
    j["raw_cosine_mean"] = r.raw_cosine_mean ? nlohmann::json(*r.raw_cosine_mean) : nlohmann::json(nullptr);
    return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    try {
        MetricReport r;
        r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        r.sample_count = j.at("sample_count").get<std::size_t>();
        r.per_sample = j.at("per_sample").get<decltype(r.per_sample)>();
        r.aggregate = j.at("aggregate").get<decltype(r.aggregate)>();
        r.skipped = j.at("skipped").get<decltype(r.skipped)>();
        r.unmetricated = j.value("unmetricated", decltype(r.unmetricated){});
        r.flags = j.value("flags", decltype(r.flags){});
        r.raw_cosine = j.value("raw_cosine", decltype(r.raw_cosine){});
        if (j.contains("raw_cosine_mean") && j["raw_cosine_mean"].is_number()) r.raw_cosine_mean = j["raw_cosine_mean"].get<double>();
        r.nar_tier = j.value("nar_tier", std::string{});
        r.template_hashes = j.value("template_hashes", decltype(r.template_hashes){});
        r.warnings = j.value("warnings", std::vector<std::string>{});
        for (const auto& [name, _] : r.aggregate) parse_metric(name);
        for (const auto& [name, _] : r.skipped) parse_metric(name);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed metric report: ") + e.what());
    }
}

MetricReport evaluate_run(std::span<const GenerationRecord> records, const std::map<std::string, std::string>& golden,
                          const std::map<std::string, std::string>& questions, const EvalResources& res,
                          const EvalOptions& options) {
    if (records.empty()) throw ValidationError("cannot evaluate an empty run");
    MetricReport report;
    report.strategy = records.front().strategy;
    report.sample_count = records.size();
    {
        std::set<std::string> seen;
        for (const auto& r : records) {
            if (r.strategy != report.strategy) throw ValidationError("records mix strategies");
            if (!seen.insert(r.question_id).second) throw ValidationError("duplicate record for question " + r.question_id);
            if (!golden.count(r.question_id)) throw ValidationError("no golden answer for question " + r.question_id);
        }
    }

    const std::size_t n = records.size();
    struct Sample {
        std::map<std::string, double> values;
        std::vector<std::string> flags;
        std::vector<std::string> warnings;
        std::optional<double> raw_cos;
        bool no_answer = false;
        bool superior = false;
    };
    std::vector<Sample> samples(n);
    const bool judge_nar = options.nar_tier == NarTier::judge && res.judge != nullptr;
    report.nar_tier = std::string(to_string(judge_nar ? NarTier::judge : NarTier::pattern));
    if (options.nar_tier == NarTier::judge && !judge_nar)
        report.warnings.push_back("judge NAR tier requested without a judge backend; pattern tier used");

    parallel_for(n, options.workers, [&](std::size_t i) {
        const auto& rec = records[i];
        Sample& s = samples[i];
        const std::string candidate = rec.failed ? std::string() : rec.response;
        const std::string& ref = golden.at(rec.question_id);
        if (rec.failed) s.flags.push_back("generation failed: " + rec.error);

        s.values["bleu"] = bleu(candidate, ref);
        s.values["rouge1"] = rouge_n(candidate, ref, 1);
        s.values["rouge2"] = rouge_n(candidate, ref, 2);
        s.values["rougeL"] = rouge_l(candidate, ref);

        if (res.sentence != nullptr) {
            try {
                const auto v = res.sentence->embed_sentences({candidate, ref});
                s.raw_cos = raw_cosine(v.at(0), v.at(1));
                s.values["cosine_sim"] = std::clamp(*s.raw_cos, 0.0, 1.0);
            } catch (const Error& e) {
                s.flags.push_back(std::string("cosine_sim unmetricated: ") + e.what());
            }
        }
        if (res.token != nullptr) {
            try {
                const auto t = res.token->embed_tokens({candidate, ref});
                const auto bs = bertscore(t.at(0), t.at(1));
                if (bs.empty) s.warnings.push_back(rec.question_id + ": BERTScore side without tokens scored 0");
                s.values["bertscore_p"] = bs.p;
                s.values["bertscore_r"] = bs.r;
                s.values["bertscore_f1"] = bs.f1;
            } catch (const Error& e) {
                s.flags.push_back(std::string("bertscore unmetricated: ") + e.what());
            }
        }

        if (rec.failed) {
            s.no_answer = true;
        } else {
            const auto v = detect_no_answer(candidate, judge_nar ? res.judge : nullptr, options.templates, res.cache, rec.question_id);
            s.no_answer = v.no_answer;
            if (v.flagged) s.flags.push_back("no-answer judge failed; pattern tier used");
        }
        s.values["nar"] = s.no_answer ? 1.0 : 0.0;

        if (res.judge != nullptr) {
            if (rec.failed) {
                s.superior = false;
            } else {
                const auto q = questions.find(rec.question_id);
                const auto out = judge_pair(*res.judge, rec.question_id, q == questions.end() ? std::string_view{} : std::string_view(q->second),
                                            candidate, ref, options, res.cache);
                s.superior = out.candidate_superior;
                if (out.flagged) s.flags.push_back("llm_eval verdict unavailable; counted not superior");
            }
            s.values["llm_eval"] = s.superior ? 1.0 : 0.0;
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = records[i].question_id;
        report.per_sample[id] = samples[i].values;
        if (!samples[i].flags.empty()) report.flags[id] = samples[i].flags;
        if (samples[i].raw_cos) report.raw_cosine[id] = *samples[i].raw_cos;
        for (const auto& w : samples[i].warnings) report.warnings.push_back(w);
    }

    for (Metric m : kAllMetrics) {
        const std::string name(to_string(m));
        if ((m == Metric::cosine_sim) && res.sentence == nullptr) {
            report.skipped[name] = "no sentence embedding provider configured";
            continue;
        }
        if ((m == Metric::bertscore_p || m == Metric::bertscore_r || m == Metric::bertscore_f1) && res.token == nullptr) {
            report.skipped[name] = "no token embedding provider configured";
            continue;
        }
        if (m == Metric::llm_eval && res.judge == nullptr) {
            report.skipped[name] = "no judge backend configured";
            continue;
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& s : samples) {
            const auto it = s.values.find(name);
            if (it == s.values.end()) continue;
            sum += it->second;
            ++count;
        }
        if (count < n) report.unmetricated[name] = n - count;
        if (count == 0) {
            report.skipped[name] = "provider failed for every sample";
            continue;
        }
        report.aggregate[name] = sum / static_cast<double>(count);
    }
    if (!report.raw_cosine.empty()) {
        double sum = 0.0;
        for (const auto& [_, v] : report.raw_cosine) sum += v;
        report.raw_cosine_mean = sum / static_cast<double>(report.raw_cosine.size());
    }
    report.template_hashes = options.templates.hashes();
    return report;
}

}  // namespace msqa
