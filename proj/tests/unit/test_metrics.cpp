#include <doctest.h>

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "../support/temp_dir.hpp"
#include "msqa/errors.hpp"
#include "msqa/metrics.hpp"
#include "msqa/mock_backends.hpp"
#include "msqa/tokenizer.hpp"

using namespace msqa;
using msqa::testing::TempDir;

namespace {

constexpr std::string_view kTable4Refusal =
    "I'm sorry, but I'm not sure what you mean by the \"price\" for the classification step. Could you please "
    "provide more information or clarify your question?";

std::shared_ptr<GenClient> judge_client(MockChatTransport::Handler h) {
    GenBackend b;
    b.endpoint = {"mock://judge", "judge", ""};
    b.role = BackendRole::judge;
    return std::make_shared<GenClient>(b, std::make_shared<MockChatTransport>(std::move(h)), RetryPolicy{0, {}, 1.0},
                                       [](std::chrono::milliseconds) {});
}

// A judge that prefers the side holding `want` (the candidate text or the golden marker).
MockChatTransport::Handler prefer(std::function<bool(const std::string&)> is_wanted) {
    return [is_wanted](const std::vector<ChatMessage>& m) -> std::string {
        const auto& p = m[0].content;
        if (auto ans = mock::section(p, "[Answer]\n", "\n[End of answer]")) return "GOLD " + *ans;
        const auto a = mock::section(p, "[Answer A]\n", "\n\n[Answer B]\n");
        return is_wanted(*a) ? "A" : "B";
    };
}

GenerationRecord rec(std::string id, std::string response, StrategyKind s = StrategyKind::llm_only) {
    GenerationRecord r;
    r.question_id = std::move(id);
    r.strategy = s;
    r.response = std::move(response);
    return r;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "vm", "key", "the", "Azure", "role"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string s;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + vocab[pick(rng)];
    return s;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("lexical metrics match the formula oracle") {
        std::ifstream in(std::string(MSQA_TEST_DATA_DIR) + "/lexical_expected.json");
        REQUIRE(in);
        const auto cases = nlohmann::json::parse(in);
        REQUIRE(cases.size() == 10);
        for (const auto& c : cases) {
            const auto cand = c["candidate"].get<std::string>();
            const auto ref = c["reference"].get<std::string>();
            CAPTURE(cand);
            CHECK(std::abs(bleu(cand, ref) - c["bleu"].get<double>()) <= 1e-9);
            CHECK(std::abs(rouge_n(cand, ref, 1) - c["rouge1"].get<double>()) <= 1e-9);
            CHECK(std::abs(rouge_n(cand, ref, 2) - c["rouge2"].get<double>()) <= 1e-9);
            CHECK(std::abs(rouge_l(cand, ref) - c["rougeL"].get<double>()) <= 1e-9);
        }
    }

    TEST_CASE("lexical worked examples") {
        CHECK(bleu("the cat sat", "the cat sat down") == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
        CHECK(rouge_n("a b c", "a x c", 1) == doctest::Approx(2.0 / 3.0));
        CHECK(rouge_l("a b c", "a x c") == doctest::Approx(2.0 / 3.0));
        CHECK(bleu("alpha beta", "gamma delta") == 0.0);
        CHECK(rouge_n("alpha beta", "gamma delta", 1) == 0.0);
        CHECK(rouge_l("alpha beta", "gamma delta") == 0.0);
        CHECK(bleu("", "ref") == 0.0);
        CHECK(rouge_n("x", "", 1) == 0.0);
        CHECK(rouge_l("x", "") == 0.0);
        CHECK_THROWS_AS(rouge_n("a", "a", 3), ValidationError);
    }

    TEST_CASE("identity scores 1") {
        for (const char* t : {"yes", "Restart the VM.", "a a a b", "Open Azure Portal > Quotas, then file a request."}) {
            CHECK(bleu(t, t) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(rouge_n(t, t, 1) == 1.0);
            CHECK(rouge_n(t, t, 2) == 1.0);
            CHECK(rouge_l(t, t) == 1.0);
        }
    }

    TEST_CASE("ROUGE-L never exceeds ROUGE-1 and all values stay in range") {
        std::mt19937_64 rng(7);
        for (int i = 0; i < 1000; ++i) {
            const auto a = random_text(rng, 12);
            const auto b = random_text(rng, 12);
            const double r1 = rouge_n(a, b, 1);
            const double rl = rouge_l(a, b);
            CHECK(rl <= r1 + 1e-12);
            for (double v : {bleu(a, b), r1, rouge_n(a, b, 2), rl}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0 + 1e-12);
            }
        }
    }

    TEST_CASE("cosine") {
        CHECK(clamped_cosine({1, 0}, {0, 1}) == 0.0);
        CHECK(clamped_cosine({1, 1}, {1, 0}) == doctest::Approx(0.70710678).epsilon(1e-8));
        CHECK(clamped_cosine({1, 0}, {-1, 0}) == 0.0);
        CHECK(raw_cosine({1, 0}, {-1, 0}) == -1.0);
        CHECK(clamped_cosine({0, 0}, {1, 0}) == 0.0);
        HashedEmbeddingProvider p;
        const auto v = p.embed_sentences({"Rotate the key", "Rotate the key"});
        CHECK(clamped_cosine(v[0], v[1]) == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("BERTScore hand-worked matrix") {
        // Five unit vectors with pairwise cosine 0.5: (e0 + e_k) / sqrt(2).
        const auto u = [](std::size_t k) {
            Vector v(6, 0.0);
            v[0] = v[k] = 1.0 / std::sqrt(2.0);
            return v;
        };
        TokenEmbedding cand{{"c1", "c2"}, {u(1), u(2)}};
        TokenEmbedding ref{{"r1", "r2", "r3", "r4"}, {u(1), u(3), u(4), u(5)}};
        const auto s = bertscore(cand, ref);
        CHECK(s.p == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(s.r == doctest::Approx(0.625).epsilon(1e-12));
        CHECK(s.f1 == doctest::Approx(2 * 0.75 * 0.625 / 1.375).epsilon(1e-12));
        const auto e = bertscore({}, ref);
        CHECK(e.empty);
        CHECK(e.f1 == 0.0);
    }

    TEST_CASE("BERTScore with one-hot vectors reduces to set membership") {
        std::mt19937_64 rng(11);
        OneHotEmbeddingProvider onehot({"a", "b", "c", "d", "e", "vm", "key", "the", "azure", "role"});
        for (int i = 0; i < 500; ++i) {
            const auto a = random_text(rng, 10);
            const auto b = random_text(rng, 10);
            const auto ta = normalized_terms(a);
            const auto tb = normalized_terms(b);
            const auto t = onehot.embed_tokens({a, b});
            const auto s = bertscore(t[0], t[1]);
            const auto mirror = bertscore(t[1], t[0]);
            CHECK(s.p == doctest::Approx(mirror.r).epsilon(1e-12));
            CHECK(s.r == doctest::Approx(mirror.p).epsilon(1e-12));
            if (ta.empty() || tb.empty()) {
                CHECK(s.empty);
                continue;
            }
            const std::set<std::string> sa(ta.begin(), ta.end());
            const std::set<std::string> sb(tb.begin(), tb.end());
            const double p = static_cast<double>(std::count_if(ta.begin(), ta.end(), [&](const auto& x) { return sb.count(x) > 0; })) / ta.size();
            const double r = static_cast<double>(std::count_if(tb.begin(), tb.end(), [&](const auto& x) { return sa.count(x) > 0; })) / tb.size();
            CHECK(std::abs(s.p - p) <= 1e-12);
            CHECK(std::abs(s.r - r) <= 1e-12);
        }
    }

    TEST_CASE("BERTScore symmetry and identity with hashed vectors") {
        std::mt19937_64 rng(3);
        HashedEmbeddingProvider h(32);
        for (int i = 0; i < 200; ++i) {
            const auto a = random_text(rng, 8);
            const auto b = random_text(rng, 8);
            const auto t = h.embed_tokens({a, b});
            const auto s = bertscore(t[0], t[1]);
            const auto m = bertscore(t[1], t[0]);
            CHECK(s.p == m.r);
            CHECK(s.r == m.p);
            for (double v : {s.p, s.r, s.f1}) CHECK((v >= 0.0 && v <= 1.0));
            if (!normalized_terms(a).empty()) {
                const auto self = bertscore(t[0], t[0]);
                CHECK(self.f1 == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }

    TEST_CASE("no-answer patterns") {
        CHECK(matches_no_answer_pattern(kTable4Refusal));
        CHECK(matches_no_answer_pattern(
            "I'm sorry, but based on your question, I'm not entirely sure what you're asking. Could you please provide "
            "more information or clarify your question?"));
        CHECK(matches_no_answer_pattern("I\xE2\x80\x99m not sure what you\xE2\x80\x99re asking."));
        CHECK_FALSE(matches_no_answer_pattern("Yes, this is the expected behavior."));
        CHECK_FALSE(matches_no_answer_pattern(
            "Set the retention policy to 30 days under Diagnostic settings. Let me know if you need clarification."));
        CHECK_FALSE(matches_no_answer_pattern(
            "Use az storage account keys renew. If anything is unclear, feel free to ask for further clarification."));
        CHECK_FALSE(matches_no_answer_pattern(""));
    }

    TEST_CASE("judge tier overrides patterns; failures fall back") {
        auto yes = judge_client([](const auto&) { return std::string("YES, it asks for clarification"); });
        auto v = detect_no_answer("A plain answer.", yes.get());
        CHECK(v.no_answer);
        CHECK(v.judged);
        auto no = judge_client([](const auto&) { return std::string("No."); });
        CHECK_FALSE(detect_no_answer(kTable4Refusal, no.get()).no_answer);
        auto broken = judge_client([](const auto&) -> std::string { throw TransientBackendError("down"); });
        v = detect_no_answer(kTable4Refusal, broken.get());
        CHECK(v.no_answer);
        CHECK(v.flagged);
        CHECK_FALSE(v.judged);
        auto mumble = judge_client([](const auto&) { return std::string("Hard to say"); });
        CHECK(detect_no_answer(kTable4Refusal, mumble.get()).flagged);
    }

    TEST_CASE("nar ratio") {
        bool flags[100] = {};
        flags[3] = flags[50] = flags[99] = true;
        CHECK(nar(flags) == doctest::Approx(0.03));
        bool none[4] = {};
        CHECK(nar(none) == 0.0);
        CHECK_THROWS_AS(nar(std::span<const bool>()), ValidationError);
    }

    TEST_CASE("verdict parsing") {
        CHECK(parse_verdict("A") == Verdict::a);
        CHECK(parse_verdict("  B.") == Verdict::b);
        CHECK(parse_verdict("Answer B is better") == Verdict::b);
        CHECK(parse_verdict("Verdict: A") == Verdict::a);
        CHECK(parse_verdict("TIE") == Verdict::tie);
        CHECK(parse_verdict("**A**") == Verdict::a);
        CHECK(parse_verdict("Both are fine") == Verdict::unparseable);
        CHECK(parse_verdict("") == Verdict::unparseable);
    }

    TEST_CASE("seeded A/B positions are reproducible and mixed") {
        int first = 0;
        for (int i = 0; i < 200; ++i) {
            const auto id = std::to_string(i);
            CHECK(candidate_first(42, id) == candidate_first(42, id));
            first += candidate_first(42, id);
        }
        CHECK(first > 60);
        CHECK(first < 140);
        int differ = 0;
        for (int i = 0; i < 200; ++i) differ += candidate_first(1, std::to_string(i)) != candidate_first(2, std::to_string(i));
        CHECK(differ > 0);
    }

    TEST_CASE("llm_eval with degenerate and length-preferring judges") {
        std::vector<GenerationRecord> recs{rec("1", "short"), rec("2", "a considerably longer candidate answer"),
                                           rec("3", "mid length answer"), rec("4", "tiny")};
        std::map<std::string, std::string> golden{{"1", "golden answer one"}, {"2", "g2"}, {"3", "golden three!"}, {"4", "golden four"}};
        std::map<std::string, std::string> candidates;
        for (const auto& r : recs) candidates[r.question_id] = r.response;
        const auto is_candidate = [&](const std::string& s) {
            for (const auto& [_, c] : candidates) {
                if (c == s) return true;
            }
            return false;
        };

        EvalResources res;
        auto cand_judge = judge_client(prefer(is_candidate));
        res.judge = cand_judge.get();
        CHECK(*evaluate_run(recs, golden, {}, res).value(Metric::llm_eval) == 1.0);

        auto gold_judge = judge_client(prefer([&](const std::string& s) { return !is_candidate(s); }));
        res.judge = gold_judge.get();
        CHECK(*evaluate_run(recs, golden, {}, res).value(Metric::llm_eval) == 0.0);

        // Rephrase is the identity; the longer text wins. By hand: 1 loses (5 < 17), 2 wins (38 > 2),
        // 3 wins (17 > 13), 4 loses (4 < 11) -> 2/4.
        auto longer = judge_client(mock::judge_handler());
        res.judge = longer.get();
        EvalOptions opts;
        for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
            opts.ab_seed = seed;
            CHECK(*evaluate_run(recs, golden, {}, res, opts).value(Metric::llm_eval) == 0.5);
        }
    }

    TEST_CASE("llm_eval re-asks once, then counts not superior") {
        int calls = 0;
        auto stubborn = judge_client([&](const std::vector<ChatMessage>& m) -> std::string {
            if (m[0].content.find("[Answer]\n") != std::string::npos) return "rephrased";
            ++calls;
            return "Both have merit";
        });
        const auto out = judge_pair(*stubborn, "q", "question", "cand", "gold", {}, nullptr);
        CHECK(calls == 2);
        CHECK(out.flagged);
        CHECK_FALSE(out.candidate_superior);

        int n = 0;
        auto late = judge_client([&](const std::vector<ChatMessage>& m) -> std::string {
            if (m[0].content.find("[Answer]\n") != std::string::npos) return "rephrased";
            return ++n == 1 ? "hmm" : (candidate_first(0, "q") ? "A" : "B");
        });
        const auto ok = judge_pair(*late, "q", "question", "cand", "gold", {}, nullptr);
        CHECK_FALSE(ok.flagged);
        CHECK(ok.candidate_superior);

        auto tie = judge_client([](const std::vector<ChatMessage>&) { return std::string("TIE"); });
        CHECK_FALSE(judge_pair(*tie, "q", "", "c", "g", {}, nullptr).candidate_superior);
    }

    TEST_CASE("evaluate_run: perfect responses") {
        std::vector<GenerationRecord> recs{rec("1", "Restart the app service."), rec("2", "Yes, this is the expected behavior.")};
        std::map<std::string, std::string> golden{{"1", "Restart the app service."}, {"2", "Yes, this is the expected behavior."}};
        HashedEmbeddingProvider h;
        EvalResources res{&h, &h, nullptr, nullptr};
        const auto r = evaluate_run(recs, golden, {}, res);
        for (Metric m : {Metric::bleu, Metric::rouge1, Metric::rouge2, Metric::rougeL, Metric::cosine_sim, Metric::bertscore_p,
                         Metric::bertscore_r, Metric::bertscore_f1}) {
            CAPTURE(to_string(m));
            CHECK(r.value(m).value() == doctest::Approx(1.0).epsilon(1e-6));
        }
        CHECK(r.value(Metric::nar).value() == 0.0);
        CHECK_FALSE(r.value(Metric::llm_eval).has_value());
        CHECK(r.skipped.at("llm_eval") == "no judge backend configured");
        CHECK(r.nar_tier == "pattern");
    }

    TEST_CASE("evaluate_run: aggregates, skips, failures") {
        std::vector<GenerationRecord> recs{rec("a", "the cat sat"), rec("b", std::string(kTable4Refusal)), rec("c", "x")};
        recs[2].failed = true;
        recs[2].response.clear();
        recs[2].error = "timeout";
        std::map<std::string, std::string> golden{{"a", "the cat sat down"}, {"b", "Use the portal."}, {"c", "x"}};
        const auto r = evaluate_run(recs, golden, {}, {});
        CHECK(r.skipped.count("cosine_sim"));
        CHECK(r.skipped.count("bertscore_f1"));
        CHECK_FALSE(r.aggregate.count("cosine_sim"));
        CHECK(r.value(Metric::nar).value() == doctest::Approx(2.0 / 3.0));
        double mean = 0;
        for (const auto& [_, m] : r.per_sample) mean += m.at("bleu");
        CHECK(r.value(Metric::bleu).value() == doctest::Approx(mean / 3.0));
        CHECK(r.per_sample.at("c").at("bleu") == 0.0);
        CHECK(r.flags.count("c"));

        CHECK_THROWS_AS(evaluate_run({}, golden, {}, {}), ValidationError);
        std::vector<GenerationRecord> missing{rec("zzz", "x")};
        CHECK_THROWS_AS(evaluate_run(missing, golden, {}, {}), ValidationError);
        std::vector<GenerationRecord> mixed{rec("a", "x"), rec("b", "y", StrategyKind::llm_bm25)};
        CHECK_THROWS_AS(evaluate_run(mixed, golden, {}, {}), ValidationError);

        const auto back = metric_report_from_json(to_json(r));
        CHECK(to_json(back) == to_json(r));
    }

    TEST_CASE("evaluate_run: failing provider marks samples unmetricated") {
        struct Flaky final : EmbeddingProvider {
            std::string id() const override { return "flaky"; }
            std::vector<Vector> embed_sentences(const std::vector<std::string>& t) override {
                if (t[0] == "bad") throw TransientBackendError("503");
                return HashedEmbeddingProvider().embed_sentences(t);
            }
            std::vector<TokenEmbedding> embed_tokens(const std::vector<std::string>&) override { throw ProtocolError("no"); }
        } flaky;
        std::vector<GenerationRecord> recs{rec("a", "bad"), rec("b", "good answer")};
        std::map<std::string, std::string> golden{{"a", "good answer"}, {"b", "good answer"}};
        const auto r = evaluate_run(recs, golden, {}, {&flaky, &flaky, nullptr, nullptr});
        CHECK(r.unmetricated.at("cosine_sim") == 1);
        CHECK(r.value(Metric::cosine_sim).value() == doctest::Approx(1.0));
        CHECK(r.skipped.at("bertscore_p") == "provider failed for every sample");
        CHECK(r.unmetricated.at("bertscore_p") == 2);
    }

    TEST_CASE("judge NAR tier is named in the report") {
        auto judge = judge_client(mock::judge_handler());
        std::vector<GenerationRecord> recs{rec("a", std::string(kTable4Refusal)), rec("b", "Do X.")};
        std::map<std::string, std::string> golden{{"a", "g"}, {"b", "g"}};
        EvalOptions opts;
        opts.nar_tier = NarTier::judge;
        const auto r = evaluate_run(recs, golden, {}, {nullptr, nullptr, judge.get(), nullptr}, opts);
        CHECK(r.nar_tier == "judge");
        CHECK(r.value(Metric::nar).value() == 0.5);
        const auto fallback = evaluate_run(recs, golden, {}, {}, opts);
        CHECK(fallback.nar_tier == "pattern");
        CHECK_FALSE(fallback.warnings.empty());
    }

    TEST_CASE("judge templates load from files with hashes") {
        TempDir dir;
        {
            std::ofstream(dir / "judge_rephrase.txt") << "Say it again: {answer}";
        }
        const auto t = JudgeTemplates::load(dir.path());
        CHECK(t.rephrase == "Say it again: {answer}");
        CHECK(t.pairwise == JudgeTemplates::defaults().pairwise);
        CHECK(t.hashes().at("judge_rephrase") != JudgeTemplates::defaults().hashes().at("judge_rephrase"));
    }
}

TEST_SUITE("embedding") {
    TEST_CASE("hashed provider is deterministic and additive") {
        HashedEmbeddingProvider h(16);
        CHECK(h.term_vector("key") == h.term_vector("key"));
        CHECK(h.term_vector("key") != h.term_vector("keys"));
        const auto s = h.embed_sentences({"Key key", "KEY, key!"});
        CHECK(s[0] == s[1]);
        const auto t = h.embed_tokens({"Rotate the key."});
        REQUIRE(t[0].tokens == std::vector<std::string>{"rotate", "the", "key"});
        CHECK(t[0].vectors.size() == 3);
        for (double x : t[0].vectors[0]) CHECK((x >= -1.0 && x < 1.0));
        CHECK_THROWS_AS(HashedEmbeddingProvider(0), ValidationError);
    }

    TEST_CASE("one-hot provider") {
        OneHotEmbeddingProvider p({"a", "b", "a"});
        const auto s = p.embed_sentences({"a a b"});
        CHECK(s[0] == Vector{2.0, 1.0});
        CHECK_THROWS_AS(p.embed_tokens({"zzz"}), ValidationError);
    }

    TEST_CASE("wire contract parsing") {
        CHECK(make_embed_request({"x"}, Granularity::token) == nlohmann::json{{"texts", {"x"}}, {"granularity", "token"}});
        const auto v = parse_sentence_reply(R"({"dimension":2,"vectors":[[1,0],[0.5,0.5]]})", 2);
        CHECK(v[1] == Vector{0.5, 0.5});
        CHECK_THROWS_AS(parse_sentence_reply(R"({"dimension":3,"vectors":[[1,0]]})", 1), ProtocolError);
        CHECK_THROWS_AS(parse_sentence_reply(R"({"dimension":0,"vectors":[]})", 0), ProtocolError);
        CHECK_THROWS_AS(parse_sentence_reply(R"({"dimension":2,"vectors":[[1,0]]})", 2), ProtocolError);
        const auto t = parse_token_reply(R"({"dimension":1,"vectors":[[[1],[2]]],"tokens":[["a","b"]]})", 1);
        CHECK(t[0].tokens.size() == 2);
        CHECK_THROWS_AS(parse_token_reply(R"({"dimension":1,"vectors":[[[1],[2]]],"tokens":[["a"]]})", 1), ProtocolError);
        CHECK_THROWS_AS(parse_token_reply(R"({"dimension":1,"vectors":[[[1]]]})", 1), ProtocolError);
    }

    TEST_CASE("http provider against a local service") {
        httplib::Server server;
        int requests = 0;
        server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            const auto body = nlohmann::json::parse(req.body);
            HashedEmbeddingProvider h(8);
            const auto texts = body["texts"].get<std::vector<std::string>>();
            nlohmann::json out{{"dimension", 8}};
            if (body["granularity"] == "sentence") {
                out["vectors"] = h.embed_sentences(texts);
            } else {
                const auto t = h.embed_tokens(texts);
                out["vectors"] = nlohmann::json::array();
                out["tokens"] = nlohmann::json::array();
                for (const auto& e : t) {
                    out["vectors"].push_back(e.vectors);
                    out["tokens"].push_back(e.tokens);
                }
            }
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
        server.Post("/guarded", [](const httplib::Request& req, httplib::Response& res) {
            if (req.get_header_value("Authorization") != "Bearer s3cret") {
                res.status = 401;
                return;
            }
            res.set_content(R"({"dimension": 2, "vectors": [[1, 0]]})", "application/json");
        });
        const int port = server.bind_to_any_port("127.0.0.1");
        std::thread th([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        TempDir dir;
        ResponseCache cache(dir.path());
        const std::string base = "http://127.0.0.1:" + std::to_string(port);
        HttpEmbeddingProvider p(base + "/embed", std::chrono::milliseconds(2000), &cache, 2);
        const auto s = p.embed_sentences({"one two", "three", "one two", "four five six"});
        CHECK(s[0] == s[2]);
        CHECK(s[0] == HashedEmbeddingProvider(8).embed_sentences({"one two"})[0]);
        CHECK(requests == 2);  // three distinct texts in batches of two
        const auto t = p.embed_tokens({"alpha beta"});
        CHECK(t[0].tokens.size() == t[0].vectors.size());
        const auto self = bertscore(t[0], t[0]);
        CHECK(self.f1 == doctest::Approx(1.0).epsilon(1e-9));

        HttpEmbeddingProvider again(base + "/embed", std::chrono::milliseconds(2000), &cache, 2);
        const int before = requests;
        again.embed_sentences({"three"});
        CHECK(requests == before);  // served from the persistent cache

        HttpEmbeddingProvider down(base + "/down");
        CHECK_THROWS_AS(down.embed_sentences({"x"}), TransientBackendError);

        ::setenv("MSQA_TEST_EMBED_TOKEN", "s3cret", 1);
        HttpEmbeddingProvider guarded(base + "/guarded", std::chrono::milliseconds(2000), nullptr, 32, "MSQA_TEST_EMBED_TOKEN");
        CHECK(guarded.embed_sentences({"x"})[0] == Vector{1.0, 0.0});
        HttpEmbeddingProvider anonymous(base + "/guarded");
        CHECK_THROWS_AS(anonymous.embed_sentences({"x"}), BackendError);
        server.stop();
        th.join();
    }
}
