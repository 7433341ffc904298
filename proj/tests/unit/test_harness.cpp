#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "msqa/config.hpp"
#include "msqa/errors.hpp"
#include "msqa/harness.hpp"
#include "../support/temp_dir.hpp"

using namespace msqa;
using msqa::testing::TempDir;

namespace {

const std::filesystem::path kToyConfig = std::filesystem::path(MSQA_SOURCE_DIR) / "configs" / "toy.json";

RunConfig toy(const std::filesystem::path& out) {
    ConfigOverrides o;
    o.output_dir = out;
    return load_config(kToyConfig, o);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MSQA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string problems(const nlohmann::json& doc, const std::filesystem::path& base) {
    try {
        parse_config(doc, base);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("toy config loads with relative paths resolved") {
    TempDir out;
    const auto cfg = toy(out.path());
    CHECK(cfg.dry_run);
    CHECK(cfg.raw_corpus.is_absolute());
    CHECK(std::filesystem::is_regular_file(cfg.raw_corpus));
    CHECK(std::filesystem::is_directory(cfg.docs_dir));
    CHECK(cfg.output_dir == out.path());
    CHECK(cfg.cache_dir == out.path() / "cache");
    CHECK(cfg.strategies.size() == 5);
    CHECK(cfg.hash.size() == 64);
}

TEST_CASE("overrides change the config hash and both seeds") {
    TempDir out;
    const auto a = toy(out.path());
    ConfigOverrides o;
    o.output_dir = out.path();
    o.seed = 99;
    const auto b = load_config(kToyConfig, o);
    CHECK(b.split_seed == 99);
    CHECK(b.ab_seed == 99);
    CHECK(a.hash != b.hash);
    CHECK(toy(out.path()).hash == a.hash);
}

TEST_CASE("validation reports every problem at once") {
    TempDir dir;
    const nlohmann::json doc = {
        {"dataset", {{"raw", "missing.jsonl"}}},
        {"split", {{"ratio", 1.5}}},
        {"bm25", {{"k", 0}, {"b", 2.0}}},
        {"strategies", {"LLM_ONLY", "LLM_MAGIC"}},
        {"workers", 0},
        {"eval", {{"nar_tier", "oracle"}}},
    };
    const auto msg = problems(doc, dir.path());
    CHECK(msg.find("invalid configuration (9 problems)") != std::string::npos);
    for (const char* needle : {"output_dir is required", "split.ratio", "bm25.k must", "bm25.b must", "LLM_MAGIC",
                               "workers must", "nar_tier", "dataset.raw does not exist", "backends.llm is not configured"}) {
        CAPTURE(needle);
        CHECK(msg.find(needle) != std::string::npos);
    }
}

TEST_CASE("wrong types and unset environment variables are reported") {
    TempDir dir;
    std::ofstream(dir / "c.jsonl") << "";
    const nlohmann::json doc = {
        {"dataset", {{"raw", "c.jsonl"}}},
        {"output_dir", "out"},
        {"strategies", {"LLM_ONLY"}},
        {"budget_tokens", "many"},
        {"backends", {{"llm", {{"url", "${MSQA_TEST_SURELY_UNSET_VAR}"}, {"model", "m"}}}}},
    };
    const auto msg = problems(doc, dir.path());
    CHECK(msg.find("budget_tokens has the wrong type") != std::string::npos);
    CHECK(msg.find("MSQA_TEST_SURELY_UNSET_VAR is not set") != std::string::npos);
}

TEST_CASE("dry run needs no backends") {
    TempDir dir;
    std::ofstream(dir / "c.jsonl") << "";
    const nlohmann::json doc = {{"dataset", {{"raw", "c.jsonl"}}}, {"output_dir", "out"}, {"strategies", {"LLM_ONLY"}},
                                {"dry_run", {{"enabled", true}}}};
    CHECK(problems(doc, dir.path()).empty());
}

TEST_CASE("stages report missing inputs by name") {
    TempDir out;
    Harness h(toy(out.path()));
    try {
        h.eval();
        FAIL("eval ran without records");
    } catch (const DependencyError& e) {
        CHECK(std::string(e.what()).find("run `msqa") != std::string::npos);
    }
    CHECK_THROWS_AS(h.split(), DependencyError);
    CHECK_THROWS_AS(h.report(), DependencyError);
}

TEST_CASE("stage outputs carry manifests") {
    TempDir out;
    Harness h(toy(out.path()));
    h.clean();
    h.split();
    std::ifstream in(h.output("split.manifest.json"));
    REQUIRE(in);
    const auto m = nlohmann::json::parse(in);
    CHECK(m["stage"] == "split");
    CHECK(m["config_hash"] == h.config().hash);
    CHECK(m["seeds"]["split"] == 1);
    CHECK(m["outputs"].contains("split.json"));
}

TEST_CASE("cli exit codes") {
    TempDir out;
    const std::string base = "--config " + kToyConfig.string() + " --output-dir " + out.path().string();
    CHECK(run_cli(base + " eval") == 2);
    CHECK(run_cli(base + " all") == 0);
    CHECK(std::filesystem::is_regular_file(out / "report.md"));
    CHECK(run_cli(base + " report") == 0);
    CHECK(run_cli("--config /nonexistent/config.json all") != 0);
    CHECK(run_cli(base + " --strategies LLM_MAGIC run") == 1);
}

}
