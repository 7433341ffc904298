#include <CLI11.hpp>

#include <iostream>

#include "msqa/errors.hpp"
#include "msqa/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kDependency = 2, kCeiling = 3 };

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain QA harness: cleaning, instruction data, BM25 retrieval, knowledge-fusion runs and scoring"};
    app.set_version_flag("--version", std::string(msqa::code_version()));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    bool dry_run = false;
    std::string strategies;
    app.add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--output-dir", output_dir, "Override output_dir from the config");
    auto* seed_opt = app.add_option("--seed-override", seed, "Replace the split and A/B seeds");
    app.add_flag("--dry-run", dry_run, "Use in-process mock backends and stub embeddings");
    auto* strat_opt = app.add_option("--strategies", strategies, "Comma-separated strategies, e.g. LLM_ONLY,LLM_BM25");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"clean", "Apply the cleaning rules to the raw corpus"},
        {"split", "Split the cleaned corpus into train and test"},
        {"stats", "Corpus statistics"},
        {"instructions", "Build instruction tuples from the train split"},
        {"index", "Chunk the docs and build the BM25 index"},
        {"run", "Generate responses for every selected strategy"},
        {"eval", "Score the generated responses"},
        {"report", "Render the metric table"},
        {"all", "Run every stage in order"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        msqa::ConfigOverrides ov;
        if (*out_opt) ov.output_dir = std::filesystem::absolute(output_dir);
        if (*seed_opt) ov.seed = seed;
        if (*strat_opt) ov.strategies = split_list(strategies);
        ov.dry_run = dry_run;
        msqa::Harness h(msqa::load_config(config_path, ov), &std::cerr);

        const auto stage = [&](const std::string& name) {
            if (name == "clean") {
                std::cout << msqa::to_json(h.clean().report).dump(2) << '\n';
            } else if (name == "split") {
                const auto s = h.split();
                std::cout << "train " << s.train.size() << ", test " << s.test.size() << ", seed " << s.seed << '\n';
            } else if (name == "stats") {
                std::cout << msqa::to_json(h.stats()).dump(2) << '\n';
            } else if (name == "instructions") {
                std::cout << h.instructions().tuples.size() << " tuples -> " << h.output("instructions.jsonl").string() << '\n';
            } else if (name == "index") {
                std::cout << h.index().chunks.size() << " chunks -> " << h.output("index.json").string() << '\n';
            } else if (name == "run") {
                const auto r = h.run();
                std::size_t calls = 0;
                for (const auto& [_, s] : r.stats) calls += s.backend_calls;
                std::cout << r.records << " records, " << calls << " backend calls\n";
            } else if (name == "eval") {
                std::cout << h.eval().size() << " metric reports -> " << h.output("metrics").string() << '\n';
            } else if (name == "report") {
                std::cout << msqa::render_markdown(h.report());
            }
        };
        if (command == "all") {
            for (const char* s : {"clean", "split", "stats", "instructions", "index", "run", "eval", "report"}) {
                if (std::string(s) == "index" && h.config().docs_dir.empty()) continue;
                stage(s);
            }
        } else {
            stage(command);
        }
        return kOk;
    } catch (const msqa::DependencyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDependency;
    } catch (const msqa::FailureCeilingExceeded& e) {
        std::cerr << "error: backend failure ceiling exceeded: " << e.what() << '\n';
        return kCeiling;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
}
