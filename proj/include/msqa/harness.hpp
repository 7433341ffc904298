#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msqa/bm25.hpp"
#include "msqa/clean.hpp"
#include "msqa/config.hpp"
#include "msqa/dataset.hpp"
#include "msqa/embedding.hpp"
#include "msqa/fusion.hpp"
#include "msqa/instructions.hpp"
#include "msqa/metrics.hpp"
#include "msqa/report.hpp"

namespace msqa {

/// Provenance written next to every stage output as <stage>.manifest.json.
struct RunManifest {
    std::string stage;
    std::string config_hash;
    std::string code_version;
    std::map<std::string, std::int64_t> timings_ms;
    std::map<std::string, std::string> backend_fingerprints;
    std::map<std::string, std::string> template_hashes;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> outputs;  // path relative to the output dir -> sha256
    nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& manifest);

std::string_view code_version() noexcept;

struct RunStageResult {
    std::map<StrategyKind, RunStats> stats;
    std::size_t records = 0;
};

/// Runs the pipeline stages against one RunConfig. Each stage reads its
/// inputs from the output directory, so stages can be invoked separately;
/// a missing input raises DependencyError naming the command to run first.
class Harness {
public:
    explicit Harness(RunConfig config, std::ostream* log = nullptr);
    ~Harness();

    CleanResult clean();
    SplitResult split();
    CorpusStats stats();
    InstructionBuild instructions();
    RetrievalStore index();
    RunStageResult run();
    std::vector<MetricReport> eval();
    ReportTable report();

    const RunConfig& config() const noexcept { return config_; }
    std::filesystem::path output(const std::string& relative) const { return config_.output_dir / relative; }

    /// Calls that reached any generation transport (mock or HTTP) so far.
    std::size_t backend_calls() const;

private:
    struct Clients;

    std::vector<QARecord> load_clean() const;
    std::vector<QARecord> test_questions() const;
    Clients& clients();
    void write_manifest(RunManifest manifest, std::chrono::steady_clock::time_point start,
                        const std::vector<std::string>& outputs) const;
    void log(const std::string& stage, const std::string& message) const;

    RunConfig config_;
    std::ostream* log_;
    std::unique_ptr<Clients> clients_;
};

}  // namespace msqa
