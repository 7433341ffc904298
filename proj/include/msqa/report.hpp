#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "msqa/metrics.hpp"

namespace msqa {

/// Metrics as rows, strategies as columns in canonical order. A missing cell
/// is a skipped metric. Best cells are compared at display precision, so
/// values that print the same are bolded together.
struct ReportTable {
    std::vector<StrategyKind> columns;
    std::vector<Metric> rows;
    std::vector<std::vector<std::optional<double>>> cells;  // [row][column]
    std::vector<std::vector<bool>> best;                    // [row][column]
};

/// Throws ValidationError on an empty input or a repeated strategy.
ReportTable build_table(std::span<const MetricReport> reports);

// "0.1234", or "4.00%" for NAR and LLM Eval.
std::string format_cell(Metric metric, double value);

std::string render_markdown(const ReportTable& table);
// Plain values plus a trailing "best" column naming the winning column(s).
std::string render_csv(const ReportTable& table);
nlohmann::json to_json(const ReportTable& table);

}  // namespace msqa
