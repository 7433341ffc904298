#include "msqa/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "msqa/errors.hpp"

namespace msqa {

namespace {

// Both formats show four decimals of the underlying ratio.
long long display_units(double v) { return std::llround(v * 1e4); }

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

ReportTable build_table(std::span<const MetricReport> reports) {
    if (reports.empty()) throw ValidationError("no metric reports to tabulate");
    std::vector<const MetricReport*> ordered;
    for (StrategyKind k : kAllStrategies) {
        const auto n = std::count_if(reports.begin(), reports.end(), [&](const auto& r) { return r.strategy == k; });
        if (n > 1) throw ValidationError("two metric reports for " + std::string(to_string(k)));
        if (n == 1) ordered.push_back(&*std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.strategy == k; }));
    }
    ReportTable t;
    for (const auto* r : ordered) t.columns.push_back(r->strategy);
    t.rows.assign(kAllMetrics.begin(), kAllMetrics.end());
    for (Metric m : t.rows) {
        std::vector<std::optional<double>> row;
        for (const auto* r : ordered) row.push_back(r->value(m));
        std::optional<long long> best;
        for (const auto& v : row) {
            if (!v) continue;
            const auto u = display_units(*v);
            if (!best || (lower_is_better(m) ? u < *best : u > *best)) best = u;
        }
        std::vector<bool> marks;
        for (const auto& v : row) marks.push_back(v && best && display_units(*v) == *best);
        t.cells.push_back(std::move(row));
        t.best.push_back(std::move(marks));
    }
    return t;
}

std::string format_cell(Metric metric, double value) {
    char buf[32];
    if (is_ratio_metric(metric)) {
        std::snprintf(buf, sizeof buf, "%.2f%%", value * 100.0);
    } else {
        std::snprintf(buf, sizeof buf, "%.4f", value);
    }
    return buf;
}

std::string render_markdown(const ReportTable& t) {
    std::string out = "| Metric |";
    for (auto c : t.columns) (out += ' ') += std::string(column_label(c)) + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += "---:|";
    out += '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += "| " + std::string(row_label(t.rows[r])) + " |";
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto& v = t.cells[r][c];
            std::string cell = v ? format_cell(t.rows[r], *v) : "skipped";
            if (t.best[r][c]) cell = "**" + cell + "**";
            out += ' ' + cell + " |";
        }
        out += '\n';
    }
    return out;
}

std::string render_csv(const ReportTable& t) {
    std::string out = "metric";
    for (auto c : t.columns) out += ',' + csv_field(column_label(c));
    out += ",best\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += csv_field(row_label(t.rows[r]));
        std::string best;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto& v = t.cells[r][c];
            out += ',' + (v ? format_cell(t.rows[r], *v) : std::string("skipped"));
            if (t.best[r][c]) best += (best.empty() ? "" : "; ") + std::string(column_label(t.columns[c]));
        }
        out += ',' + csv_field(best) + '\n';
    }
    return out;
}

nlohmann::json to_json(const ReportTable& t) {
    nlohmann::json cols = nlohmann::json::array();
    for (auto c : t.columns) cols.push_back(std::string(to_string(c)));
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        nlohmann::json cells = nlohmann::json::object();
        nlohmann::json best = nlohmann::json::array();
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto name = std::string(to_string(t.columns[c]));
            cells[name] = t.cells[r][c] ? nlohmann::json(*t.cells[r][c]) : nlohmann::json("skipped");
            if (t.best[r][c]) best.push_back(name);
        }
        rows.push_back({{"metric", std::string(to_string(t.rows[r]))}, {"values", cells}, {"best", best}});
    }
    return {{"columns", cols}, {"rows", rows}};
}

}  // namespace msqa
