#pragma once
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tftmtl/errors.hpp"
#include "tftmtl/textio.hpp"

namespace tftmtl {

// All metrics operate on denormalized values (original units) pooled over
// samples and horizon steps.

inline void require_nonempty_pair(const std::vector<double>& y, const std::vector<double>& y_hat, const char* op) {
    if (y.empty() || y.size() != y_hat.size()) {
        throw ContractError(std::string(op) + ": need equal nonzero lengths, got " + std::to_string(y.size()) +
                            " and " + std::to_string(y_hat.size()));
    }
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_nonempty_pair(y, y_hat, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y_hat[i] - y[i]) * (y_hat[i] - y[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

inline double mae(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_nonempty_pair(y, y_hat, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y_hat[i] - y[i]);
    return s / static_cast<double>(y.size());
}

/// Percentage error with a denominator floor guarding zero-sales days.
inline double mape(const std::vector<double>& y, const std::vector<double>& y_hat, double floor = 1.0) {
    require_nonempty_pair(y, y_hat, "mape");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y_hat[i] - y[i]) / std::max(std::abs(y[i]), floor);
    return 100.0 * s / static_cast<double>(y.size());
}

inline double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_nonempty_pair(y, y_hat, "r_squared");
    if (y.size() < 2) throw ContractError("r_squared: need at least 2 points");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_tot += (y[i] - mean) * (y[i] - mean);
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    }
    if (ss_tot == 0.0) throw UndefinedMetricError("r_squared: zero variance in reference values");
    return 1.0 - ss_res / ss_tot;
}

/// Multi-Task Efficiency Score: harmonic mean of the per-task normalized
/// accuracy scores max(0, 1 − MAPE/100); zero when both scores vanish.
inline double mtes(double sales_mape_percent, double inventory_mape_percent) {
    if (sales_mape_percent < 0 || inventory_mape_percent < 0) {
        throw ContractError("mtes: MAPE values must be nonnegative");
    }
    const double s1 = std::max(0.0, 1.0 - sales_mape_percent / 100.0);
    const double s2 = std::max(0.0, 1.0 - inventory_mape_percent / 100.0);
    if (s1 + s2 == 0.0) return 0.0;
    return 2.0 * s1 * s2 / (s1 + s2);
}

/// 100·(baseline − candidate)/baseline: positive when the candidate improves.
inline double relative_improvement(double baseline, double candidate) {
    if (!(baseline > 0)) throw ContractError("relative_improvement: baseline must be positive");
    return 100.0 * (baseline - candidate) / baseline;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct TaskMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double mape_percent = 0.0;
    double r_squared = 0.0;
    std::size_t num_predictions = 0;
};

inline TaskMetrics task_metrics(const std::vector<double>& y, const std::vector<double>& y_hat) {
    TaskMetrics m;
    m.rmse = rmse(y, y_hat);
    m.mae = mae(y, y_hat);
    m.mape_percent = mape(y, y_hat);
    m.r_squared = r_squared(y, y_hat);
    m.num_predictions = y.size();
    return m;
}

/// Per-task metrics plus the joint scores. Absent tasks (single-task models)
/// leave their slots and the joint scores empty. pooled_r_squared treats both
/// tasks as one prediction set and stands in for the single R² column of
/// comparison tables.
struct MetricsReport {
    std::optional<TaskMetrics> sales;
    std::optional<TaskMetrics> inventory;
    std::optional<double> mtes_score;
    std::optional<double> pooled_r_squared;
};

inline MetricsReport build_report(const std::vector<double>& sales_y, const std::vector<double>& sales_hat,
                                  const std::vector<double>& inv_y, const std::vector<double>& inv_hat) {
    MetricsReport r;
    if (!sales_y.empty()) r.sales = task_metrics(sales_y, sales_hat);
    if (!inv_y.empty()) r.inventory = task_metrics(inv_y, inv_hat);
    if (r.sales && r.inventory) {
        r.mtes_score = mtes(r.sales->mape_percent, r.inventory->mape_percent);
        std::vector<double> y = sales_y, y_hat = sales_hat;
        y.insert(y.end(), inv_y.begin(), inv_y.end());
        y_hat.insert(y_hat.end(), inv_hat.begin(), inv_hat.end());
        r.pooled_r_squared = r_squared(y, y_hat);
    } else if (r.sales) {
        r.pooled_r_squared = r.sales->r_squared;
    } else if (r.inventory) {
        r.pooled_r_squared = r.inventory->r_squared;
    }
    return r;
}

/// Canonical key=value text (sorted keys, round-trippable numbers).
inline std::string report_to_text(const MetricsReport& r) {
    std::vector<std::pair<std::string, std::string>> kv;
    auto put = [&kv](const std::string& k, double v) { kv.emplace_back(k, fmt_double(v)); };
    auto put_task = [&](const std::string& prefix, const TaskMetrics& m) {
        put(prefix + ".mae", m.mae);
        put(prefix + ".mape_percent", m.mape_percent);
        kv.emplace_back(prefix + ".num_predictions", std::to_string(m.num_predictions));
        put(prefix + ".r_squared", m.r_squared);
        put(prefix + ".rmse", m.rmse);
    };
    if (r.inventory) put_task("inventory", *r.inventory);
    if (r.mtes_score) put(std::string("joint.mtes"), *r.mtes_score);
    if (r.pooled_r_squared) put(std::string("joint.pooled_r_squared"), *r.pooled_r_squared);
    if (r.sales) put_task("sales", *r.sales);
    std::sort(kv.begin(), kv.end());
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Comparison table (text rounded to the usual presentation, CSV unrounded)
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string name;
    std::optional<double> sales_rmse, sales_mape, inventory_rmse, inventory_mape, r2, mtes_score;

    static ComparisonRow from_report(std::string model_name, const MetricsReport& r) {
        ComparisonRow row;
        row.name = std::move(model_name);
        if (r.sales) {
            row.sales_rmse = r.sales->rmse;
            row.sales_mape = r.sales->mape_percent;
        }
        if (r.inventory) {
            row.inventory_rmse = r.inventory->rmse;
            row.inventory_mape = r.inventory->mape_percent;
        }
        row.r2 = r.pooled_r_squared;
        row.mtes_score = r.mtes_score;
        return row;
    }
};

struct TableOutput {
    std::string text;
    std::string csv;
};

inline const std::vector<std::string>& comparison_columns() {
    static const std::vector<std::string> cols = {
        "Model", "Sales RMSE", "Sales MAPE (%)", "Inventory RMSE", "Inventory MAPE (%)", "R²", "MTES"};
    return cols;
}

inline TableOutput emit_comparison_table(const std::vector<ComparisonRow>& rows) {
    if (rows.empty()) throw ContractError("emit_comparison_table: no rows");
    auto rounded = [](const std::optional<double>& v, int decimals) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.*f", decimals, *v);
        return buf;
    };
    auto raw = [](const std::optional<double>& v) -> std::string { return v ? fmt_double(*v) : ""; };

    const auto& cols = comparison_columns();
    std::vector<std::vector<std::string>> cells;
    cells.push_back(cols);
    for (const ComparisonRow& r : rows) {
        cells.push_back({r.name, rounded(r.sales_rmse, 2), rounded(r.sales_mape, 2), rounded(r.inventory_rmse, 2),
                         rounded(r.inventory_mape, 2), rounded(r.r2, 3), rounded(r.mtes_score, 3)});
    }
    // column widths in characters; R² is two display columns shorter in bytes
    auto display_len = [](const std::string& s) {
        std::size_t n = 0;
        for (char c : s) n += (static_cast<unsigned char>(c) & 0xC0) != 0x80;
        return n;
    };
    std::vector<std::size_t> width(cols.size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_len(row[c]));
    }
    TableOutput out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::size_t pad = width[c] - display_len(row[c]);
            if (c == 0) {
                out.text += row[c] + std::string(pad, ' ');
            } else {
                out.text += "  " + std::string(pad, ' ') + row[c];
            }
        }
        out.text += '\n';
    }
    for (std::size_t c = 0; c < cols.size(); ++c) out.csv += (c ? "," : "") + cols[c];
    out.csv += '\n';
    for (const ComparisonRow& r : rows) {
        out.csv += r.name;
        out.csv += ',' + raw(r.sales_rmse) + ',' + raw(r.sales_mape) + ',' + raw(r.inventory_rmse) + ',' +
                   raw(r.inventory_mape) + ',' + raw(r.r2) + ',' + raw(r.mtes_score);
        out.csv += '\n';
    }
    return out;
}

}  // namespace tftmtl
