#pragma once
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tftmtl/date.hpp"
#include "tftmtl/errors.hpp"
#include "tftmtl/textio.hpp"

namespace tftmtl {

/// One product-day observation: the two targets plus dynamic and static
/// covariates.
struct ProductDayRecord {
    CivilDay date;
    std::string product_id;
    double daily_sales = 0.0;
    double inventory_level = 0.0;
    double price = 0.0;
    double discount_rate = 0.0;
    double ad_spend = 0.0;
    double page_views = 0.0;
    std::string category;
    std::string brand;
    int is_holiday = 0;
    int day_of_week = 1;
    double lead_time = 0.0;
};

inline const std::vector<std::string>& dataset_columns() {
    static const std::vector<std::string> cols = {
        "date",     "product_id", "daily_sales", "inventory_level", "price",      "discount_rate", "ad_spend",
        "page_views", "category", "brand",       "is_holiday",      "day_of_week", "lead_time"};
    return cols;
}

/// Dynamic (per-day) model inputs, in canonical order. The two targets also
/// appear here: past sales and stock levels are lookback features.
inline const std::vector<std::string>& dynamic_feature_names() {
    static const std::vector<std::string> names = {"daily_sales", "inventory_level", "price",
                                                   "discount_rate", "ad_spend",      "page_views",
                                                   "is_holiday",    "day_of_week",   "lead_time"};
    return names;
}

inline double dynamic_feature(const ProductDayRecord& r, int idx) {
    switch (idx) {
        case 0: return r.daily_sales;
        case 1: return r.inventory_level;
        case 2: return r.price;
        case 3: return r.discount_rate;
        case 4: return r.ad_spend;
        case 5: return r.page_views;
        case 6: return static_cast<double>(r.is_holiday);
        case 7: return static_cast<double>(r.day_of_week);
        case 8: return r.lead_time;
        default: throw ContractError("dynamic_feature: index " + std::to_string(idx) + " out of range");
    }
}

/// Static categorical features, in canonical order.
inline const std::vector<std::string>& static_feature_names() {
    static const std::vector<std::string> names = {"product_id", "category", "brand"};
    return names;
}

// ---------------------------------------------------------------------------
// CSV serialization (header = Table-style schema, rows sorted by
// (product_id, date) by the producers)
// ---------------------------------------------------------------------------

inline std::string records_to_csv(const std::vector<ProductDayRecord>& records) {
    std::string out;
    const auto& cols = dataset_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += cols[i];
    }
    out += '\n';
    for (const ProductDayRecord& r : records) {
        out += format_date(r.date);
        out += ',' + r.product_id;
        out += ',' + fmt_double(r.daily_sales);
        out += ',' + fmt_double(r.inventory_level);
        out += ',' + fmt_double(r.price);
        out += ',' + fmt_double(r.discount_rate);
        out += ',' + fmt_double(r.ad_spend);
        out += ',' + fmt_double(r.page_views);
        out += ',' + r.category;
        out += ',' + r.brand;
        out += ',' + std::to_string(r.is_holiday);
        out += ',' + std::to_string(r.day_of_week);
        out += ',' + fmt_double(r.lead_time);
        out += '\n';
    }
    return out;
}

inline std::vector<ProductDayRecord> records_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("dataset: empty file");
    {
        auto header = split_csv_line(line);
        const auto& cols = dataset_columns();
        if (header != cols) {
            throw ValidationError("dataset: header mismatch, expected " + std::to_string(cols.size()) +
                                  " Table-schema columns starting with 'date,product_id,...'");
        }
    }
    std::vector<ProductDayRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != dataset_columns().size()) {
            throw ValidationError("dataset line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(dataset_columns().size()) + " fields, got " +
                                  std::to_string(f.size()));
        }
        const std::string ctx = "dataset line " + std::to_string(lineno);
        ProductDayRecord r;
        r.date = parse_date(f[0]);
        r.product_id = f[1];
        r.daily_sales = parse_double(f[2], ctx);
        r.inventory_level = parse_double(f[3], ctx);
        r.price = parse_double(f[4], ctx);
        r.discount_rate = parse_double(f[5], ctx);
        r.ad_spend = parse_double(f[6], ctx);
        r.page_views = parse_double(f[7], ctx);
        r.category = f[8];
        r.brand = f[9];
        r.is_holiday = static_cast<int>(parse_int(f[10], ctx));
        r.day_of_week = static_cast<int>(parse_int(f[11], ctx));
        r.lead_time = parse_double(f[12], ctx);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

struct SchemaViolation {
    std::size_t row = 0;  // 0-based data row index
    std::string field;
    std::string rule;
};

/// Checks every record invariant plus per-product date contiguity.
/// Violations are data, not errors: the full list is returned.
inline std::vector<SchemaViolation> validate_schema(const std::vector<ProductDayRecord>& records) {
    std::vector<SchemaViolation> v;
    auto bad = [&](std::size_t row, const char* field, std::string rule) {
        v.push_back({row, field, std::move(rule)});
    };
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ProductDayRecord& r = records[i];
        auto finite = [](double x) { return std::isfinite(x); };
        if (!finite(r.daily_sales) || r.daily_sales < 0) bad(i, "daily_sales", "must be finite and >= 0");
        if (!finite(r.inventory_level) || r.inventory_level < 0) bad(i, "inventory_level", "must be finite and >= 0");
        if (!finite(r.price) || r.price <= 0) bad(i, "price", "must be finite and > 0");
        if (!finite(r.discount_rate) || r.discount_rate < 0 || r.discount_rate > 1) {
            bad(i, "discount_rate", "must lie in [0,1]");
        }
        if (!finite(r.ad_spend) || r.ad_spend < 0) bad(i, "ad_spend", "must be finite and >= 0");
        if (!finite(r.page_views) || r.page_views < 0) bad(i, "page_views", "must be finite and >= 0");
        if (r.is_holiday != 0 && r.is_holiday != 1) bad(i, "is_holiday", "must be 0 or 1");
        if (r.day_of_week < 1 || r.day_of_week > 7) bad(i, "day_of_week", "must lie in 1..7");
        if (r.day_of_week != r.date.day_of_week()) bad(i, "day_of_week", "inconsistent with date");
        if (!finite(r.lead_time) || r.lead_time <= 0) bad(i, "lead_time", "must be finite and > 0");
        if (r.product_id.empty()) bad(i, "product_id", "must be nonempty");
    }
    // date contiguity per product (rows are expected sorted by product, date)
    std::map<std::string, std::pair<CivilDay, std::size_t>> last_seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ProductDayRecord& r = records[i];
        auto it = last_seen.find(r.product_id);
        if (it != last_seen.end()) {
            const CivilDay prev = it->second.first;
            if (r.date - prev != 1) {
                bad(i, "date", "not contiguous for product " + r.product_id + ": " + format_date(prev) + " -> " +
                                   format_date(r.date));
            }
        }
        last_seen[r.product_id] = {r.date, i};
    }
    return v;
}

inline std::string violations_to_string(const std::vector<SchemaViolation>& vs, std::size_t max_lines = 20) {
    std::string out;
    for (std::size_t i = 0; i < vs.size() && i < max_lines; ++i) {
        out += "row " + std::to_string(vs[i].row) + " field " + vs[i].field + ": " + vs[i].rule + "\n";
    }
    if (vs.size() > max_lines) out += "... (" + std::to_string(vs.size() - max_lines) + " more)\n";
    return out;
}

}  // namespace tftmtl
