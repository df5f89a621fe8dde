#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tftmtl/date.hpp"
#include "tftmtl/errors.hpp"
#include "tftmtl/record.hpp"
#include "tftmtl/textio.hpp"

namespace tftmtl {

// ---------------------------------------------------------------------------
// Per-product z-normalization fitted on the training split only
// ---------------------------------------------------------------------------

struct FeatureStats {
    double mean = 0.0;
    double std = 1.0;
};

struct NormalizerStats {
    std::vector<std::string> feature_names;                      // dynamic feature order
    std::vector<FeatureStats> global;                            // fallback for unseen products
    std::map<std::string, std::vector<FeatureStats>> per_product;

    static constexpr double kStdFloor = 1e-6;

    const std::vector<FeatureStats>& stats_for(const std::string& product) const {
        auto it = per_product.find(product);
        return it != per_product.end() ? it->second : global;
    }

    double normalize(const std::string& product, int feature, double x) const {
        const FeatureStats& s = stats_for(product)[static_cast<std::size_t>(feature)];
        return (x - s.mean) / s.std;
    }

    double denormalize(const std::string& product, int feature, double z) const {
        const FeatureStats& s = stats_for(product)[static_cast<std::size_t>(feature)];
        return z * s.std + s.mean;
    }
};

// indices into dynamic_feature_names()
inline constexpr int kSalesFeature = 0;
inline constexpr int kInventoryFeature = 1;

inline NormalizerStats fit_normalizer(const std::vector<ProductDayRecord>& train_records) {
    if (train_records.empty()) throw ValidationError("fit_normalizer: empty training split");
    NormalizerStats out;
    out.feature_names = dynamic_feature_names();
    const int nf = static_cast<int>(out.feature_names.size());

    // two passes: mean first, then centered second moments, so near-constant
    // features (e.g. price between promotions) don't lose precision to
    // cancellation
    struct Acc {
        std::vector<double> sum, centered_sq;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> per;
    Acc global;
    global.sum.assign(nf, 0.0);
    global.centered_sq.assign(nf, 0.0);
    for (const ProductDayRecord& r : train_records) {
        Acc& a = per[r.product_id];
        if (a.sum.empty()) {
            a.sum.assign(nf, 0.0);
            a.centered_sq.assign(nf, 0.0);
        }
        for (int f = 0; f < nf; ++f) {
            const double x = dynamic_feature(r, f);
            a.sum[f] += x;
            global.sum[f] += x;
        }
        a.n += 1;
        global.n += 1;
    }
    std::map<std::string, std::vector<double>> means;
    std::vector<double> global_mean(nf);
    for (int f = 0; f < nf; ++f) global_mean[f] = global.sum[f] / static_cast<double>(global.n);
    for (const auto& [pid, acc] : per) {
        auto& m = means[pid];
        m.resize(nf);
        for (int f = 0; f < nf; ++f) m[f] = acc.sum[f] / static_cast<double>(acc.n);
    }
    for (const ProductDayRecord& r : train_records) {
        Acc& a = per[r.product_id];
        const auto& m = means[r.product_id];
        for (int f = 0; f < nf; ++f) {
            const double x = dynamic_feature(r, f);
            a.centered_sq[f] += (x - m[f]) * (x - m[f]);
            global.centered_sq[f] += (x - global_mean[f]) * (x - global_mean[f]);
        }
    }
    auto finalize = [nf](const Acc& a, const std::vector<double>& mean) {
        std::vector<FeatureStats> st(nf);
        for (int f = 0; f < nf; ++f) {
            st[f].mean = mean[f];
            st[f].std = std::max(std::sqrt(a.centered_sq[f] / static_cast<double>(a.n)), NormalizerStats::kStdFloor);
        }
        return st;
    };
    out.global = finalize(global, global_mean);
    for (const auto& [pid, acc] : per) out.per_product[pid] = finalize(acc, means[pid]);
    return out;
}

// ---------------------------------------------------------------------------
// Static-feature vocabularies (index 0 reserved for unseen values)
// ---------------------------------------------------------------------------

struct Vocab {
    std::vector<std::string> items;  // sorted

    int index(const std::string& v) const {
        auto it = std::lower_bound(items.begin(), items.end(), v);
        if (it != items.end() && *it == v) return static_cast<int>(it - items.begin()) + 1;
        return 0;  // out-of-vocabulary slot
    }
    int size() const { return static_cast<int>(items.size()) + 1; }
};

struct VocabMaps {
    Vocab product_id, category, brand;

    const Vocab& by_name(const std::string& name) const {
        if (name == "product_id") return product_id;
        if (name == "category") return category;
        if (name == "brand") return brand;
        throw ContractError("unknown static feature '" + name + "'");
    }
};

inline VocabMaps build_vocab(const std::vector<ProductDayRecord>& records) {
    std::set<std::string> pid, cat, brand;
    for (const ProductDayRecord& r : records) {
        pid.insert(r.product_id);
        cat.insert(r.category);
        brand.insert(r.brand);
    }
    VocabMaps v;
    v.product_id.items.assign(pid.begin(), pid.end());
    v.category.items.assign(cat.begin(), cat.end());
    v.brand.items.assign(brand.begin(), brand.end());
    return v;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

/// One supervised example. Lookback features are normalized; targets stay in
/// original units (normalization is applied lazily at loss time).
struct WindowSample {
    std::vector<double> dynamic_past;   // lookback × num_dynamic_vars, row-major
    std::vector<double> known_future;   // horizon × 2: day_of_week, is_holiday (raw)
    std::vector<int> static_idx;        // per static_feature_names() order
    std::vector<double> target_sales;   // horizon, original units
    std::vector<double> target_inventory;
    std::string product_id;
    CivilDay origin;                    // forecast start date

    int lookback(int num_vars) const { return static_cast<int>(dynamic_past.size()) / num_vars; }
    int horizon() const { return static_cast<int>(target_sales.size()); }
};

/// Contiguous per-product series with pre-normalized dynamic features.
struct ProductSeries {
    std::string product_id;
    std::vector<int> static_idx;
    CivilDay first_date;
    std::vector<double> features_norm;  // num_days × num_dynamic_vars
    std::vector<double> sales_raw;
    std::vector<double> inventory_raw;
    std::vector<double> dow_raw;
    std::vector<double> holiday_raw;

    int length() const { return static_cast<int>(sales_raw.size()); }
};

/// Records must be sorted by (product_id, date) with contiguous dates per
/// product (validate_schema enforces this upstream).
inline std::vector<ProductSeries> build_series(const std::vector<ProductDayRecord>& records,
                                               const NormalizerStats& norm, const VocabMaps& vocab) {
    std::vector<ProductSeries> out;
    const int nf = static_cast<int>(dynamic_feature_names().size());
    for (const ProductDayRecord& r : records) {
        if (out.empty() || out.back().product_id != r.product_id) {
            ProductSeries s;
            s.product_id = r.product_id;
            s.first_date = r.date;
            s.static_idx = {vocab.product_id.index(r.product_id), vocab.category.index(r.category),
                            vocab.brand.index(r.brand)};
            out.push_back(std::move(s));
        }
        ProductSeries& s = out.back();
        for (int f = 0; f < nf; ++f) {
            s.features_norm.push_back(norm.normalize(r.product_id, f, dynamic_feature(r, f)));
        }
        s.sales_raw.push_back(r.daily_sales);
        s.inventory_raw.push_back(r.inventory_level);
        s.dow_raw.push_back(static_cast<double>(r.day_of_week));
        s.holiday_raw.push_back(static_cast<double>(r.is_holiday));
    }
    return out;
}

/// One sample per valid forecast origin; a series shorter than
/// lookback + horizon yields no samples (not an error). Samples never cross a
/// product boundary.
inline std::vector<WindowSample> make_windows(const std::vector<ProductSeries>& series, int lookback, int horizon,
                                              int stride = 1) {
    if (lookback < 1 || horizon < 1 || stride < 1) {
        throw ContractError("make_windows: lookback, horizon and stride must be positive");
    }
    const int nf = static_cast<int>(dynamic_feature_names().size());
    std::vector<WindowSample> out;
    for (const ProductSeries& s : series) {
        const int len = s.length();
        for (int origin = lookback; origin + horizon <= len; origin += stride) {
            WindowSample w;
            w.product_id = s.product_id;
            w.static_idx = s.static_idx;
            w.origin = s.first_date + origin;
            w.dynamic_past.assign(
                s.features_norm.begin() + static_cast<std::ptrdiff_t>(origin - lookback) * nf,
                s.features_norm.begin() + static_cast<std::ptrdiff_t>(origin) * nf);
            w.target_sales.assign(s.sales_raw.begin() + origin, s.sales_raw.begin() + origin + horizon);
            w.target_inventory.assign(s.inventory_raw.begin() + origin, s.inventory_raw.begin() + origin + horizon);
            w.known_future.reserve(static_cast<std::size_t>(horizon) * 2);
            for (int h = 0; h < horizon; ++h) {
                w.known_future.push_back(s.dow_raw[static_cast<std::size_t>(origin + h)]);
                w.known_future.push_back(s.holiday_raw[static_cast<std::size_t>(origin + h)]);
            }
            out.push_back(std::move(w));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chronological split
// ---------------------------------------------------------------------------

struct RecordSplit {
    std::vector<ProductDayRecord> train, val, test;
    CivilDay val_start;   // first validation day
    CivilDay test_start;  // first test day
};

/// test = last `test_months`, validation = `val_months` before that, train =
/// remainder, on the global date axis.
inline RecordSplit split_by_time(const std::vector<ProductDayRecord>& records, int test_months = 6,
                                 int val_months = 3) {
    if (records.empty()) throw ValidationError("split_by_time: no records");
    CivilDay lo = records.front().date, hi = records.front().date;
    for (const ProductDayRecord& r : records) {
        lo = std::min(lo, r.date);
        hi = std::max(hi, r.date);
    }
    RecordSplit out;
    out.test_start = add_months(hi + 1, -test_months);
    out.val_start = add_months(hi + 1, -(test_months + val_months));
    if (out.val_start <= lo) {
        throw ValidationError("split_by_time: span " + format_date(lo) + ".." + format_date(hi) +
                              " too short for " + std::to_string(val_months) + "+" + std::to_string(test_months) +
                              " months of validation+test");
    }
    for (const ProductDayRecord& r : records) {
        if (r.date < out.val_start) {
            out.train.push_back(r);
        } else if (r.date < out.test_start) {
            out.val.push_back(r);
        } else {
            out.test.push_back(r);
        }
    }
    return out;
}

struct WindowSplit {
    std::vector<WindowSample> train, val, test, dropped;
};

/// Assigns each window to the split containing its origin; windows whose
/// target range crosses the split boundary are dropped, so no origin in an
/// earlier split ever trains on later-split target dates. Lookback context
/// may reach back across the boundary (past observations are legal inputs).
inline WindowSplit assign_windows(std::vector<WindowSample> windows, CivilDay val_start, CivilDay test_start) {
    WindowSplit out;
    for (WindowSample& w : windows) {
        const CivilDay last_target = w.origin + (w.horizon() - 1);
        if (w.origin < val_start) {
            (last_target < val_start ? out.train : out.dropped).push_back(std::move(w));
        } else if (w.origin < test_start) {
            (last_target < test_start ? out.val : out.dropped).push_back(std::move(w));
        } else {
            out.test.push_back(std::move(w));
        }
    }
    return out;
}

/// Order-sensitive digest of a window set; used to prove different models
/// consumed identical samples.
inline std::uint64_t windows_checksum(const std::vector<WindowSample>& ws) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_doubles = [&h](const std::vector<double>& v) { h = fnv1a64(v.data(), v.size() * sizeof(double), h); };
    for (const WindowSample& w : ws) {
        h = fnv1a64(w.product_id.data(), w.product_id.size(), h);
        h = fnv1a64(&w.origin.days, sizeof(w.origin.days), h);
        mix_doubles(w.dynamic_past);
        mix_doubles(w.known_future);
        mix_doubles(w.target_sales);
        mix_doubles(w.target_inventory);
        h = fnv1a64(w.static_idx.data(), w.static_idx.size() * sizeof(int), h);
    }
    return h;
}

}  // namespace tftmtl
