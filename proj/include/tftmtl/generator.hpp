#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tftmtl/date.hpp"
#include "tftmtl/errors.hpp"
#include "tftmtl/record.hpp"
#include "tftmtl/rng.hpp"

namespace tftmtl {

/// Synthetic retail dynamics: weekly-seasonal, price/promo/holiday-driven
/// demand with an order-up-to (s, S) replenishment loop, so sales and stock
/// levels are genuinely coupled (stockouts cap realized sales).
struct GeneratorConfig {
    int num_products = 20;
    int num_days = 540;
    std::uint64_t seed = 42;
    CivilDay start_date = make_day(2021, 1, 1);

    double base_demand_min = 20.0;
    double base_demand_max = 80.0;
    double price_elasticity = -1.2;  // applied to price relative to the product's list price
    double promotion_lift = 1.2;
    double holiday_lift = 0.5;
    // multiplicative day-of-week factors, index 0 = Monday; the pronounced
    // weekend peak is the main learnable structure and regularly pushes
    // demand past the reorder buffer, which is what couples the two targets
    std::array<double, 7> weekly_seasonality = {0.72, 0.85, 0.95, 1.0, 1.12, 1.45, 1.28};

    // replenishment policy in days of expected demand: reorder when the
    // inventory position drops below s, order back up to S. The default
    // buffer is deliberately tight relative to the weekend demand peak, so
    // a solid share of days is stockout-capped and the two targets are
    // strongly coupled.
    double reorder_point_days = 3.5;
    double order_up_to_days = 11.0;
    int lead_time_min = 3;
    int lead_time_max = 7;

    double demand_noise = 0.05;  // sigma of multiplicative lognormal noise

    double promo_start_prob = 0.01;  // per-day chance a promo window opens
    int promo_min_days = 3;
    int promo_max_days = 7;
    double promo_min_discount = 0.10;
    double promo_max_discount = 0.30;

    double price_min = 15.0;
    double price_max = 120.0;

    double views_per_unit = 22.0;
    double ad_base = 8.0;
    double ad_per_unit = 1.1;

    int num_categories = 4;
    int num_brands = 6;

    void validate() const {
        if (num_products < 1 || num_products > 9999) throw ValidationError("generator: num_products must be 1..9999");
        if (num_days < 43) throw ValidationError("generator: num_days must be at least lookback+horizon+1 (43)");
        if (!(reorder_point_days < order_up_to_days)) {
            throw ValidationError("generator: reorder point s must be below order-up-to level S");
        }
        if (base_demand_min <= 0 || base_demand_max < base_demand_min) {
            throw ValidationError("generator: invalid base demand range");
        }
        if (price_min <= 0 || price_max < price_min) throw ValidationError("generator: invalid price range");
        if (lead_time_min < 1 || lead_time_max < lead_time_min) {
            throw ValidationError("generator: invalid lead time range");
        }
        if (promo_min_discount < 0 || promo_max_discount > 1 || promo_max_discount < promo_min_discount) {
            throw ValidationError("generator: discount range must lie in [0,1]");
        }
        if (promo_min_days < 1 || promo_max_days < promo_min_days) {
            throw ValidationError("generator: invalid promo window length range");
        }
        if (promo_start_prob < 0 || promo_start_prob > 1) {
            throw ValidationError("generator: promo_start_prob must lie in [0,1]");
        }
        if (demand_noise < 0) throw ValidationError("generator: demand_noise must be >= 0");
        if (num_categories < 1 || num_brands < 1) throw ValidationError("generator: need >= 1 category and brand");
    }
};

/// Per-product simulation internals, exposed so tests can check the exact
/// inventory balance and the demand→sales capping without re-running the sim.
struct ProductTrace {
    std::string product_id;
    std::vector<double> demand;       // pre-stockout demand per day
    std::vector<double> arrivals_in;  // stock credited between day t and t+1
};

struct GeneratorOutput {
    std::vector<ProductDayRecord> records;  // sorted by (product_id, date)
    std::vector<ProductTrace> traces;       // one per product, same order
};

namespace detail {

inline bool is_holiday_date(CivilDay day) {
    static constexpr std::pair<int, int> holidays[] = {{1, 1}, {2, 14}, {7, 4}, {7, 11}, {11, 25}, {12, 25}};
    int y, m, d;
    civil_parts(day, y, m, d);
    for (auto [hm, hd] : holidays) {
        if (m == hm && d == hd) return true;
    }
    return false;
}

inline const std::vector<std::string>& category_pool() {
    static const std::vector<std::string> pool = {"Electronics", "Home Appliances", "Office Supplies",
                                                  "Personal Care", "Sports", "Toys"};
    return pool;
}

}  // namespace detail

inline GeneratorOutput generate_synthetic_with_trace(const GeneratorConfig& cfg) {
    cfg.validate();
    GeneratorOutput out;
    out.records.reserve(static_cast<std::size_t>(cfg.num_products) * cfg.num_days);

    const int n_cat = std::min<int>(cfg.num_categories, static_cast<int>(detail::category_pool().size()));

    for (int p = 0; p < cfg.num_products; ++p) {
        // independent substream per product: output is invariant to the order
        // products are simulated in
        std::mt19937_64 rng = make_rng(cfg.seed, static_cast<std::uint64_t>(p));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        char pid[16];
        std::snprintf(pid, sizeof(pid), "P%04d", p + 1);

        const double base_demand =
            cfg.base_demand_min + (cfg.base_demand_max - cfg.base_demand_min) * unit(rng);
        const double list_price = cfg.price_min + (cfg.price_max - cfg.price_min) * unit(rng);
        const int lead_time = cfg.lead_time_min +
                              static_cast<int>(unit(rng) * (cfg.lead_time_max - cfg.lead_time_min + 1));
        const std::string category = detail::category_pool()[static_cast<std::size_t>(unit(rng) * n_cat)];
        const std::string brand = "Brand-" + std::string(1, static_cast<char>('A' + static_cast<int>(
                                                                  unit(rng) * cfg.num_brands)));

        const double s_point = cfg.reorder_point_days * base_demand;
        const double s_level = cfg.order_up_to_days * base_demand;

        ProductTrace trace;
        trace.product_id = pid;
        trace.demand.resize(cfg.num_days);
        trace.arrivals_in.assign(cfg.num_days, 0.0);

        // (arrive_day, qty) orders in flight
        std::vector<std::pair<int, double>> pipeline;
        double inventory = s_level;
        int promo_days_left = 0;
        double promo_discount = 0.0;

        for (int t = 0; t < cfg.num_days; ++t) {
            const CivilDay day = cfg.start_date + t;
            const int dow = day.day_of_week();
            const bool holiday = detail::is_holiday_date(day);

            if (promo_days_left > 0) {
                --promo_days_left;
            } else {
                promo_discount = 0.0;
                if (unit(rng) < cfg.promo_start_prob) {
                    promo_days_left = cfg.promo_min_days +
                                      static_cast<int>(unit(rng) * (cfg.promo_max_days - cfg.promo_min_days + 1)) - 1;
                    promo_discount = cfg.promo_min_discount +
                                     (cfg.promo_max_discount - cfg.promo_min_discount) * unit(rng);
                }
            }
            const double discount = promo_discount;
            const double price = list_price * (1.0 - discount);

            const double noise = cfg.demand_noise > 0 ? std::exp(cfg.demand_noise * gauss(rng)) : 1.0;
            const double demand = base_demand * cfg.weekly_seasonality[static_cast<std::size_t>(dow - 1)] *
                                  (1.0 + cfg.holiday_lift * (holiday ? 1.0 : 0.0)) *
                                  std::pow(price / list_price, cfg.price_elasticity) *
                                  (1.0 + cfg.promotion_lift * discount) * noise;
            trace.demand[t] = demand;

            const double sales = std::min(demand, inventory);

            const double views_noise = cfg.demand_noise > 0 ? std::exp(0.5 * cfg.demand_noise * gauss(rng)) : 1.0;
            const double ad_noise = cfg.demand_noise > 0 ? std::exp(0.5 * cfg.demand_noise * gauss(rng)) : 1.0;
            const double page_views = demand * cfg.views_per_unit * views_noise;
            const double ad_spend = (cfg.ad_base + cfg.ad_per_unit * demand) * (1.0 + 2.0 * discount) * ad_noise;

            ProductDayRecord r;
            r.date = day;
            r.product_id = pid;
            r.daily_sales = sales;
            r.inventory_level = inventory;
            r.price = price;
            r.discount_rate = discount;
            r.ad_spend = ad_spend;
            r.page_views = page_views;
            r.category = category;
            r.brand = brand;
            r.is_holiday = holiday ? 1 : 0;
            r.day_of_week = dow;
            r.lead_time = static_cast<double>(lead_time);
            out.records.push_back(std::move(r));

            // end of day: replenish against inventory position (on hand +
            // in flight), order arrives at start of day t + lead_time
            double on_hand = inventory - sales;
            double in_flight = 0.0;
            for (const auto& [when, qty] : pipeline) {
                if (when > t) in_flight += qty;
            }
            if (on_hand + in_flight < s_point) {
                pipeline.emplace_back(t + lead_time, s_level - (on_hand + in_flight));
            }
            double arrived = 0.0;
            for (auto it = pipeline.begin(); it != pipeline.end();) {
                if (it->first == t + 1) {
                    arrived += it->second;
                    it = pipeline.erase(it);
                } else {
                    ++it;
                }
            }
            trace.arrivals_in[t] = arrived;
            inventory = on_hand + arrived;
        }
        out.traces.push_back(std::move(trace));
    }
    return out;
}

inline std::vector<ProductDayRecord> generate_synthetic(const GeneratorConfig& cfg) {
    return generate_synthetic_with_trace(cfg).records;
}

}  // namespace tftmtl
