#pragma once
#include <set>
#include <string>

#include <json.hpp>

#include "tftmtl/checkpoint.hpp"
#include "tftmtl/generator.hpp"
#include "tftmtl/train.hpp"

namespace tftmtl {

// Strict JSON config parsing: unknown keys are rejected so typos fail loudly.

namespace detail {

inline void require_keys_subset(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(context + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out, const std::string& context) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(context + ": bad value for '" + key + "'");
    }
}

}  // namespace detail

inline json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// GeneratorConfig
// ---------------------------------------------------------------------------

inline GeneratorConfig generator_config_from_json(const json& j) {
    detail::require_keys_subset(
        j,
        {"num_products",    "num_days",        "seed",           "start_date",       "base_demand_min",
         "base_demand_max", "price_elasticity", "promotion_lift", "holiday_lift",     "weekly_seasonality",
         "reorder_point_days", "order_up_to_days", "lead_time_min", "lead_time_max",  "demand_noise",
         "promo_start_prob", "promo_min_days",  "promo_max_days", "promo_min_discount", "promo_max_discount",
         "price_min",       "price_max",       "views_per_unit", "ad_base",          "ad_per_unit",
         "num_categories",  "num_brands"},
        "generator config");
    GeneratorConfig c;
    detail::read_into(j, "num_products", c.num_products, "generator config");
    detail::read_into(j, "num_days", c.num_days, "generator config");
    detail::read_into(j, "seed", c.seed, "generator config");
    if (j.contains("start_date")) c.start_date = parse_date(j.at("start_date").get<std::string>());
    detail::read_into(j, "base_demand_min", c.base_demand_min, "generator config");
    detail::read_into(j, "base_demand_max", c.base_demand_max, "generator config");
    detail::read_into(j, "price_elasticity", c.price_elasticity, "generator config");
    detail::read_into(j, "promotion_lift", c.promotion_lift, "generator config");
    detail::read_into(j, "holiday_lift", c.holiday_lift, "generator config");
    if (j.contains("weekly_seasonality")) {
        auto v = j.at("weekly_seasonality").get<std::vector<double>>();
        if (v.size() != 7) throw ConfigError("generator config: weekly_seasonality needs 7 values");
        std::copy(v.begin(), v.end(), c.weekly_seasonality.begin());
    }
    detail::read_into(j, "reorder_point_days", c.reorder_point_days, "generator config");
    detail::read_into(j, "order_up_to_days", c.order_up_to_days, "generator config");
    detail::read_into(j, "lead_time_min", c.lead_time_min, "generator config");
    detail::read_into(j, "lead_time_max", c.lead_time_max, "generator config");
    detail::read_into(j, "demand_noise", c.demand_noise, "generator config");
    detail::read_into(j, "promo_start_prob", c.promo_start_prob, "generator config");
    detail::read_into(j, "promo_min_days", c.promo_min_days, "generator config");
    detail::read_into(j, "promo_max_days", c.promo_max_days, "generator config");
    detail::read_into(j, "promo_min_discount", c.promo_min_discount, "generator config");
    detail::read_into(j, "promo_max_discount", c.promo_max_discount, "generator config");
    detail::read_into(j, "price_min", c.price_min, "generator config");
    detail::read_into(j, "price_max", c.price_max, "generator config");
    detail::read_into(j, "views_per_unit", c.views_per_unit, "generator config");
    detail::read_into(j, "ad_base", c.ad_base, "generator config");
    detail::read_into(j, "ad_per_unit", c.ad_per_unit, "generator config");
    detail::read_into(j, "num_categories", c.num_categories, "generator config");
    detail::read_into(j, "num_brands", c.num_brands, "generator config");
    return c;
}

inline json generator_config_to_json(const GeneratorConfig& c) {
    json j;
    j["num_products"] = c.num_products;
    j["num_days"] = c.num_days;
    j["seed"] = c.seed;
    j["start_date"] = format_date(c.start_date);
    j["base_demand_min"] = c.base_demand_min;
    j["base_demand_max"] = c.base_demand_max;
    j["price_elasticity"] = c.price_elasticity;
    j["promotion_lift"] = c.promotion_lift;
    j["holiday_lift"] = c.holiday_lift;
    j["weekly_seasonality"] = c.weekly_seasonality;
    j["reorder_point_days"] = c.reorder_point_days;
    j["order_up_to_days"] = c.order_up_to_days;
    j["lead_time_min"] = c.lead_time_min;
    j["lead_time_max"] = c.lead_time_max;
    j["demand_noise"] = c.demand_noise;
    j["promo_start_prob"] = c.promo_start_prob;
    j["promo_min_days"] = c.promo_min_days;
    j["promo_max_days"] = c.promo_max_days;
    j["promo_min_discount"] = c.promo_min_discount;
    j["promo_max_discount"] = c.promo_max_discount;
    j["price_min"] = c.price_min;
    j["price_max"] = c.price_max;
    j["views_per_unit"] = c.views_per_unit;
    j["ad_base"] = c.ad_base;
    j["ad_per_unit"] = c.ad_per_unit;
    j["num_categories"] = c.num_categories;
    j["num_brands"] = c.num_brands;
    return j;
}

// ---------------------------------------------------------------------------
// TrainConfig (the model block omits data-derived fields: num_dynamic_vars
// and static vocabularies are filled from the dataset at train time)
// ---------------------------------------------------------------------------

inline TrainConfig train_config_from_json(const json& j) {
    detail::require_keys_subset(j,
                                {"epochs", "batch_size", "learning_rate", "patience", "seed", "weighting_mode",
                                 "dwa_temperature", "clip_norm", "weight_decay", "model"},
                                "train config");
    TrainConfig c;
    detail::read_into(j, "epochs", c.epochs, "train config");
    detail::read_into(j, "batch_size", c.batch_size, "train config");
    detail::read_into(j, "learning_rate", c.learning_rate, "train config");
    detail::read_into(j, "patience", c.patience, "train config");
    detail::read_into(j, "seed", c.seed, "train config");
    if (j.contains("weighting_mode")) {
        const std::string mode = j.at("weighting_mode").get<std::string>();
        if (mode == "fixed") {
            c.weighting = WeightingMode::fixed;
        } else if (mode == "dynamic") {
            c.weighting = WeightingMode::dynamic;
        } else {
            throw ConfigError("train config: weighting_mode must be 'fixed' or 'dynamic', got '" + mode + "'");
        }
    }
    detail::read_into(j, "dwa_temperature", c.dwa_temperature, "train config");
    detail::read_into(j, "clip_norm", c.clip_norm, "train config");
    detail::read_into(j, "weight_decay", c.weight_decay, "train config");
    if (j.contains("model")) {
        const json& m = j.at("model");
        detail::require_keys_subset(m, {"hidden_dim", "num_heads", "lookback", "horizon", "dropout_rate"},
                                    "train config model");
        detail::read_into(m, "hidden_dim", c.model.hidden_dim, "train config model");
        detail::read_into(m, "num_heads", c.model.num_heads, "train config model");
        detail::read_into(m, "lookback", c.model.lookback, "train config model");
        detail::read_into(m, "horizon", c.model.horizon, "train config model");
        detail::read_into(m, "dropout_rate", c.model.dropout_rate, "train config model");
    }
    return c;
}

inline json train_config_to_json(const TrainConfig& c) {
    json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    j["weighting_mode"] = c.weighting == WeightingMode::fixed ? "fixed" : "dynamic";
    j["dwa_temperature"] = c.dwa_temperature;
    j["clip_norm"] = c.clip_norm;
    j["weight_decay"] = c.weight_decay;
    j["model"] = model_config_to_json(c.model);
    return j;
}

/// Desk-scale preset used when no train config is given: small enough to run
/// in minutes on one core, large enough to learn the synthetic dynamics.
inline TrainConfig desk_train_defaults() {
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 64;
    c.learning_rate = 0.001;
    c.patience = 8;
    c.seed = 42;
    c.model.hidden_dim = 32;
    c.model.num_heads = 4;
    c.model.lookback = 28;
    c.model.horizon = 14;
    c.model.dropout_rate = 0.1;
    return c;
}

}  // namespace tftmtl
