// Command-line frontend: data generation, training, evaluation, prediction,
// ablation comparison, and loss-curve plotting.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tftmtl/checkpoint.hpp"
#include "tftmtl/config_json.hpp"
#include "tftmtl/generator.hpp"
#include "tftmtl/manifest.hpp"
#include "tftmtl/metrics.hpp"
#include "tftmtl/model.hpp"
#include "tftmtl/pipeline.hpp"
#include "tftmtl/svg.hpp"
#include "tftmtl/train.hpp"

namespace fs = std::filesystem;
using namespace tftmtl;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

int env_threads() {
    const std::string v = env_or("TFTMTL_THREADS", "1");
    try {
        const int n = std::stoi(v);
        if (n < 1) throw std::invalid_argument("");
        return n;
    } catch (const std::exception&) {
        throw ConfigError("TFTMTL_THREADS must be a positive integer, got '" + v + "'");
    }
}

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const std::string env = env_or("TFTMTL_OUT_DIR", "");
    if (env.empty()) throw ConfigError("no output directory: pass --out or set TFTMTL_OUT_DIR");
    return env;
}

std::vector<ProductDayRecord> load_validated_dataset(const std::string& path) {
    auto records = records_from_csv(read_file(path));
    auto violations = validate_schema(records);
    if (!violations.empty()) {
        throw ValidationError("dataset '" + path + "' fails schema validation:\n" + violations_to_string(violations));
    }
    return records;
}

std::string display_name(const std::string& kind) {
    if (kind == "tft_mtl") return "TFT-MTL";
    if (kind == "tft_single_sales") return "TFT single-task (sales)";
    if (kind == "tft_single_inventory") return "TFT single-task (inventory)";
    if (kind == "gru") return "GRU";
    return kind;
}

// shared dataset → split → normalize → window pipeline
struct Prepared {
    RecordSplit rsplit;
    NormalizerStats norm;
    VocabMaps vocab;
    WindowSplit windows;
    CivilDay max_train_date;
};

Prepared prepare_training_data(const std::vector<ProductDayRecord>& records, const ModelConfig& mc) {
    Prepared p;
    p.rsplit = split_by_time(records);
    p.norm = fit_normalizer(p.rsplit.train);
    p.vocab = build_vocab(records);
    auto series = build_series(records, p.norm, p.vocab);
    p.windows = assign_windows(make_windows(series, mc.lookback, mc.horizon), p.rsplit.val_start, p.rsplit.test_start);
    p.max_train_date = p.rsplit.train.empty() ? CivilDay{0} : p.rsplit.train.back().date;
    for (const auto& r : p.rsplit.train) p.max_train_date = std::max(p.max_train_date, r.date);
    return p;
}

ModelConfig complete_model_config(ModelConfig mc, const VocabMaps& vocab) {
    mc.num_dynamic_vars = static_cast<int>(dynamic_feature_names().size());
    mc.static_vocab_sizes = {{"product_id", vocab.product_id.size()},
                             {"category", vocab.category.size()},
                             {"brand", vocab.brand.size()}};
    mc.validate();
    return mc;
}

CivilDay max_target_date(const std::vector<WindowSample>& ws) {
    CivilDay out{std::numeric_limits<std::int64_t>::min()};
    for (const auto& w : ws) out = std::max(out, w.origin + (w.horizon() - 1));
    return out;
}

nlohmann::ordered_json leakage_guard_json(const Prepared& p) {
    nlohmann::ordered_json g;
    g["normalizer_fit_max_date"] = format_date(p.max_train_date);
    g["val_start"] = format_date(p.rsplit.val_start);
    g["test_start"] = format_date(p.rsplit.test_start);
    g["train_windows"] = p.windows.train.size();
    g["val_windows"] = p.windows.val.size();
    g["test_windows"] = p.windows.test.size();
    g["dropped_windows"] = p.windows.dropped.size();
    if (!p.windows.train.empty()) g["train_max_target_date"] = format_date(max_target_date(p.windows.train));
    if (!p.windows.val.empty()) g["val_max_target_date"] = format_date(max_target_date(p.windows.val));
    g["train_window_checksum"] = to_hex(windows_checksum(p.windows.train));
    return g;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed) {
    GeneratorConfig cfg;
    if (!config_path.empty()) cfg = generator_config_from_json(parse_json_file(config_path));
    if (seed) cfg.seed = *seed;
    cfg.validate();

    auto records = generate_synthetic(cfg);
    write_file(out_path, records_to_csv(records));

    std::map<std::string, std::pair<std::set<std::string>, std::size_t>> by_category;
    for (const auto& r : records) {
        by_category[r.category].first.insert(r.product_id);
        by_category[r.category].second += 1;
    }
    std::cout << "wrote " << records.size() << " rows (" << cfg.num_products << " products x " << cfg.num_days
              << " days) to " << out_path << "\n";
    for (const auto& [cat, info] : by_category) {
        std::cout << "  " << cat << ": " << info.first.size() << " products, " << info.second << " rows\n";
    }

    RunManifest m;
    m.command = "generate";
    m.seed = cfg.seed;
    m.resolved_config = generator_config_to_json(cfg);
    m.outputs = {out_path};
    m.extra = {{"threads", env_threads()}};
    m.write(out_path + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& data_path, const std::string& config_path, const std::string& out_flag) {
    const std::string out_dir = resolve_out_dir(out_flag);
    TrainConfig cfg = config_path.empty() ? desk_train_defaults() : train_config_from_json(parse_json_file(config_path));

    auto records = load_validated_dataset(data_path);
    Prepared p = prepare_training_data(records, cfg.model);
    cfg.model = complete_model_config(cfg.model, p.vocab);
    cfg.validate();
    if (p.windows.train.empty() || p.windows.val.empty()) {
        throw ValidationError("train: no usable train/validation windows (series too short for lookback " +
                              std::to_string(cfg.model.lookback) + " + horizon " + std::to_string(cfg.model.horizon) +
                              ")");
    }

    TftMtlModel model(cfg.model, HeadMode::both, cfg.seed);
    std::cout << "training tft_mtl: " << p.windows.train.size() << " train / " << p.windows.val.size()
              << " val windows, " << model.params().total_size() << " parameters\n";
    TrainResult result = train(model, p.windows.train, p.windows.val, p.norm, p.vocab, cfg);
    std::cout << "best epoch " << result.stop.best_epoch << " (val_total " << fmt_double(result.stop.best_val)
              << "), " << result.logs.size() << " epochs run\n";

    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.json").string();
    const std::string log_path = (fs::path(out_dir) / "epochs.csv").string();
    const std::string metrics_path = (fs::path(out_dir) / "val_metrics.txt").string();
    save_checkpoint(result.best, ckpt_path);
    write_file(log_path, epoch_log_to_csv(result.logs));

    std::unique_ptr<ForecastModel> best = model_from_checkpoint(result.best);
    EvalResult val_eval = evaluate_model(*best, p.windows.val, p.norm, cfg.batch_size);
    write_file(metrics_path, report_to_text(val_eval.report));

    RunManifest m;
    m.command = "train";
    m.seed = cfg.seed;
    m.resolved_config = train_config_to_json(cfg);
    m.inputs = {data_path};
    m.outputs = {ckpt_path, log_path, metrics_path};
    m.extra = {{"threads", env_threads()}, {"leakage_guard", leakage_guard_json(p)}};
    m.write((fs::path(out_dir) / "manifest.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path, const std::string& out_flag) {
    const std::string out_dir = resolve_out_dir(out_flag);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::unique_ptr<ForecastModel> model = model_from_checkpoint(ckpt);

    auto records = load_validated_dataset(data_path);
    RecordSplit rsplit = split_by_time(records);
    auto series = build_series(records, ckpt.normalizer, ckpt.vocab);
    WindowSplit windows = assign_windows(make_windows(series, ckpt.config.lookback, ckpt.config.horizon),
                                         rsplit.val_start, rsplit.test_start);
    if (windows.test.empty()) throw ValidationError("evaluate: no test windows in '" + data_path + "'");

    EvalResult ev = evaluate_model(*model, windows.test, ckpt.normalizer, 64);
    TableOutput table = emit_comparison_table({ComparisonRow::from_report(display_name(ckpt.model_kind), ev.report)});

    const std::string metrics_path = (fs::path(out_dir) / "metrics.txt").string();
    const std::string table_txt = (fs::path(out_dir) / "comparison.txt").string();
    const std::string table_csv = (fs::path(out_dir) / "comparison.csv").string();
    const std::string pred_path = (fs::path(out_dir) / "predictions.csv").string();
    write_file(metrics_path, report_to_text(ev.report));
    write_file(table_txt, table.text);
    write_file(table_csv, table.csv);
    write_file(pred_path, predictions_to_csv(ev, model->has_sales_head(), model->has_inventory_head()));
    std::cout << table.text;

    RunManifest m;
    m.command = "evaluate";
    m.seed = 0;
    m.resolved_config = {{"checkpoint", ckpt_path}, {"model_kind", ckpt.model_kind}};
    m.inputs = {ckpt_path, data_path};
    m.outputs = {metrics_path, table_txt, table_csv, pred_path};
    m.extra = {{"threads", env_threads()},
               {"test_start", format_date(rsplit.test_start)},
               {"test_windows", windows.test.size()}};
    m.write((fs::path(out_dir) / "manifest.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const std::string& ckpt_path, const std::string& data_path, const std::string& product,
                const std::string& date_str, const std::string& out_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::unique_ptr<ForecastModel> model = model_from_checkpoint(ckpt);
    const ModelConfig& mc = ckpt.config;
    const CivilDay origin = parse_date(date_str);

    auto records = load_validated_dataset(data_path);
    auto series = build_series(records, ckpt.normalizer, ckpt.vocab);
    const ProductSeries* ps = nullptr;
    for (const auto& s : series) {
        if (s.product_id == product) ps = &s;
    }
    if (ps == nullptr) throw ValidationError("predict: product '" + product + "' not present in '" + data_path + "'");

    const std::int64_t offset = origin - ps->first_date;
    if (offset < mc.lookback || offset > ps->length()) {
        throw ValidationError("predict: need " + std::to_string(mc.lookback) + " days of history ending " +
                              format_date(origin - 1) + " for " + product + "; available range " +
                              format_date(ps->first_date) + ".." + format_date(ps->first_date + (ps->length() - 1)) +
                              (offset < mc.lookback
                                   ? " has only " + std::to_string(std::max<std::int64_t>(offset, 0)) + " days before the origin"
                                   : " ends before the origin"));
    }

    const int nf = static_cast<int>(dynamic_feature_names().size());
    BatchInput in;
    in.batch = 1;
    in.dynamic.assign(ps->features_norm.begin() + static_cast<std::ptrdiff_t>(offset - mc.lookback) * nf,
                      ps->features_norm.begin() + static_cast<std::ptrdiff_t>(offset) * nf);
    in.static_idx = ps->static_idx;

    nlohmann::ordered_json out;
    out["product_id"] = product;
    out["origin_date"] = format_date(origin);
    out["horizon_days"] = mc.horizon;
    nlohmann::ordered_json dates = nlohmann::ordered_json::array();
    for (int h = 0; h < mc.horizon; ++h) dates.push_back(format_date(origin + h));
    out["dates"] = dates;
    out["model_kind"] = ckpt.model_kind;

    auto* tft = dynamic_cast<TftMtlModel*>(model.get());
    HeadOutputs heads;
    Tape tape;
    std::optional<ForwardTrace> trace;
    if (tft != nullptr) {
        TftMtlModel::Forward fwd = tft->forward(tape, in, false, nullptr);
        heads = fwd.heads;
        trace = tft->extract_traces(fwd)[0];
    } else {
        heads = model->build(tape, in, false, nullptr);
    }
    auto denorm_head = [&](Value head, int feature) {
        std::vector<double> out_v;
        for (int h = 0; h < mc.horizon; ++h) {
            out_v.push_back(ckpt.normalizer.denormalize(product, feature, head.tensor().data[static_cast<std::size_t>(h)]));
        }
        return out_v;
    };
    if (heads.sales.valid()) out["sales_forecast"] = denorm_head(heads.sales, kSalesFeature);
    if (heads.inventory.valid()) out["inventory_forecast"] = denorm_head(heads.inventory, kInventoryFeature);

    if (trace) {
        nlohmann::ordered_json interp;
        interp["variable_names"] = dynamic_feature_names();
        nlohmann::ordered_json vsel = nlohmann::ordered_json::array();
        nlohmann::ordered_json tops = nlohmann::ordered_json::array();
        for (int t = 0; t < trace->lookback; ++t) {
            std::vector<double> row(static_cast<std::size_t>(trace->num_vars));
            for (int v = 0; v < trace->num_vars; ++v) row[static_cast<std::size_t>(v)] = trace->var_weight(t, v);
            vsel.push_back({{"date", format_date(origin - mc.lookback + t)}, {"weights", row}});
            std::vector<int> order(static_cast<std::size_t>(trace->num_vars));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&row](int a, int b) {
                return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
            });
            nlohmann::ordered_json top = nlohmann::ordered_json::array();
            for (int k = 0; k < std::min(3, trace->num_vars); ++k) {
                top.push_back({{"name", dynamic_feature_names()[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]},
                               {"weight", row[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]}});
            }
            tops.push_back({{"date", format_date(origin - mc.lookback + t)}, {"top", top}});
        }
        interp["variable_selection"] = vsel;
        interp["top_variables"] = tops;
        nlohmann::ordered_json attn = nlohmann::ordered_json::array();
        for (int h = 0; h < trace->num_heads; ++h) {
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            for (int t = 0; t < trace->lookback; ++t) {
                std::vector<double> row(static_cast<std::size_t>(trace->lookback));
                for (int s = 0; s < trace->lookback; ++s) row[static_cast<std::size_t>(s)] = trace->attn(h, t, s);
                rows.push_back(row);
            }
            attn.push_back(rows);
        }
        interp["attention"] = attn;
        out["interpretability"] = interp;
    }

    const std::string text = out.dump(1) + "\n";
    write_file(out_path, text);
    std::cout << text;

    RunManifest m;
    m.command = "predict";
    m.seed = 0;
    m.resolved_config = {{"checkpoint", ckpt_path}, {"product", product}, {"date", date_str}};
    m.inputs = {ckpt_path, data_path};
    m.outputs = {out_path};
    m.extra = {{"threads", env_threads()}};
    m.write(out_path + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

int cmd_ablation(const std::string& data_path, const std::string& config_path, const std::string& out_flag) {
    const std::string out_dir = resolve_out_dir(out_flag);
    TrainConfig cfg = config_path.empty() ? desk_train_defaults() : train_config_from_json(parse_json_file(config_path));

    auto records = load_validated_dataset(data_path);
    Prepared p = prepare_training_data(records, cfg.model);
    cfg.model = complete_model_config(cfg.model, p.vocab);
    cfg.validate();

    AblationResult ab = run_ablation(p.windows, p.norm, p.vocab, cfg);
    std::vector<ComparisonRow> rows;
    std::vector<std::string> outputs;
    for (const auto& e : ab.entries) {
        rows.push_back(ComparisonRow::from_report(e.name, e.report));
        const std::string log_path = (fs::path(out_dir) / ("epochs_" + e.checkpoint.model_kind + ".csv")).string();
        write_file(log_path, epoch_log_to_csv(e.logs));
        outputs.push_back(log_path);
    }
    TableOutput table = emit_comparison_table(rows);
    const std::string table_txt = (fs::path(out_dir) / "comparison.txt").string();
    const std::string table_csv = (fs::path(out_dir) / "comparison.csv").string();
    write_file(table_txt, table.text);
    write_file(table_csv, table.csv);
    outputs.push_back(table_txt);
    outputs.push_back(table_csv);
    std::cout << table.text;

    RunManifest m;
    m.command = "ablation";
    m.seed = cfg.seed;
    m.resolved_config = train_config_to_json(cfg);
    m.inputs = {data_path};
    m.outputs = outputs;
    nlohmann::ordered_json checks = nlohmann::ordered_json::object();
    for (const auto& e : ab.entries) checks[e.checkpoint.model_kind] = to_hex(e.train_window_checksum);
    m.extra = {{"threads", env_threads()},
               {"leakage_guard", leakage_guard_json(p)},
               {"per_model_train_window_checksum", checks}};
    m.write((fs::path(out_dir) / "manifest.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// plot-losses
// ---------------------------------------------------------------------------

int cmd_plot_losses(const std::string& log_path, const std::string& out_path) {
    auto logs = epoch_log_from_csv(read_file(log_path));
    const std::string svg = render_loss_curves(logs);
    write_file(out_path, svg);
    std::cout << "wrote " << out_path << " (" << logs.size() << " epochs)\n";

    RunManifest m;
    m.command = "plot-losses";
    m.seed = 0;
    m.resolved_config = {{"log", log_path}};
    m.inputs = {log_path};
    m.outputs = {out_path};
    m.extra = {{"threads", env_threads()}};
    m.write(out_path + ".manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task temporal fusion forecasting engine"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, ckpt_path, product, date_str, log_path;
    std::optional<std::uint64_t> seed;

    auto* generate = app.add_subcommand("generate", "generate a synthetic product-day dataset (CSV)");
    generate->add_option("--config", config_path, "generator config JSON");
    generate->add_option("--out", out_path, "output CSV path")->required();
    generate->add_option("--seed", seed, "override the config seed");

    auto* train_cmd = app.add_subcommand("train", "train the multi-task model on a dataset");
    train_cmd->add_option("--data", data_path, "dataset CSV")->required();
    train_cmd->add_option("--config", config_path, "train config JSON (desk-scale defaults if omitted)");
    train_cmd->add_option("--out", out_path, "output directory (or TFTMTL_OUT_DIR)");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the held-out test split");
    evaluate->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
    evaluate->add_option("--data", data_path, "dataset CSV")->required();
    evaluate->add_option("--out", out_path, "output directory (or TFTMTL_OUT_DIR)");

    auto* predict = app.add_subcommand("predict", "forecast one product from a given origin date");
    predict->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
    predict->add_option("--data", data_path, "dataset CSV")->required();
    predict->add_option("--product", product, "product id")->required();
    predict->add_option("--date", date_str, "forecast start date (YYYY-MM-DD)")->required();
    predict->add_option("--out", out_path, "output JSON path")->required();

    auto* ablation = app.add_subcommand("ablation", "compare TFT-MTL, single-task variants, and the GRU baseline");
    ablation->add_option("--data", data_path, "dataset CSV")->required();
    ablation->add_option("--config", config_path, "train config JSON (desk-scale defaults if omitted)");
    ablation->add_option("--out", out_path, "output directory (or TFTMTL_OUT_DIR)");

    auto* plot = app.add_subcommand("plot-losses", "render train/validation loss curves to SVG");
    plot->add_option("--log", log_path, "epoch log CSV produced by train");
    plot->add_option("--out", out_path, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(generate)) return cmd_generate(config_path, out_path, seed);
        if (app.got_subcommand(train_cmd)) return cmd_train(data_path, config_path, out_path);
        if (app.got_subcommand(evaluate)) return cmd_evaluate(ckpt_path, data_path, out_path);
        if (app.got_subcommand(predict)) return cmd_predict(ckpt_path, data_path, product, date_str, out_path);
        if (app.got_subcommand(ablation)) return cmd_ablation(data_path, config_path, out_path);
        if (app.got_subcommand(plot)) return cmd_plot_losses(log_path, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
