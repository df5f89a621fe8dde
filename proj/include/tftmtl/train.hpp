#pragma once
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tftmtl/adamw.hpp"
#include "tftmtl/checkpoint.hpp"
#include "tftmtl/gru.hpp"
#include "tftmtl/metrics.hpp"
#include "tftmtl/model.hpp"
#include "tftmtl/pipeline.hpp"

namespace tftmtl {

// ---------------------------------------------------------------------------
// Configuration and logs
// ---------------------------------------------------------------------------

enum class WeightingMode { fixed, dynamic };

struct TrainConfig {
    int epochs = 150;
    int batch_size = 64;
    double learning_rate = 0.0005;
    int patience = 15;
    std::uint64_t seed = 42;
    WeightingMode weighting = WeightingMode::fixed;
    double dwa_temperature = 1.0;
    double clip_norm = 1.0;
    double weight_decay = 0.01;
    ModelConfig model;

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw ValidationError("train: epochs and batch_size must be >= 1");
        if (patience < 1 || patience > epochs) throw ValidationError("train: need 1 <= patience <= epochs");
        if (!(learning_rate > 0)) throw ValidationError("train: learning_rate must be positive");
        if (!(dwa_temperature > 0)) throw ValidationError("train: dwa_temperature must be positive");
        if (clip_norm < 0 || weight_decay < 0) throw ValidationError("train: clip_norm/weight_decay must be >= 0");
        model.validate();
    }
};

struct EpochLog {
    int epoch = 0;
    double train_total = 0, train_sales = 0, train_inventory = 0;
    double val_total = 0, val_sales = 0, val_inventory = 0;
    double lambda_sales = 1, lambda_inventory = 1;
    double wall_seconds = 0;
};

inline std::string epoch_log_header() {
    return "epoch,train_total,train_sales,train_inventory,val_total,val_sales,val_inventory,"
           "lambda_sales,lambda_inventory,wall_seconds";
}

inline std::string epoch_log_to_csv(const std::vector<EpochLog>& logs) {
    std::string out = epoch_log_header() + "\n";
    for (const EpochLog& e : logs) {
        out += std::to_string(e.epoch);
        for (double v : {e.train_total, e.train_sales, e.train_inventory, e.val_total, e.val_sales,
                         e.val_inventory, e.lambda_sales, e.lambda_inventory, e.wall_seconds}) {
            out += ',' + fmt_double(v);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<EpochLog> epoch_log_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(epoch_log_header())) {
        throw ValidationError("epoch log line 1: bad or missing header");
    }
    std::vector<EpochLog> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 10) {
            throw ValidationError("epoch log line " + std::to_string(lineno) + ": expected 10 fields, got " +
                                  std::to_string(f.size()));
        }
        const std::string ctx = "epoch log line " + std::to_string(lineno);
        EpochLog e;
        e.epoch = static_cast<int>(parse_int(f[0], ctx));
        e.train_total = parse_double(f[1], ctx);
        e.train_sales = parse_double(f[2], ctx);
        e.train_inventory = parse_double(f[3], ctx);
        e.val_total = parse_double(f[4], ctx);
        e.val_sales = parse_double(f[5], ctx);
        e.val_inventory = parse_double(f[6], ctx);
        e.lambda_sales = parse_double(f[7], ctx);
        e.lambda_inventory = parse_double(f[8], ctx);
        e.wall_seconds = parse_double(f[9], ctx);
        out.push_back(e);
    }
    return out;
}

/// best_val tracks the minimum logged validation total; the stop rule fires
/// when no improvement has been seen for `patience` consecutive epochs.
struct EarlyStopState {
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int epochs_since_improve = 0;

    /// Returns true when this epoch set a new best.
    bool update(int epoch, double val_total) {
        if (val_total < best_val) {
            best_val = val_total;
            best_epoch = epoch;
            epochs_since_improve = 0;
            return true;
        }
        epochs_since_improve += 1;
        return false;
    }

    bool should_stop(int patience) const { return epochs_since_improve >= patience; }
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainResult {
    Checkpoint best;
    std::vector<EpochLog> logs;
    EarlyStopState stop;
    std::uint64_t train_window_checksum = 0;
};

namespace detail {

struct EpochLoss {
    double sales = 0, inventory = 0;
    std::size_t samples = 0;

    void add(const LossBreakdown& b, std::size_t n) {
        sales += b.l_sales * static_cast<double>(n);
        inventory += b.l_inventory * static_cast<double>(n);
        samples += n;
    }
    double mean_sales() const { return samples ? sales / static_cast<double>(samples) : 0.0; }
    double mean_inventory() const { return samples ? inventory / static_cast<double>(samples) : 0.0; }
};

inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, int batch_size,
                                                           std::mt19937_64* shuffle_rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (shuffle_rng) std::shuffle(idx.begin(), idx.end(), *shuffle_rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
        out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
    }
    return out;
}

}  // namespace detail

/// Mini-batch AdamW on L_total with per-epoch validation, optional dynamic
/// task weighting at epoch boundaries, and early stopping; returns the
/// checkpoint with the lowest validation loss plus the complete epoch log.
inline TrainResult train(ForecastModel& model, const std::vector<WindowSample>& train_w,
                         const std::vector<WindowSample>& val_w, const NormalizerStats& norm, const VocabMaps& vocab,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (train_w.empty() || val_w.empty()) throw ValidationError("train: empty train or validation split");
    const ModelConfig& mc = model.config();

    AdamWHyper hyper;
    hyper.lr = cfg.learning_rate;
    hyper.weight_decay = cfg.weight_decay;
    AdamWState opt = AdamWState::init(model.params().total_size(), hyper);

    std::mt19937_64 shuffle_rng = make_rng(cfg.seed, 2);
    std::mt19937_64 dropout_rng = make_rng(cfg.seed, 3);

    TrainResult result;
    result.train_window_checksum = windows_checksum(train_w);
    TaskWeights weights{1.0, 1.0};
    std::vector<double> sales_hist, inv_hist;
    std::vector<Tensor*> params = model.params().all();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        detail::EpochLoss train_loss;
        int batch_no = 0;
        for (const auto& idx : detail::batch_indices(train_w.size(), cfg.batch_size, &shuffle_rng)) {
            ++batch_no;
            BatchInput batch = make_batch(train_w, idx, mc, norm);
            Tape tape;
            HeadOutputs heads = model.build(tape, batch, true, &dropout_rng);
            LossGraph lg = loss_graph(tape, heads, batch, weights);
            const double batch_total = lg.total.item();
            if (!std::isfinite(batch_total)) {
                throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                      " batch " + std::to_string(batch_no));
            }
            zero_grads(params);
            tape.backward(lg.total);
            if (cfg.clip_norm > 0) clip_global_norm(params, cfg.clip_norm);
            adamw_step(params, opt);
            train_loss.add(lg.breakdown(), idx.size());
        }

        detail::EpochLoss val_loss;
        for (const auto& idx : detail::batch_indices(val_w.size(), cfg.batch_size, nullptr)) {
            BatchInput batch = make_batch(val_w, idx, mc, norm);
            Tape tape;
            HeadOutputs heads = model.build(tape, batch, false, nullptr);
            val_loss.add(loss_graph(tape, heads, batch, weights).breakdown(), idx.size());
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_sales = train_loss.mean_sales();
        log.train_inventory = train_loss.mean_inventory();
        log.train_total = weights.lambda_sales * log.train_sales + weights.lambda_inventory * log.train_inventory;
        log.val_sales = val_loss.mean_sales();
        log.val_inventory = val_loss.mean_inventory();
        log.val_total = weights.lambda_sales * log.val_sales + weights.lambda_inventory * log.val_inventory;
        log.lambda_sales = weights.lambda_sales;
        log.lambda_inventory = weights.lambda_inventory;
        log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.logs.push_back(log);

        if (result.stop.update(epoch, log.val_total)) {
            result.best = snapshot_checkpoint(model, opt, epoch, result.stop.best_val, weights, norm, vocab);
        }
        if (result.stop.should_stop(cfg.patience)) break;

        if (cfg.weighting == WeightingMode::dynamic && model.has_sales_head() && model.has_inventory_head()) {
            sales_hist.push_back(log.train_sales);
            inv_hist.push_back(log.train_inventory);
            const bool computable = sales_hist.size() >= 2 && sales_hist[sales_hist.size() - 2] > 0 &&
                                    sales_hist.back() > 0 && inv_hist[inv_hist.size() - 2] > 0 && inv_hist.back() > 0;
            if (computable) weights = dynamic_task_weights(sales_hist, inv_hist, cfg.dwa_temperature);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation (denormalized units)
// ---------------------------------------------------------------------------

struct PredictionRow {
    std::string product_id;
    CivilDay origin;
    int step = 0;  // 0-based horizon position
    double sales_actual = 0, sales_pred = 0;
    double inventory_actual = 0, inventory_pred = 0;
};

struct EvalResult {
    MetricsReport report;
    std::vector<PredictionRow> predictions;  // ordered as the input windows
};

inline EvalResult evaluate_model(ForecastModel& model, const std::vector<WindowSample>& windows,
                                 const NormalizerStats& norm, int batch_size = 64) {
    if (windows.empty()) throw ValidationError("evaluate: no windows");
    const ModelConfig& mc = model.config();
    const bool sales_on = model.has_sales_head(), inv_on = model.has_inventory_head();
    std::vector<double> sy, syh, iy, iyh;
    EvalResult out;
    for (const auto& idx : detail::batch_indices(windows.size(), batch_size, nullptr)) {
        BatchInput batch = make_batch(windows, idx, mc, norm);
        Tape tape;
        HeadOutputs heads = model.build(tape, batch, false, nullptr);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const WindowSample& w = windows[idx[k]];
            for (int h = 0; h < mc.horizon; ++h) {
                PredictionRow row;
                row.product_id = w.product_id;
                row.origin = w.origin;
                row.step = h;
                if (sales_on) {
                    const double z = heads.sales.tensor().at2(static_cast<int>(k), h);
                    row.sales_pred = norm.denormalize(w.product_id, kSalesFeature, z);
                    row.sales_actual = w.target_sales[static_cast<std::size_t>(h)];
                    sy.push_back(row.sales_actual);
                    syh.push_back(row.sales_pred);
                }
                if (inv_on) {
                    const double z = heads.inventory.tensor().at2(static_cast<int>(k), h);
                    row.inventory_pred = norm.denormalize(w.product_id, kInventoryFeature, z);
                    row.inventory_actual = w.target_inventory[static_cast<std::size_t>(h)];
                    iy.push_back(row.inventory_actual);
                    iyh.push_back(row.inventory_pred);
                }
                out.predictions.push_back(std::move(row));
            }
        }
    }
    out.report = build_report(sy, syh, iy, iyh);
    return out;
}

inline std::string predictions_to_csv(const EvalResult& r, bool sales_on, bool inv_on) {
    std::string out = "product_id,origin_date,step,date";
    if (sales_on) out += ",sales_actual,sales_pred";
    if (inv_on) out += ",inventory_actual,inventory_pred";
    out += '\n';
    for (const PredictionRow& row : r.predictions) {
        out += row.product_id + ',' + format_date(row.origin) + ',' + std::to_string(row.step) + ',' +
               format_date(row.origin + row.step);
        if (sales_on) out += ',' + fmt_double(row.sales_actual) + ',' + fmt_double(row.sales_pred);
        if (inv_on) out += ',' + fmt_double(row.inventory_actual) + ',' + fmt_double(row.inventory_pred);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ablation: full model vs single-task variants vs GRU on shared splits
// ---------------------------------------------------------------------------

struct AblationEntry {
    std::string name;
    MetricsReport report;
    Checkpoint checkpoint;
    std::vector<EpochLog> logs;
    std::uint64_t train_window_checksum = 0;
};

struct AblationResult {
    std::vector<AblationEntry> entries;
};

/// Trains all four models with identical seeds, splits, and budget, then
/// evaluates each on the test windows.
inline AblationResult run_ablation(const WindowSplit& splits, const NormalizerStats& norm, const VocabMaps& vocab,
                                   const TrainConfig& cfg) {
    if (splits.test.empty()) throw ValidationError("ablation: empty test split");
    AblationResult out;
    auto run_one = [&](const std::string& name, std::unique_ptr<ForecastModel> model) {
        TrainResult tr = train(*model, splits.train, splits.val, norm, vocab, cfg);
        std::unique_ptr<ForecastModel> best = model_from_checkpoint(tr.best);
        EvalResult ev = evaluate_model(*best, splits.test, norm, cfg.batch_size);
        AblationEntry e;
        e.name = name;
        e.report = ev.report;
        e.checkpoint = std::move(tr.best);
        e.logs = std::move(tr.logs);
        e.train_window_checksum = tr.train_window_checksum;
        out.entries.push_back(std::move(e));
    };
    run_one("TFT-MTL", std::make_unique<TftMtlModel>(cfg.model, HeadMode::both, cfg.seed));
    run_one("TFT single-task (sales)", std::make_unique<TftMtlModel>(cfg.model, HeadMode::sales_only, cfg.seed));
    run_one("TFT single-task (inventory)",
            std::make_unique<TftMtlModel>(cfg.model, HeadMode::inventory_only, cfg.seed));
    run_one("GRU", std::make_unique<GruModel>(cfg.model, cfg.seed));
    return out;
}

}  // namespace tftmtl
