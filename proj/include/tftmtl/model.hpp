#pragma once
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tftmtl/layers.hpp"
#include "tftmtl/params.hpp"
#include "tftmtl/pipeline.hpp"
#include "tftmtl/record.hpp"
#include "tftmtl/rng.hpp"
#include "tftmtl/tape.hpp"

namespace tftmtl {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    int hidden_dim = 128;
    int num_heads = 4;
    int lookback = 28;
    int horizon = 14;
    int num_dynamic_vars = 0;
    std::map<std::string, int> static_vocab_sizes;  // subset of static_feature_names()
    double dropout_rate = 0.1;

    int d_k() const { return hidden_dim / num_heads; }
    int num_static() const { return static_cast<int>(static_vocab_sizes.size()); }

    /// Static features in canonical order (the order window samples use).
    std::vector<std::string> static_order() const {
        std::vector<std::string> out;
        for (const std::string& name : static_feature_names()) {
            if (static_vocab_sizes.count(name)) out.push_back(name);
        }
        return out;
    }

    void validate() const {
        if (hidden_dim < 1 || num_heads < 1) throw ValidationError("model: hidden_dim and num_heads must be positive");
        if (hidden_dim % num_heads != 0) {
            throw ValidationError("model: hidden_dim " + std::to_string(hidden_dim) + " not divisible by num_heads " +
                                  std::to_string(num_heads));
        }
        if (lookback < 1 || horizon < 1) throw ValidationError("model: lookback and horizon must be >= 1");
        if (num_dynamic_vars < 1) throw ValidationError("model: num_dynamic_vars must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("model: dropout_rate must be in [0,1)");
        for (const auto& [name, size] : static_vocab_sizes) {
            if (size < 1) throw ValidationError("model: vocab for '" + name + "' must be >= 1");
            bool known = false;
            for (const std::string& s : static_feature_names()) known = known || s == name;
            if (!known) throw ValidationError("model: unknown static feature '" + name + "'");
        }
    }
};

struct TaskWeights {
    double lambda_sales = 1.0;
    double lambda_inventory = 1.0;

    void validate() const {
        if (lambda_sales < 0 || lambda_inventory < 0 || lambda_sales + lambda_inventory <= 0) {
            throw ValidationError("task weights must be nonnegative with positive sum");
        }
    }
};

/// Interpretability outputs of one forward pass.
struct ForwardTrace {
    int num_heads = 0, lookback = 0, num_vars = 0;
    std::vector<double> attention;  // num_heads × lookback × lookback
    std::vector<double> variable;   // lookback × num_vars

    double attn(int head, int t, int s) const {
        return attention[(static_cast<std::size_t>(head) * lookback + t) * lookback + s];
    }
    double var_weight(int t, int v) const { return variable[static_cast<std::size_t>(t) * num_vars + v]; }
};

struct LossBreakdown {
    double l_sales = 0.0;
    double l_inventory = 0.0;
    double l_total = 0.0;
    TaskWeights weights_used;
};

// ---------------------------------------------------------------------------
// Batched model input (targets normalized by the caller)
// ---------------------------------------------------------------------------

struct BatchInput {
    int batch = 0;
    std::vector<double> dynamic;     // batch × lookback × num_vars
    std::vector<int> static_idx;     // batch × num_static
    std::vector<double> target_sales;      // batch × horizon, normalized space
    std::vector<double> target_inventory;  // batch × horizon, normalized space
};

struct HeadOutputs {
    Value sales;      // [batch × horizon]; invalid when the head is absent
    Value inventory;  // [batch × horizon]; invalid when the head is absent
};

/// Minimal training-facing surface shared by the TFT-MTL model and baselines.
class ForecastModel {
  public:
    virtual ~ForecastModel() = default;
    virtual ParameterStore& params() = 0;
    virtual const ParameterStore& params() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual int horizon() const = 0;
    virtual bool has_sales_head() const = 0;
    virtual bool has_inventory_head() const = 0;
    virtual std::string kind() const = 0;
    virtual HeadOutputs build(Tape& tape, const BatchInput& in, bool training, std::mt19937_64* dropout_rng) = 0;
};

// ---------------------------------------------------------------------------
// Loss: L_k = mean over batch and horizon of squared error,
// L_total = λ₁·L_sales + λ₂·L_inventory
// ---------------------------------------------------------------------------

struct LossGraph {
    Value total;
    Value sales;      // invalid when head absent
    Value inventory;  // invalid when head absent
    TaskWeights weights;

    LossBreakdown breakdown() const {
        LossBreakdown b;
        b.weights_used = weights;
        b.l_sales = sales.valid() ? sales.item() : 0.0;
        b.l_inventory = inventory.valid() ? inventory.item() : 0.0;
        b.l_total = weights.lambda_sales * b.l_sales + weights.lambda_inventory * b.l_inventory;
        return b;
    }
};

inline LossGraph loss_graph(Tape& tape, const HeadOutputs& heads, const BatchInput& in, TaskWeights weights) {
    weights.validate();
    auto mse_against = [&tape](Value pred, const std::vector<double>& target) {
        const Shape& s = pred.shape();
        if (shape_numel(s) != target.size()) {
            throw DimensionError("loss: prediction " + shape_str(s) + " vs target length " +
                                 std::to_string(target.size()));
        }
        Value t = tape.constant(Tensor(s, target));
        Value d = sub(pred, t);
        return mean_all(mul(d, d));
    };
    LossGraph g;
    g.weights = weights;
    if (heads.sales.valid()) g.sales = mse_against(heads.sales, in.target_sales);
    if (heads.inventory.valid()) g.inventory = mse_against(heads.inventory, in.target_inventory);
    if (g.sales.valid() && g.inventory.valid()) {
        g.total = add(scale(g.sales, weights.lambda_sales), scale(g.inventory, weights.lambda_inventory));
    } else if (g.sales.valid()) {
        g.total = scale(g.sales, weights.lambda_sales);
    } else if (g.inventory.valid()) {
        g.total = scale(g.inventory, weights.lambda_inventory);
    } else {
        throw ContractError("loss: model has no prediction heads");
    }
    return g;
}

/// Plain-array variant for evaluation paths; same arithmetic as the graph.
inline LossBreakdown compute_loss(const std::vector<double>& sales_hat, const std::vector<double>& sales,
                                  const std::vector<double>& inv_hat, const std::vector<double>& inv,
                                  TaskWeights weights) {
    weights.validate();
    if (sales_hat.size() != sales.size() || inv_hat.size() != inv.size()) {
        throw DimensionError("compute_loss: prediction/target length mismatch");
    }
    auto mse = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return a.empty() ? 0.0 : s / static_cast<double>(a.size());
    };
    LossBreakdown out;
    out.weights_used = weights;
    out.l_sales = mse(sales_hat, sales);
    out.l_inventory = mse(inv_hat, inv);
    out.l_total = weights.lambda_sales * out.l_sales + weights.lambda_inventory * out.l_inventory;
    return out;
}

// ---------------------------------------------------------------------------
// Dynamic task weighting: descent-ratio softmax, Σλ = 2. The faster-improving
// task (smaller loss ratio) receives the smaller weight.
// ---------------------------------------------------------------------------

inline TaskWeights dynamic_task_weights(const std::vector<double>& sales_history,
                                        const std::vector<double>& inventory_history, double temperature) {
    if (!(temperature > 0)) throw ContractError("dynamic_task_weights: temperature must be positive");
    if (sales_history.size() < 2 || inventory_history.size() < 2) return {1.0, 1.0};  // warm-up rule
    for (const auto* h : {&sales_history, &inventory_history}) {
        for (double v : *h) {
            if (!(v > 0)) throw ContractError("dynamic_task_weights: recorded losses must be positive");
        }
    }
    const double r1 = sales_history.back() / sales_history[sales_history.size() - 2];
    const double r2 = inventory_history.back() / inventory_history[inventory_history.size() - 2];
    const double m = std::max(r1 / temperature, r2 / temperature);
    const double e1 = std::exp(r1 / temperature - m);
    const double e2 = std::exp(r2 / temperature - m);
    return {2.0 * e1 / (e1 + e2), 2.0 * e2 / (e1 + e2)};
}

// ---------------------------------------------------------------------------
// TFT-MTL: variable selection conditioned on the static encoder, sinusoidal
// positions, gated residual blocks around causal multi-head attention, and a
// linear horizon expansion feeding two independent prediction heads.
// ---------------------------------------------------------------------------

enum class HeadMode { both, sales_only, inventory_only };

inline std::string head_mode_name(HeadMode m) {
    switch (m) {
        case HeadMode::both: return "tft_mtl";
        case HeadMode::sales_only: return "tft_single_sales";
        case HeadMode::inventory_only: return "tft_single_inventory";
    }
    return "tft_mtl";
}

class TftMtlModel : public ForecastModel {
  public:
    struct Forward {
        HeadOutputs heads;
        Value h_seq;         // [batch·lookback × hidden]
        Value vsn_weights;   // [batch·lookback × num_vars]
        std::vector<std::vector<Value>> attention;  // [batch][head] -> [T × T]
        int batch = 0;
    };

    TftMtlModel(ModelConfig cfg, HeadMode mode = HeadMode::both) : cfg_(std::move(cfg)), mode_(mode) {
        cfg_.validate();
    }

    TftMtlModel(ModelConfig cfg, HeadMode mode, std::uint64_t seed) : TftMtlModel(std::move(cfg), mode) {
        init_params(seed);
    }

    const ModelConfig& config() const override { return cfg_; }
    HeadMode mode() const { return mode_; }
    std::string kind() const override { return head_mode_name(mode_); }

    ParameterStore& params() override { return store_; }
    const ParameterStore& params() const override { return store_; }
    int horizon() const override { return cfg_.horizon; }
    bool has_sales_head() const override { return mode_ != HeadMode::inventory_only; }
    bool has_inventory_head() const override { return mode_ != HeadMode::sales_only; }

    void init_params(std::uint64_t seed) {
        std::mt19937_64 rng = make_rng(seed, 0);
        const int h = cfg_.hidden_dim;
        const int v = cfg_.num_dynamic_vars;
        for (const std::string& f : cfg_.static_order()) {
            add_weight(store_, "static_emb." + f, cfg_.static_vocab_sizes.at(f), h, rng);
        }
        add_weight(store_, "static_enc.w", cfg_.num_static() * h, h, rng);
        add_bias(store_, "static_enc.b", h);
        for (int i = 0; i < v; ++i) {
            const std::string pre = "var_emb." + std::to_string(i);
            add_weight(store_, pre + ".w", 1, h, rng);
            add_bias(store_, pre + ".b", h);
        }
        add_weight(store_, "vsn.pre.w", (v + 1) * h, h, rng);
        add_bias(store_, "vsn.pre.b", h);
        add_grn(store_, "vsn.grn", h, rng);
        add_weight(store_, "vsn.sel.w", h, v, rng);
        add_bias(store_, "vsn.sel.b", v);
        for (int i = 0; i < v; ++i) add_grn(store_, "vsn.var_grn." + std::to_string(i), h, rng);
        add_grn(store_, "enc.grn_a", h, rng);
        add_weight(store_, "attn.wq", h, h, rng);
        add_weight(store_, "attn.wk", h, h, rng);
        add_weight(store_, "attn.wv", h, h, rng);
        add_weight(store_, "attn.wo", h, h, rng);
        add_bias(store_, "attn.bo", h);
        store_.add("enc.post_ln.gain", Tensor::full({h}, 1.0, true));
        store_.add("enc.post_ln.bias", Tensor::zeros({h}, true));
        add_grn(store_, "enc.grn_b", h, rng);
        add_weight(store_, "dec.expand.w", h, cfg_.horizon * h, rng);
        add_bias(store_, "dec.expand.b", cfg_.horizon * h);
        if (has_sales_head()) {
            add_weight(store_, "head.sales.w", h, 1, rng);
            add_bias(store_, "head.sales.b", 1);
        }
        if (has_inventory_head()) {
            add_weight(store_, "head.inventory.w", h, 1, rng);
            add_bias(store_, "head.inventory.b", 1);
        }
    }

    /// Full encoder + heads over a batch. Samples occupy contiguous row
    /// blocks of length `lookback`.
    Forward forward(Tape& tape, const BatchInput& in, bool training = false,
                    std::mt19937_64* dropout_rng = nullptr) {
        check_input(in);
        const int B = in.batch, T = cfg_.lookback, V = cfg_.num_dynamic_vars, H = cfg_.hidden_dim;
        const int N = B * T;
        BoundParams P(store_, tape);
        const bool drop = training && cfg_.dropout_rate > 0.0 && dropout_rng != nullptr;
        auto mask = [&](int rows) {
            return drop ? make_dropout_mask(tape, {rows, H}, cfg_.dropout_rate, *dropout_rng) : Value{};
        };

        // static covariate encoder
        std::vector<Value> static_parts;
        const auto statics = cfg_.static_order();
        for (std::size_t f = 0; f < statics.size(); ++f) {
            std::vector<int> idx(static_cast<std::size_t>(B));
            for (int b = 0; b < B; ++b) idx[static_cast<std::size_t>(b)] = in.static_idx[b * statics.size() + f];
            static_parts.push_back(gather_rows(P("static_emb." + statics[f]), std::move(idx)));
        }
        Value x_s = static_parts.size() == 1 ? static_parts[0] : concat_cols(static_parts);
        Value h_s = encode_static(x_s, P("static_enc.w"), P("static_enc.b"));  // [B × H]
        std::vector<int> tile(static_cast<std::size_t>(N));
        for (int r = 0; r < N; ++r) tile[static_cast<std::size_t>(r)] = r / T;
        Value h_s_rows = gather_rows(h_s, std::move(tile));  // [N × H]

        // per-variable linear embeddings of the dynamic inputs
        std::vector<Value> var_emb;
        var_emb.reserve(static_cast<std::size_t>(V));
        for (int v = 0; v < V; ++v) {
            Tensor col = Tensor::zeros({N, 1});
            for (int r = 0; r < N; ++r) col.data[static_cast<std::size_t>(r)] = in.dynamic[r * V + v];
            const std::string pre = "var_emb." + std::to_string(v);
            var_emb.push_back(add_rowvec(matmul(tape.constant(std::move(col)), P(pre + ".w")), P(pre + ".b")));
        }

        // variable selection conditioned on the static context
        VsnRefs vsn;
        vsn.pre_w = P("vsn.pre.w");
        vsn.pre_b = P("vsn.pre.b");
        vsn.scorer = P.grn("vsn.grn");
        vsn.sel_w = P("vsn.sel.w");
        vsn.sel_b = P("vsn.sel.b");
        for (int v = 0; v < V; ++v) vsn.var_grn.push_back(P.grn("vsn.var_grn." + std::to_string(v)));
        std::vector<Value> var_masks;
        if (drop) {
            for (int v = 0; v < V; ++v) var_masks.push_back(mask(N));
        }
        VsnResult sel = variable_selection(var_emb, h_s_rows, vsn, mask(N), var_masks);

        // positions, gated blocks, causal attention
        Tensor pe_block = positional_encoding(T, H);
        Tensor pe = Tensor::zeros({N, H});
        for (int r = 0; r < N; ++r) {
            const int t = r % T;
            std::copy(pe_block.data.begin() + static_cast<std::ptrdiff_t>(t) * H,
                      pe_block.data.begin() + static_cast<std::ptrdiff_t>(t + 1) * H,
                      pe.data.begin() + static_cast<std::ptrdiff_t>(r) * H);
        }
        Value s0 = add(sel.combined, tape.constant(std::move(pe)));
        Value s1 = grn_forward(s0, P.grn("enc.grn_a"), mask(N));
        AttentionRefs attn{P("attn.wq"), P("attn.wk"), P("attn.wv"), P("attn.wo"), P("attn.bo")};
        AttentionResult att = multi_head_attention(s1, s1, s1, attn, B, T, cfg_.num_heads);
        Value s2 = layer_norm(add(att.fused, s1), P("enc.post_ln.gain"), P("enc.post_ln.bias"));
        Value h_seq = grn_forward(s2, P.grn("enc.grn_b"), mask(N));

        // linear horizon expansion of the final state, then per-position heads
        std::vector<int> last(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) last[static_cast<std::size_t>(b)] = b * T + (T - 1);
        Value h_last = gather_rows(h_seq, std::move(last));                                   // [B × H]
        Value expanded = add_rowvec(matmul(h_last, P("dec.expand.w")), P("dec.expand.b"));    // [B × T_h·H]
        Value h_pos = reshape(expanded, {B * cfg_.horizon, H});

        Forward out;
        out.batch = B;
        out.h_seq = h_seq;
        out.vsn_weights = sel.weights;
        out.attention = std::move(att.weights);
        if (has_sales_head()) {
            out.heads.sales = reshape(add_rowvec(matmul(h_pos, P("head.sales.w")), P("head.sales.b")),
                                      {B, cfg_.horizon});
        }
        if (has_inventory_head()) {
            out.heads.inventory = reshape(add_rowvec(matmul(h_pos, P("head.inventory.w")), P("head.inventory.b")),
                                          {B, cfg_.horizon});
        }
        return out;
    }

    HeadOutputs build(Tape& tape, const BatchInput& in, bool training, std::mt19937_64* dropout_rng) override {
        return forward(tape, in, training, dropout_rng).heads;
    }

    /// Per-sample interpretability traces read off a finished forward pass.
    std::vector<ForwardTrace> extract_traces(const Forward& f) const {
        std::vector<ForwardTrace> out(static_cast<std::size_t>(f.batch));
        const int T = cfg_.lookback, V = cfg_.num_dynamic_vars;
        const Tensor& vw = f.vsn_weights.tensor();
        for (int b = 0; b < f.batch; ++b) {
            ForwardTrace& tr = out[static_cast<std::size_t>(b)];
            tr.num_heads = cfg_.num_heads;
            tr.lookback = T;
            tr.num_vars = V;
            tr.variable.assign(vw.data.begin() + static_cast<std::ptrdiff_t>(b) * T * V,
                               vw.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * T * V);
            tr.attention.reserve(static_cast<std::size_t>(cfg_.num_heads) * T * T);
            for (int h = 0; h < cfg_.num_heads; ++h) {
                const Tensor& aw = f.attention[static_cast<std::size_t>(b)][static_cast<std::size_t>(h)].tensor();
                tr.attention.insert(tr.attention.end(), aw.data.begin(), aw.data.end());
            }
        }
        return out;
    }

  private:
    void check_input(const BatchInput& in) const {
        if (in.batch < 1) throw ContractError("forward: empty batch");
        const std::size_t B = static_cast<std::size_t>(in.batch);
        if (in.dynamic.size() != B * cfg_.lookback * cfg_.num_dynamic_vars) {
            throw DimensionError("forward: dynamic input length " + std::to_string(in.dynamic.size()) +
                                 ", expected batch " + std::to_string(in.batch) + " × lookback " +
                                 std::to_string(cfg_.lookback) + " × vars " + std::to_string(cfg_.num_dynamic_vars));
        }
        if (in.static_idx.size() != B * static_cast<std::size_t>(cfg_.num_static())) {
            throw DimensionError("forward: static index length " + std::to_string(in.static_idx.size()) +
                                 ", expected " + std::to_string(B * cfg_.num_static()));
        }
    }

    ModelConfig cfg_;
    HeadMode mode_;
    ParameterStore store_;
};

// ---------------------------------------------------------------------------
// Batch assembly from window samples (targets normalized lazily, here)
// ---------------------------------------------------------------------------

inline BatchInput make_batch(const std::vector<WindowSample>& samples, const std::vector<std::size_t>& idx,
                             const ModelConfig& cfg, const NormalizerStats& norm) {
    BatchInput b;
    b.batch = static_cast<int>(idx.size());
    b.dynamic.reserve(idx.size() * cfg.lookback * cfg.num_dynamic_vars);
    b.static_idx.reserve(idx.size() * cfg.num_static());
    b.target_sales.reserve(idx.size() * cfg.horizon);
    b.target_inventory.reserve(idx.size() * cfg.horizon);
    for (std::size_t i : idx) {
        const WindowSample& w = samples[i];
        if (static_cast<int>(w.dynamic_past.size()) != cfg.lookback * cfg.num_dynamic_vars) {
            throw DimensionError("make_batch: window features " + std::to_string(w.dynamic_past.size()) +
                                 " vs config lookback×vars " + std::to_string(cfg.lookback * cfg.num_dynamic_vars));
        }
        if (w.horizon() != cfg.horizon) {
            throw DimensionError("make_batch: window horizon " + std::to_string(w.horizon()) + " vs config " +
                                 std::to_string(cfg.horizon));
        }
        b.dynamic.insert(b.dynamic.end(), w.dynamic_past.begin(), w.dynamic_past.end());
        b.static_idx.insert(b.static_idx.end(), w.static_idx.begin(),
                            w.static_idx.begin() + cfg.num_static());
        for (double y : w.target_sales) b.target_sales.push_back(norm.normalize(w.product_id, kSalesFeature, y));
        for (double y : w.target_inventory) {
            b.target_inventory.push_back(norm.normalize(w.product_id, kInventoryFeature, y));
        }
    }
    return b;
}

}  // namespace tftmtl
