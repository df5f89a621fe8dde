#pragma once
#include <random>
#include <string>
#include <vector>

#include "tftmtl/layers.hpp"
#include "tftmtl/model.hpp"

namespace tftmtl {

/// Single-layer GRU baseline over the same windowed inputs: dynamic features
/// plus small learned static embeddings per step, final hidden state mapped
/// linearly to 2 × horizon outputs. The update gate measures retention:
/// h ← z ⊙ h_prev + (1−z) ⊙ h̃, so a gate forced to 1 freezes the state.
class GruModel : public ForecastModel {
  public:
    static constexpr int kStaticEmbedDim = 8;

    GruModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::mt19937_64 rng = make_rng(seed, 1);
        const int h = cfg_.hidden_dim;
        const int d = input_dim();
        for (const std::string& f : cfg_.static_order()) {
            add_weight(store_, "gru.static_emb." + f, cfg_.static_vocab_sizes.at(f), kStaticEmbedDim, rng);
        }
        for (const char* gate : {"z", "r", "h"}) {
            add_weight(store_, std::string("gru.wx") + gate, d, h, rng);
            add_weight(store_, std::string("gru.wh") + gate, h, h, rng);
            add_bias(store_, std::string("gru.b") + gate, h);
        }
        add_weight(store_, "gru.out.w", h, 2 * cfg_.horizon, rng);
        add_bias(store_, "gru.out.b", 2 * cfg_.horizon);
    }

    const ModelConfig& config() const override { return cfg_; }
    ParameterStore& params() override { return store_; }
    const ParameterStore& params() const override { return store_; }
    int horizon() const override { return cfg_.horizon; }
    bool has_sales_head() const override { return true; }
    bool has_inventory_head() const override { return true; }
    std::string kind() const override { return "gru"; }

    int input_dim() const { return cfg_.num_dynamic_vars + cfg_.num_static() * kStaticEmbedDim; }

    HeadOutputs build(Tape& tape, const BatchInput& in, bool /*training*/, std::mt19937_64* /*rng*/) override {
        const int B = in.batch, T = cfg_.lookback, V = cfg_.num_dynamic_vars, H = cfg_.hidden_dim;
        BoundParams P(store_, tape);

        // constant per-sample static embedding block, reused every step
        Value static_block{};
        const auto statics = cfg_.static_order();
        if (!statics.empty()) {
            std::vector<Value> parts;
            for (std::size_t f = 0; f < statics.size(); ++f) {
                std::vector<int> idx(static_cast<std::size_t>(B));
                for (int b = 0; b < B; ++b) idx[static_cast<std::size_t>(b)] = in.static_idx[b * statics.size() + f];
                parts.push_back(gather_rows(P("gru.static_emb." + statics[f]), std::move(idx)));
            }
            static_block = parts.size() == 1 ? parts[0] : concat_cols(parts);
        }

        Value wxz = P("gru.wxz"), whz = P("gru.whz"), bz = P("gru.bz");
        Value wxr = P("gru.wxr"), whr = P("gru.whr"), br = P("gru.br");
        Value wxh = P("gru.wxh"), whh = P("gru.whh"), bh = P("gru.bh");
        Value h = tape.constant(Tensor::zeros({B, H}));
        Value ones = tape.constant(Tensor::full({B, H}, 1.0));

        for (int t = 0; t < T; ++t) {
            Tensor xt = Tensor::zeros({B, V});
            for (int b = 0; b < B; ++b) {
                for (int v = 0; v < V; ++v) {
                    xt.data[static_cast<std::size_t>(b) * V + v] = in.dynamic[(b * T + t) * V + v];
                }
            }
            Value x = tape.constant(std::move(xt));
            if (static_block.valid()) x = concat_cols({x, static_block});
            Value z = sigmoid(add_rowvec(add(matmul(x, wxz), matmul(h, whz)), bz));
            Value r = sigmoid(add_rowvec(add(matmul(x, wxr), matmul(h, whr)), br));
            Value hc = tanh(add_rowvec(add(matmul(x, wxh), matmul(mul(r, h), whh)), bh));
            h = add(mul(z, h), mul(sub(ones, z), hc));
        }

        Value out = add_rowvec(matmul(h, P("gru.out.w")), P("gru.out.b"));  // [B × 2·horizon]
        HeadOutputs heads;
        heads.sales = slice_cols(out, 0, cfg_.horizon);
        heads.inventory = slice_cols(out, cfg_.horizon, cfg_.horizon);
        return heads;
    }

  private:
    ModelConfig cfg_;
    ParameterStore store_;
};

/// Spec-named convenience: one sample through the baseline.
inline std::pair<std::vector<double>, std::vector<double>> gru_baseline_forward(GruModel& model,
                                                                                const BatchInput& sample) {
    Tape tape;
    HeadOutputs h = model.build(tape, sample, false, nullptr);
    return {h.sales.tensor().data, h.inventory.tensor().data};
}

}  // namespace tftmtl
