#pragma once
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tftmtl/params.hpp"
#include "tftmtl/tape.hpp"

namespace tftmtl {

// ---------------------------------------------------------------------------
// Static covariate encoder: h_s = ReLU(W_s x_s + b_s)
// ---------------------------------------------------------------------------

inline Value encode_static(Value x_s, Value w, Value b) { return relu(add_rowvec(matmul(x_s, w), b)); }

// ---------------------------------------------------------------------------
// Gated residual network: LayerNorm(x + GLU(W_t x)) with
// GLU(a) = (W_v a + b_v) ⊙ sigmoid(W_g a + b_g)
// ---------------------------------------------------------------------------

struct GrnRefs {
    Value wt, wv, bv, wg, bg, ln_gain, ln_bias;
};

/// Optional dropout_mask is an inverted-dropout constant applied to the
/// transformed branch; pass an invalid Value outside training.
inline Value grn_forward(Value x, const GrnRefs& p, Value dropout_mask = {}) {
    Value a = matmul(x, p.wt);
    if (dropout_mask.valid()) a = mul(a, dropout_mask);
    Value val = add_rowvec(matmul(a, p.wv), p.bv);
    Value gate = sigmoid(add_rowvec(matmul(a, p.wg), p.bg));
    return layer_norm(add(x, mul(val, gate)), p.ln_gain, p.ln_bias);
}

/// Inverted-dropout mask constant: entries are 0 with probability rate, else
/// 1/(1-rate), so the expected activation is unchanged.
inline Value make_dropout_mask(Tape& tape, Shape shape, double rate, std::mt19937_64& rng) {
    Tensor mask = Tensor::zeros(std::move(shape));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep = 1.0 - rate;
    for (double& v : mask.data) v = unit(rng) < rate ? 0.0 : 1.0 / keep;
    return tape.constant(std::move(mask));
}

// ---------------------------------------------------------------------------
// Variable selection: softmax weights over variables from a GRN scorer on the
// flattened per-variable embeddings + static context; the combined signal is
// the weight-blended per-variable GRN transform.
// ---------------------------------------------------------------------------

struct VsnRefs {
    Value pre_w, pre_b;  // (V+1)·H -> H projection feeding the scorer GRN
    GrnRefs scorer;
    Value sel_w, sel_b;  // H -> V logits
    std::vector<GrnRefs> var_grn;
};

struct VsnResult {
    Value combined;  // [N × H]
    Value weights;   // [N × V], rows nonnegative and summing to 1
};

inline VsnResult variable_selection(const std::vector<Value>& var_embeddings, Value static_context_rows,
                                    const VsnRefs& p, Value scorer_dropout = {},
                                    const std::vector<Value>& var_dropout = {}) {
    const int num_vars = static_cast<int>(var_embeddings.size());
    std::vector<Value> flat_parts = var_embeddings;
    flat_parts.push_back(static_context_rows);
    Value flat = concat_cols(flat_parts);
    Value pre = add_rowvec(matmul(flat, p.pre_w), p.pre_b);
    Value scored = grn_forward(pre, p.scorer, scorer_dropout);
    Value logits = add_rowvec(matmul(scored, p.sel_w), p.sel_b);
    Value weights = softmax(logits, 1);

    Value combined{};
    for (int v = 0; v < num_vars; ++v) {
        Value transformed = grn_forward(var_embeddings[static_cast<std::size_t>(v)],
                                        p.var_grn[static_cast<std::size_t>(v)],
                                        var_dropout.empty() ? Value{} : var_dropout[static_cast<std::size_t>(v)]);
        Value w_col = reshape(slice_cols(weights, v, 1), {static_cast<int>(transformed.shape()[0])});
        Value term = mul_colvec(transformed, w_col);
        combined = combined.valid() ? add(combined, term) : term;
    }
    return {combined, weights};
}

// ---------------------------------------------------------------------------
// Multi-head temporal self-attention with a causal mask; heads are
// concatenated and linearly transformed.
// ---------------------------------------------------------------------------

struct AttentionRefs {
    Value wq, wk, wv;  // [H × H] joint projections, column blocks per head
    Value wo, bo;      // output transform
};

struct AttentionResult {
    Value fused;                              // [B·T × H]
    std::vector<std::vector<Value>> weights;  // [batch][head] -> [T × T]
};

/// Inputs are [batch·lookback × H] with samples stored as contiguous row
/// blocks. Scores within each sample and head are Q·Kᵀ/√d_k under a causal
/// mask, so position t attends only to positions ≤ t.
inline AttentionResult multi_head_attention(Value q_in, Value k_in, Value v_in, const AttentionRefs& p, int batch,
                                            int lookback, int num_heads) {
    const int h = static_cast<int>(q_in.shape()[1]);
    if (h % num_heads != 0) {
        throw DimensionError("attention: hidden dim " + std::to_string(h) + " not divisible by " +
                             std::to_string(num_heads) + " heads");
    }
    const int dk = h / num_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Value q = matmul(q_in, p.wq);
    Value k = matmul(k_in, p.wk);
    Value v = matmul(v_in, p.wv);

    AttentionResult out;
    out.weights.resize(static_cast<std::size_t>(batch));
    std::vector<Value> sample_rows;
    sample_rows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        Value qb = slice_rows(q, b * lookback, lookback);
        Value kb = slice_rows(k, b * lookback, lookback);
        Value vb = slice_rows(v, b * lookback, lookback);
        std::vector<Value> heads;
        heads.reserve(static_cast<std::size_t>(num_heads));
        for (int i = 0; i < num_heads; ++i) {
            Value qh = slice_cols(qb, i * dk, dk);
            Value kh = slice_cols(kb, i * dk, dk);
            Value vh = slice_cols(vb, i * dk, dk);
            Value scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);
            Value attn = causal_softmax(scores);
            out.weights[static_cast<std::size_t>(b)].push_back(attn);
            heads.push_back(matmul(attn, vh));
        }
        sample_rows.push_back(concat_cols(heads));
    }
    Value merged = batch == 1 ? sample_rows[0] : concat_rows(sample_rows);
    out.fused = add_rowvec(matmul(merged, p.wo), p.bo);
    return out;
}

// ---------------------------------------------------------------------------
// Sinusoidal positional encoding
// ---------------------------------------------------------------------------

inline Tensor positional_encoding(int lookback, int hidden) {
    Tensor pe = Tensor::zeros({lookback, hidden});
    for (int t = 0; t < lookback; ++t) {
        for (int j = 0; j < hidden; ++j) {
            const double angle = t / std::pow(10000.0, 2.0 * (j / 2) / static_cast<double>(hidden));
            pe.data[static_cast<std::size_t>(t) * hidden + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

// ---------------------------------------------------------------------------
// Parameter registration helpers (uniform ±1/√fan_in weights, zero biases)
// ---------------------------------------------------------------------------

inline void add_weight(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
    Tensor w = Tensor::zeros({in, out}, true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    fill_uniform(w, -bound, bound, rng);
    store.add(name, std::move(w));
}

inline void add_bias(ParameterStore& store, const std::string& name, int n) {
    store.add(name, Tensor::zeros({n}, true));
}

inline void add_grn(ParameterStore& store, const std::string& prefix, int h, std::mt19937_64& rng) {
    add_weight(store, prefix + ".wt", h, h, rng);
    add_weight(store, prefix + ".wv", h, h, rng);
    add_bias(store, prefix + ".bv", h);
    add_weight(store, prefix + ".wg", h, h, rng);
    add_bias(store, prefix + ".bg", h);
    store.add(prefix + ".ln_gain", Tensor::full({h}, 1.0, true));
    store.add(prefix + ".ln_bias", Tensor::zeros({h}, true));
}

/// Bound-parameter view of a store on a tape.
class BoundParams {
  public:
    BoundParams(ParameterStore& store, Tape& tape) : store_(&store), tape_(&tape) {}

    Value operator()(const std::string& name) const { return tape_->leaf(store_->get(name)); }

    GrnRefs grn(const std::string& prefix) const {
        return {(*this)(prefix + ".wt"), (*this)(prefix + ".wv"), (*this)(prefix + ".bv"),
                (*this)(prefix + ".wg"), (*this)(prefix + ".bg"), (*this)(prefix + ".ln_gain"),
                (*this)(prefix + ".ln_bias")};
    }

  private:
    ParameterStore* store_;
    Tape* tape_;
};

}  // namespace tftmtl
