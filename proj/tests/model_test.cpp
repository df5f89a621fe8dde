#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "tftmtl/adamw.hpp"
#include "tftmtl/gru.hpp"
#include "tftmtl/model.hpp"

using namespace tftmtl;
using testutil::random_tensor;

namespace {

ModelConfig toy_config(int hidden = 8, int heads = 2, int lookback = 4, int horizon = 2, int vars = 3) {
    ModelConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.num_heads = heads;
    cfg.lookback = lookback;
    cfg.horizon = horizon;
    cfg.num_dynamic_vars = vars;
    cfg.static_vocab_sizes = {{"product_id", 4}, {"category", 3}};
    cfg.dropout_rate = 0.0;
    return cfg;
}

BatchInput toy_batch(const ModelConfig& cfg, int batch, std::uint64_t seed, bool with_targets = true) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.5, 1.5);
    BatchInput in;
    in.batch = batch;
    in.dynamic.resize(static_cast<std::size_t>(batch) * cfg.lookback * cfg.num_dynamic_vars);
    for (double& v : in.dynamic) v = unit(rng);
    for (int b = 0; b < batch; ++b) {
        for (const std::string& f : cfg.static_order()) {
            in.static_idx.push_back(static_cast<int>(rng() % cfg.static_vocab_sizes.at(f)));
        }
    }
    if (with_targets) {
        in.target_sales.resize(static_cast<std::size_t>(batch) * cfg.horizon);
        in.target_inventory.resize(static_cast<std::size_t>(batch) * cfg.horizon);
        for (double& v : in.target_sales) v = unit(rng);
        for (double& v : in.target_inventory) v = unit(rng);
    }
    return in;
}

// Flattened-parameter loss and gradient routes for finite-difference checks.
std::vector<double> flatten_params(const ParameterStore& store) {
    std::vector<double> out;
    for (const auto& [name, t] : store.entries()) out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

void load_params(ParameterStore& store, const std::vector<double>& x) {
    std::size_t off = 0;
    for (auto& [name, t] : store.entries()) {
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + t.numel()),
                  t.data.begin());
        off += t.numel();
    }
}

double model_loss(ForecastModel& model, const BatchInput& in, TaskWeights w) {
    Tape tape;
    return loss_graph(tape, model.build(tape, in, false, nullptr), in, w).total.item();
}

std::vector<double> model_grad(ForecastModel& model, const BatchInput& in, TaskWeights w) {
    zero_grads(model.params().all());
    Tape tape;
    tape.backward(loss_graph(tape, model.build(tape, in, false, nullptr), in, w).total);
    std::vector<double> g;
    for (const auto& [name, t] : model.params().entries()) g.insert(g.end(), t.grad.begin(), t.grad.end());
    return g;
}

tftmtl::GradCheckReport model_grad_check(ForecastModel& model, const BatchInput& in, TaskWeights w, double eps) {
    auto value_fn = [&](const std::vector<double>& x) {
        load_params(model.params(), x);
        return model_loss(model, in, w);
    };
    auto grad_fn = [&](const std::vector<double>& x) {
        load_params(model.params(), x);
        return model_grad(model, in, w);
    };
    return finite_diff_report(value_fn, grad_fn, flatten_params(model.params()), eps);
}

}  // namespace

// ---------------------------------------------------------------------------
// encode_static
// ---------------------------------------------------------------------------

TEST(EncodeStatic, IdentityWeightsExposeRelu) {
    Tape t;
    Value x = t.constant(Tensor::matrix(1, 3, {1.0, -2.0, 0.5}));
    Value w = t.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    Value b = t.constant(Tensor::zeros({3}));
    EXPECT_EQ(encode_static(x, w, b).tensor().data, (std::vector<double>{1.0, 0.0, 0.5}));
}

TEST(EncodeStatic, ZeroInputZeroBias) {
    Tape t;
    std::mt19937_64 rng(5);
    Value x = t.constant(Tensor::zeros({1, 4}));
    Value w = t.constant(random_tensor({4, 6}, rng));
    Value b = t.constant(Tensor::zeros({6}));
    for (double v : encode_static(x, w, b).tensor().data) EXPECT_EQ(v, 0.0);
}

TEST(EncodeStatic, MatchesDirectFormula) {
    std::mt19937_64 rng(6);
    Tensor x = random_tensor({2, 4}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({5}, rng);
    Tape t;
    const Tensor& y = encode_static(t.constant(x), t.constant(w), t.constant(b)).tensor();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 5; ++j) {
            double acc = b.data[static_cast<std::size_t>(j)];
            for (int k = 0; k < 4; ++k) acc += x.at2(i, k) * w.at2(k, j);
            EXPECT_NEAR(y.at2(i, j), std::max(0.0, acc), 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// grn_forward
// ---------------------------------------------------------------------------

namespace {
GrnRefs make_grn_values(Tape& t, const std::vector<Tensor>& p) {
    return {t.constant(p[0]), t.constant(p[1]), t.constant(p[2]), t.constant(p[3]),
            t.constant(p[4]), t.constant(p[5]), t.constant(p[6])};
}

std::vector<Tensor> random_grn(int h, std::mt19937_64& rng) {
    return {random_tensor({h, h}, rng), random_tensor({h, h}, rng), random_tensor({h}, rng),
            random_tensor({h, h}, rng), random_tensor({h}, rng), random_tensor({h}, rng, 0.5, 1.5),
            random_tensor({h}, rng)};
}
}  // namespace

TEST(Grn, ZeroGluIsPlainLayerNorm) {
    std::mt19937_64 rng(8);
    const int h = 5;
    std::vector<Tensor> p = random_grn(h, rng);
    p[1] = Tensor::zeros({h, h});  // wv
    p[2] = Tensor::zeros({h});     // bv
    p[3] = Tensor::zeros({h, h});  // wg
    p[4] = Tensor::zeros({h});     // bg
    p[5] = Tensor::full({h}, 1.0);
    p[6] = Tensor::zeros({h});
    Tensor x = random_tensor({3, h}, rng);
    Tape t;
    Value y = grn_forward(t.constant(x), make_grn_values(t, p));
    Value ln = layer_norm(t.constant(x), t.constant(p[5]), t.constant(p[6]));
    EXPECT_EQ(y.tensor().data, ln.tensor().data);
}

TEST(Grn, ConstantRowAndZeroGluGivesZero) {
    std::mt19937_64 rng(9);
    const int h = 4;
    std::vector<Tensor> p = random_grn(h, rng);
    for (int i : {1, 2, 3, 4}) p[static_cast<std::size_t>(i)] = Tensor::zeros(p[static_cast<std::size_t>(i)].shape);
    p[5] = Tensor::full({h}, 1.0);
    p[6] = Tensor::zeros({h});
    Tape t;
    Value y = grn_forward(t.constant(Tensor::full({1, h}, 2.7)), make_grn_values(t, p));
    for (double v : y.tensor().data) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Grn, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(10);
    const int h = 4;
    std::vector<Tensor> init = random_grn(h, rng);
    init.insert(init.begin(), random_tensor({2, h}, rng));  // x first
    auto rep = testutil::check_graph(
        init,
        [](Tape&, std::vector<Value>& v) {
            GrnRefs p{v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
            Value y = grn_forward(v[0], p);
            return sum_all(mul(y, y));
        },
        1e-5);
    EXPECT_LE(rep.max_rel_error, 1e-4);
}

// ---------------------------------------------------------------------------
// variable_selection
// ---------------------------------------------------------------------------

namespace {
struct VsnFixture {
    std::vector<Tensor> pre;                  // pre_w, pre_b
    std::vector<Tensor> scorer;               // grn params
    std::vector<Tensor> sel;                  // sel_w, sel_b
    std::vector<std::vector<Tensor>> var_grn; // per var

    static VsnFixture random(int num_vars, int h, std::mt19937_64& rng) {
        VsnFixture f;
        f.pre = {random_tensor({(num_vars + 1) * h, h}, rng), random_tensor({h}, rng)};
        f.scorer = random_grn(h, rng);
        f.sel = {random_tensor({h, num_vars}, rng), random_tensor({num_vars}, rng)};
        for (int v = 0; v < num_vars; ++v) f.var_grn.push_back(random_grn(h, rng));
        return f;
    }

    VsnRefs bind(Tape& t) const {
        VsnRefs r;
        r.pre_w = t.constant(pre[0]);
        r.pre_b = t.constant(pre[1]);
        r.scorer = make_grn_values(t, scorer);
        r.sel_w = t.constant(sel[0]);
        r.sel_b = t.constant(sel[1]);
        for (const auto& g : var_grn) r.var_grn.push_back(make_grn_values(t, g));
        return r;
    }
};
}  // namespace

TEST(VariableSelection, SymmetricScorerGivesUniformWeights) {
    std::mt19937_64 rng(12);
    const int h = 4, steps = 5;
    VsnFixture f = VsnFixture::random(2, h, rng);
    // identical per-variable GRNs and a variable-symmetric scorer head
    f.var_grn[1] = f.var_grn[0];
    for (int i = 0; i < h; ++i) f.sel[0].at2(i, 1) = f.sel[0].at2(i, 0);
    f.sel[1].data[1] = f.sel[1].data[0];
    Tensor emb = random_tensor({steps, h}, rng);
    Tensor ctx = random_tensor({steps, h}, rng);
    Tape t;
    VsnResult r = variable_selection({t.constant(emb), t.constant(emb)}, t.constant(ctx), f.bind(t));
    for (int s = 0; s < steps; ++s) {
        EXPECT_NEAR(r.weights.tensor().at2(s, 0), 0.5, 1e-12);
        EXPECT_NEAR(r.weights.tensor().at2(s, 1), 0.5, 1e-12);
    }
}

TEST(VariableSelection, SingleVariableGetsWeightOne) {
    std::mt19937_64 rng(13);
    const int h = 4, steps = 3;
    VsnFixture f = VsnFixture::random(1, h, rng);
    Tape t;
    VsnResult r = variable_selection({t.constant(random_tensor({steps, h}, rng))},
                                     t.constant(random_tensor({steps, h}, rng)), f.bind(t));
    for (int s = 0; s < steps; ++s) EXPECT_EQ(r.weights.tensor().at2(s, 0), 1.0);
}

TEST(VariableSelection, CombinedMatchesExplicitWeightedSum) {
    std::mt19937_64 rng(14);
    const int h = 4, steps = 6, vars = 3;
    VsnFixture f = VsnFixture::random(vars, h, rng);
    std::vector<Tensor> embs;
    for (int v = 0; v < vars; ++v) embs.push_back(random_tensor({steps, h}, rng));
    Tensor ctx = random_tensor({steps, h}, rng);

    Tape t;
    std::vector<Value> emb_vals;
    for (const auto& e : embs) emb_vals.push_back(t.constant(e));
    VsnResult r = variable_selection(emb_vals, t.constant(ctx), f.bind(t));

    // oracle: recompute Σ_v w_v · GRN_v(emb_v) outside the layer
    std::vector<double> acc(static_cast<std::size_t>(steps) * h, 0.0);
    for (int v = 0; v < vars; ++v) {
        Tape t2;
        const Tensor& g = grn_forward(t2.constant(embs[static_cast<std::size_t>(v)]),
                                      make_grn_values(t2, f.var_grn[static_cast<std::size_t>(v)]))
                              .tensor();
        for (int s = 0; s < steps; ++s) {
            const double w = r.weights.tensor().at2(s, v);
            for (int j = 0; j < h; ++j) acc[static_cast<std::size_t>(s) * h + j] += w * g.at2(s, j);
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(r.combined.tensor().data[i], acc[i], 1e-12);
}

TEST(VariableSelection, WeightRowsAreDistributions) {
    std::mt19937_64 rng(15);
    const int h = 6, steps = 7, vars = 4;
    VsnFixture f = VsnFixture::random(vars, h, rng);
    std::vector<Value> embs;
    Tape t;
    for (int v = 0; v < vars; ++v) embs.push_back(t.constant(random_tensor({steps, h}, rng)));
    VsnResult r = variable_selection(embs, t.constant(random_tensor({steps, h}, rng)), f.bind(t));
    for (int s = 0; s < steps; ++s) {
        double sum = 0.0;
        for (int v = 0; v < vars; ++v) {
            EXPECT_GE(r.weights.tensor().at2(s, v), 0.0);
            sum += r.weights.tensor().at2(s, v);
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

// ---------------------------------------------------------------------------
// multi_head_attention
// ---------------------------------------------------------------------------

namespace {
struct AttnFixture {
    Tensor wq, wk, wv, wo, bo;
    static AttnFixture random(int h, std::mt19937_64& rng) {
        return {random_tensor({h, h}, rng), random_tensor({h, h}, rng), random_tensor({h, h}, rng),
                random_tensor({h, h}, rng), random_tensor({h}, rng)};
    }
    AttentionRefs bind(Tape& t) const {
        return {t.constant(wq), t.constant(wk), t.constant(wv), t.constant(wo), t.constant(bo)};
    }
};

// independent reference: plain loops over raw buffers
std::vector<double> naive_attention(const Tensor& x, const AttnFixture& p, int heads) {
    const int T = x.dim(0), H = x.dim(1), dk = H / heads;
    auto project = [&](const Tensor& w) {
        std::vector<double> out(static_cast<std::size_t>(T) * H, 0.0);
        for (int i = 0; i < T; ++i) {
            for (int j = 0; j < H; ++j) {
                double acc = 0.0;
                for (int k = 0; k < H; ++k) acc += x.at2(i, k) * w.at2(k, j);
                out[static_cast<std::size_t>(i) * H + j] = acc;
            }
        }
        return out;
    };
    auto q = project(p.wq), k = project(p.wk), v = project(p.wv);
    std::vector<double> merged(static_cast<std::size_t>(T) * H, 0.0);
    for (int h = 0; h < heads; ++h) {
        for (int t = 0; t < T; ++t) {
            // softmax over prefix 0..t of q_t·k_s/√dk
            std::vector<double> scores(static_cast<std::size_t>(t) + 1);
            double mx = -1e300;
            for (int s = 0; s <= t; ++s) {
                double acc = 0.0;
                for (int d = 0; d < dk; ++d) {
                    acc += q[static_cast<std::size_t>(t) * H + h * dk + d] *
                           k[static_cast<std::size_t>(s) * H + h * dk + d];
                }
                scores[static_cast<std::size_t>(s)] = acc / std::sqrt(static_cast<double>(dk));
                mx = std::max(mx, scores[static_cast<std::size_t>(s)]);
            }
            double z = 0.0;
            for (double& sc : scores) {
                sc = std::exp(sc - mx);
                z += sc;
            }
            for (int s = 0; s <= t; ++s) {
                const double w = scores[static_cast<std::size_t>(s)] / z;
                for (int d = 0; d < dk; ++d) {
                    merged[static_cast<std::size_t>(t) * H + h * dk + d] +=
                        w * v[static_cast<std::size_t>(s) * H + h * dk + d];
                }
            }
        }
    }
    std::vector<double> out(static_cast<std::size_t>(T) * H, 0.0);
    for (int i = 0; i < T; ++i) {
        for (int j = 0; j < H; ++j) {
            double acc = p.bo.data[static_cast<std::size_t>(j)];
            for (int c = 0; c < H; ++c) acc += merged[static_cast<std::size_t>(i) * H + c] * p.wo.at2(c, j);
            out[static_cast<std::size_t>(i) * H + j] = acc;
        }
    }
    return out;
}
}  // namespace

TEST(Attention, SingleKeyIsIdentityWeight) {
    std::mt19937_64 rng(16);
    const int h = 6;
    AttnFixture f = AttnFixture::random(h, rng);
    Tensor x = random_tensor({1, h}, rng);
    Tape t;
    Value xv = t.constant(x);
    AttentionResult r = multi_head_attention(xv, xv, xv, f.bind(t), 1, 1, 3);
    for (const Value& w : r.weights[0]) EXPECT_EQ(w.tensor().data, std::vector<double>{1.0});
    // fused == W_o · (projected v) + b_o
    Tape t2;
    Value ref = add_rowvec(matmul(matmul(t2.constant(x), t2.constant(f.wv)), t2.constant(f.wo)), t2.constant(f.bo));
    for (std::size_t i = 0; i < ref.tensor().numel(); ++i) {
        EXPECT_NEAR(r.fused.tensor().data[i], ref.tensor().data[i], 1e-12);
    }
}

TEST(Attention, EqualLogitsGiveUniformPrefixRows) {
    std::mt19937_64 rng(17);
    const int h = 4, T = 5;
    AttnFixture f = AttnFixture::random(h, rng);
    f.wq = Tensor::zeros({h, h});  // zero queries → all scores equal
    Tensor x = random_tensor({T, h}, rng);
    Tape t;
    Value xv = t.constant(x);
    AttentionResult r = multi_head_attention(xv, xv, xv, f.bind(t), 1, T, 2);
    for (const Value& w : r.weights[0]) {
        for (int row = 0; row < T; ++row) {
            for (int col = 0; col < T; ++col) {
                const double expect = col <= row ? 1.0 / (row + 1) : 0.0;
                EXPECT_NEAR(w.tensor().at2(row, col), expect, 1e-12);
            }
        }
    }
}

TEST(Attention, MatchesNaiveReference) {
    std::mt19937_64 rng(18);
    const int h = 8, T = 6;
    AttnFixture f = AttnFixture::random(h, rng);
    Tensor x = random_tensor({T, h}, rng);
    Tape t;
    Value xv = t.constant(x);
    AttentionResult r = multi_head_attention(xv, xv, xv, f.bind(t), 1, T, 4);
    std::vector<double> ref = naive_attention(x, f, 4);
    ASSERT_EQ(ref.size(), r.fused.tensor().numel());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.fused.tensor().data[i], ref[i], 1e-10);
}

TEST(Attention, RowsSumToOne) {
    std::mt19937_64 rng(19);
    const int h = 8, T = 7, B = 3;
    AttnFixture f = AttnFixture::random(h, rng);
    Tape t;
    Value xv = t.constant(random_tensor({B * T, h}, rng));
    AttentionResult r = multi_head_attention(xv, xv, xv, f.bind(t), B, T, 2);
    for (const auto& sample : r.weights) {
        for (const Value& w : sample) {
            for (int row = 0; row < T; ++row) {
                double sum = 0.0;
                for (int col = 0; col < T; ++col) {
                    EXPECT_GE(w.tensor().at2(row, col), 0.0);
                    sum += w.tensor().at2(row, col);
                }
                EXPECT_NEAR(sum, 1.0, 1e-9);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

TEST(Model, ShapeContract) {
    for (int hidden : {8, 12}) {
        ModelConfig cfg = toy_config(hidden, 2, 5, 3, 4);
        TftMtlModel model(cfg, HeadMode::both, 11);
        BatchInput in = toy_batch(cfg, 2, 21);
        Tape tape;
        auto f = model.forward(tape, in);
        EXPECT_EQ(f.h_seq.shape(), (Shape{2 * 5, hidden}));
        EXPECT_EQ(f.vsn_weights.shape(), (Shape{2 * 5, 4}));
        EXPECT_EQ(f.heads.sales.shape(), (Shape{2, 3}));
        EXPECT_EQ(f.heads.inventory.shape(), (Shape{2, 3}));
        EXPECT_EQ(f.attention.size(), 2u);
        EXPECT_EQ(f.attention[0].size(), 2u);
        EXPECT_EQ(f.attention[0][0].shape(), (Shape{5, 5}));
    }
}

TEST(Model, DefaultHorizonIsFourteen) {
    ModelConfig cfg;
    cfg.num_dynamic_vars = 3;
    cfg.static_vocab_sizes = {{"product_id", 3}};
    cfg.dropout_rate = 0.0;
    ASSERT_EQ(cfg.horizon, 14);
    TftMtlModel model(cfg, HeadMode::both, 1);
    BatchInput in = toy_batch(cfg, 1, 2);
    Tape tape;
    auto f = model.forward(tape, in);
    EXPECT_EQ(f.heads.sales.shape(), (Shape{1, 14}));
    EXPECT_EQ(f.heads.inventory.shape(), (Shape{1, 14}));
}

TEST(Model, DeterministicForward) {
    ModelConfig cfg = toy_config();
    BatchInput in = toy_batch(cfg, 3, 33);
    auto run = [&] {
        TftMtlModel model(cfg, HeadMode::both, 77);
        Tape tape;
        return model.forward(tape, in).h_seq.tensor().data;
    };
    EXPECT_EQ(run(), run());
}

TEST(Model, BatchedEqualsPerSample) {
    ModelConfig cfg = toy_config();
    TftMtlModel model(cfg, HeadMode::both, 5);
    BatchInput in = toy_batch(cfg, 3, 44);
    Tape tape;
    auto batched = model.forward(tape, in);
    for (int b = 0; b < 3; ++b) {
        BatchInput single;
        single.batch = 1;
        const int row = cfg.lookback * cfg.num_dynamic_vars;
        single.dynamic.assign(in.dynamic.begin() + b * row, in.dynamic.begin() + (b + 1) * row);
        single.static_idx.assign(in.static_idx.begin() + b * cfg.num_static(),
                                 in.static_idx.begin() + (b + 1) * cfg.num_static());
        Tape t2;
        auto one = model.forward(t2, single);
        for (int t = 0; t < cfg.lookback; ++t) {
            for (int j = 0; j < cfg.hidden_dim; ++j) {
                EXPECT_EQ(one.h_seq.tensor().at2(t, j), batched.h_seq.tensor().at2(b * cfg.lookback + t, j));
            }
        }
        for (int h = 0; h < cfg.horizon; ++h) {
            EXPECT_EQ(one.heads.sales.tensor().at2(0, h), batched.heads.sales.tensor().at2(b, h));
        }
    }
}

TEST(Model, AllZeroParamsGiveBiasPredictions) {
    ModelConfig cfg = toy_config();
    TftMtlModel model(cfg, HeadMode::both, 3);
    for (auto& [name, t] : model.params().entries()) std::fill(t.data.begin(), t.data.end(), 0.0);
    model.params().get("head.sales.b").data[0] = 3.25;
    model.params().get("head.inventory.b").data[0] = -1.5;
    BatchInput in = toy_batch(cfg, 2, 55);
    Tape tape;
    auto f = model.forward(tape, in);
    for (double v : f.heads.sales.tensor().data) EXPECT_EQ(v, 3.25);
    for (double v : f.heads.inventory.tensor().data) EXPECT_EQ(v, -1.5);
}

TEST(Model, HeadsShareNoParameters) {
    ModelConfig cfg = toy_config();
    TftMtlModel model(cfg, HeadMode::both, 9);
    BatchInput in = toy_batch(cfg, 2, 66);
    Tape t1;
    std::vector<double> sales_before = model.forward(t1, in).heads.sales.tensor().data;
    // perturbing the inventory head leaves sales output bit-identical
    for (double& v : model.params().get("head.inventory.w").data) v += 0.5;
    model.params().get("head.inventory.b").data[0] += 2.0;
    Tape t2;
    auto f2 = model.forward(t2, in);
    EXPECT_EQ(f2.heads.sales.tensor().data, sales_before);
}

TEST(Model, TraceRowsAreDistributions) {
    ModelConfig cfg = toy_config(8, 2, 6, 2, 4);
    TftMtlModel model(cfg, HeadMode::both, 13);
    std::mt19937_64 seeds(100);
    for (int rep = 0; rep < 20; ++rep) {
        BatchInput in = toy_batch(cfg, 2, seeds());
        Tape tape;
        auto f = model.forward(tape, in);
        for (const ForwardTrace& tr : model.extract_traces(f)) {
            for (int t = 0; t < tr.lookback; ++t) {
                double vsum = 0.0;
                for (int v = 0; v < tr.num_vars; ++v) {
                    EXPECT_GE(tr.var_weight(t, v), 0.0);
                    vsum += tr.var_weight(t, v);
                }
                EXPECT_NEAR(vsum, 1.0, 1e-9);
                for (int h = 0; h < tr.num_heads; ++h) {
                    double asum = 0.0;
                    for (int s = 0; s < tr.lookback; ++s) {
                        EXPECT_GE(tr.attn(h, t, s), 0.0);
                        asum += tr.attn(h, t, s);
                    }
                    EXPECT_NEAR(asum, 1.0, 1e-9);
                }
            }
        }
    }
}

TEST(Model, CausalityExactForAllSteps) {
    ModelConfig cfg = toy_config(8, 2, 8, 2, 3);
    TftMtlModel model(cfg, HeadMode::both, 17);
    BatchInput base = toy_batch(cfg, 1, 77);
    Tape t0;
    const std::vector<double> h0 = model.forward(t0, base).h_seq.tensor().data;
    const int H = cfg.hidden_dim, V = cfg.num_dynamic_vars;
    for (int t = 0; t < cfg.lookback; ++t) {
        BatchInput in = base;
        in.dynamic[static_cast<std::size_t>(t) * V + 1] += 0.37;
        Tape tp;
        const std::vector<double> h1 = model.forward(tp, in).h_seq.tensor().data;
        for (int pos = 0; pos < cfg.lookback; ++pos) {
            bool same = true;
            for (int j = 0; j < H; ++j) {
                same = same && h0[static_cast<std::size_t>(pos) * H + j] == h1[static_cast<std::size_t>(pos) * H + j];
            }
            if (pos < t) {
                EXPECT_TRUE(same) << "position " << pos << " changed by perturbation at step " << t;
            } else if (pos == t) {
                EXPECT_FALSE(same) << "perturbation at step " << t << " had no effect at its own position";
            }
        }
    }
}

TEST(Model, PermutingVariablesWithTheirParamsIsNoOp) {
    ModelConfig cfg = toy_config(8, 2, 4, 2, 3);
    TftMtlModel a(cfg, HeadMode::both, 23);
    TftMtlModel b(cfg, HeadMode::both, 23);

    // swap variables 0 and 1 in model b: embeddings, per-var GRNs, the
    // pre-projection row blocks, and the selection logits
    auto& sb = b.params();
    const int H = cfg.hidden_dim;
    std::swap(sb.get("var_emb.0.w").data, sb.get("var_emb.1.w").data);
    std::swap(sb.get("var_emb.0.b").data, sb.get("var_emb.1.b").data);
    for (const char* part : {".wt", ".wv", ".bv", ".wg", ".bg", ".ln_gain", ".ln_bias"}) {
        std::swap(sb.get(std::string("vsn.var_grn.0") + part).data,
                  sb.get(std::string("vsn.var_grn.1") + part).data);
    }
    Tensor& pre = sb.get("vsn.pre.w");
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < H; ++c) std::swap(pre.at2(r, c), pre.at2(H + r, c));
    }
    Tensor& sel = sb.get("vsn.sel.w");
    for (int r = 0; r < H; ++r) std::swap(sel.at2(r, 0), sel.at2(r, 1));
    std::swap(sb.get("vsn.sel.b").data[0], sb.get("vsn.sel.b").data[1]);

    BatchInput in = toy_batch(cfg, 2, 88);
    BatchInput permuted = in;
    const int V = cfg.num_dynamic_vars;
    for (std::size_t r = 0; r < in.dynamic.size() / V; ++r) {
        std::swap(permuted.dynamic[r * V + 0], permuted.dynamic[r * V + 1]);
    }

    Tape ta, tb;
    const auto ha = a.forward(ta, in).h_seq.tensor().data;
    const auto hb = b.forward(tb, permuted).h_seq.tensor().data;
    ASSERT_EQ(ha.size(), hb.size());
    for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_NEAR(ha[i], hb[i], 1e-9);
}

TEST(Model, BadInputDimensionsNamed) {
    ModelConfig cfg = toy_config();
    TftMtlModel model(cfg, HeadMode::both, 2);
    BatchInput in = toy_batch(cfg, 2, 3);
    in.dynamic.pop_back();
    Tape tape;
    EXPECT_THROW(model.forward(tape, in), DimensionError);
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

TEST(Loss, PerfectFitIsZero) {
    std::vector<double> y = {1.0, 2.0, 3.0};
    LossBreakdown b = compute_loss(y, y, y, y, {1.0, 1.0});
    EXPECT_EQ(b.l_sales, 0.0);
    EXPECT_EQ(b.l_inventory, 0.0);
    EXPECT_EQ(b.l_total, 0.0);
}

TEST(Loss, WeightedSumIdentity) {
    // sales diffs {0,2,2,0} → mse 2; inventory diffs {1,1,1,3} → mse 3
    std::vector<double> zeros4 = {0, 0, 0, 0};
    LossBreakdown b = compute_loss({0, 2, 2, 0}, zeros4, {1, 1, 1, 3}, zeros4, {1.0, 1.0});
    EXPECT_EQ(b.l_sales, 2.0);
    EXPECT_EQ(b.l_inventory, 3.0);
    EXPECT_EQ(b.l_total, 5.0);
}

TEST(Loss, HandEvaluatedSalesOnly) {
    LossBreakdown b = compute_loss({1, 3}, {0, 0}, {0, 0}, {0, 0}, {1.0, 0.0});
    EXPECT_EQ(b.l_total, 5.0);  // (1 + 9) / 2
}

TEST(Loss, GraphBreakdownSatisfiesIdentityExactly) {
    ModelConfig cfg = toy_config();
    TftMtlModel model(cfg, HeadMode::both, 31);
    BatchInput in = toy_batch(cfg, 3, 99);
    Tape tape;
    TaskWeights w{0.7, 1.3};
    LossGraph g = loss_graph(tape, model.build(tape, in, false, nullptr), in, w);
    LossBreakdown b = g.breakdown();
    EXPECT_EQ(b.l_total, w.lambda_sales * b.l_sales + w.lambda_inventory * b.l_inventory);
    EXPECT_EQ(g.total.item(), b.l_total);
}

TEST(Loss, HeadIsolationExactZeroGradients) {
    ModelConfig cfg = toy_config();
    {
        TftMtlModel model(cfg, HeadMode::both, 41);
        BatchInput in = toy_batch(cfg, 2, 111);
        zero_grads(model.params().all());
        Tape tape;
        tape.backward(loss_graph(tape, model.build(tape, in, false, nullptr), in, {1.0, 0.0}).total);
        for (double g : model.params().get("head.inventory.w").grad) EXPECT_EQ(g, 0.0);
        for (double g : model.params().get("head.inventory.b").grad) EXPECT_EQ(g, 0.0);
        bool some_sales_grad = false;
        for (double g : model.params().get("head.sales.w").grad) some_sales_grad = some_sales_grad || g != 0.0;
        EXPECT_TRUE(some_sales_grad);
    }
    {
        TftMtlModel model(cfg, HeadMode::both, 41);
        BatchInput in = toy_batch(cfg, 2, 111);
        zero_grads(model.params().all());
        Tape tape;
        tape.backward(loss_graph(tape, model.build(tape, in, false, nullptr), in, {0.0, 1.0}).total);
        for (double g : model.params().get("head.sales.w").grad) EXPECT_EQ(g, 0.0);
        for (double g : model.params().get("head.sales.b").grad) EXPECT_EQ(g, 0.0);
    }
}

TEST(Loss, EndToEndGradientMatchesFiniteDifferences) {
    ModelConfig cfg = toy_config(8, 2, 4, 2, 3);
    TftMtlModel model(cfg, HeadMode::both, 51);
    BatchInput in = toy_batch(cfg, 2, 222);
    auto rep = model_grad_check(model, in, {1.0, 1.0}, 1e-5);
    EXPECT_LE(rep.max_rel_error, 1e-4) << "worst param index " << rep.worst_index << " analytic "
                                       << rep.worst_analytic << " central " << rep.worst_central;
}

// ---------------------------------------------------------------------------
// dynamic_task_weights
// ---------------------------------------------------------------------------

TEST(DynamicWeights, IdenticalHistoriesGiveUnitWeights) {
    TaskWeights w = dynamic_task_weights({2.0, 1.0, 0.5}, {2.0, 1.0, 0.5}, 1.0);
    EXPECT_EQ(w.lambda_sales, 1.0);
    EXPECT_EQ(w.lambda_inventory, 1.0);
}

TEST(DynamicWeights, WarmupReturnsUnitWeights) {
    TaskWeights w = dynamic_task_weights({1.0}, {2.0}, 1.0);
    EXPECT_EQ(w.lambda_sales, 1.0);
    EXPECT_EQ(w.lambda_inventory, 1.0);
}

TEST(DynamicWeights, HandEvaluatedSoftmax) {
    // r = (0.5, 1.0), temperature 1
    TaskWeights w = dynamic_task_weights({2.0, 1.0}, {1.0, 1.0}, 1.0);
    const double e1 = std::exp(0.5), e2 = std::exp(1.0);
    EXPECT_NEAR(w.lambda_sales, 2.0 * e1 / (e1 + e2), 1e-12);
    EXPECT_NEAR(w.lambda_inventory, 2.0 * e2 / (e1 + e2), 1e-12);
    EXPECT_NEAR(w.lambda_sales, 0.755, 5e-4);
    EXPECT_NEAR(w.lambda_inventory, 1.245, 5e-4);
    // faster-improving task gets the smaller weight, Σλ = 2
    EXPECT_LT(w.lambda_sales, w.lambda_inventory);
    EXPECT_NEAR(w.lambda_sales + w.lambda_inventory, 2.0, 1e-12);
}

TEST(DynamicWeights, NonpositiveLossRejected) {
    EXPECT_THROW(dynamic_task_weights({1.0, 0.0}, {1.0, 1.0}, 1.0), ContractError);
}

// ---------------------------------------------------------------------------
// GRU baseline
// ---------------------------------------------------------------------------

TEST(Gru, ZeroWeightsGiveBiasOutputs) {
    ModelConfig cfg = toy_config();
    GruModel gru(cfg, 7);
    for (auto& [name, t] : gru.params().entries()) std::fill(t.data.begin(), t.data.end(), 0.0);
    auto& ob = gru.params().get("gru.out.b");
    for (std::size_t i = 0; i < ob.data.size(); ++i) ob.data[i] = static_cast<double>(i) + 0.5;
    BatchInput in = toy_batch(cfg, 1, 12);
    auto [sales, inv] = gru_baseline_forward(gru, in);
    for (int h = 0; h < cfg.horizon; ++h) {
        EXPECT_EQ(sales[static_cast<std::size_t>(h)], h + 0.5);
        EXPECT_EQ(inv[static_cast<std::size_t>(h)], cfg.horizon + h + 0.5);
    }
}

TEST(Gru, ForcedUpdateGateFreezesHiddenState) {
    ModelConfig cfg = toy_config();
    GruModel gru(cfg, 9);
    // z ≡ sigmoid(1000) == 1 exactly; h stays at its zero initial value, so
    // the output equals the output bias
    std::fill(gru.params().get("gru.wxz").data.begin(), gru.params().get("gru.wxz").data.end(), 0.0);
    std::fill(gru.params().get("gru.whz").data.begin(), gru.params().get("gru.whz").data.end(), 0.0);
    std::fill(gru.params().get("gru.bz").data.begin(), gru.params().get("gru.bz").data.end(), 1000.0);
    BatchInput in = toy_batch(cfg, 2, 13);
    auto [sales, inv] = gru_baseline_forward(gru, in);
    const auto& ob = gru.params().get("gru.out.b").data;
    for (int h = 0; h < cfg.horizon; ++h) {
        EXPECT_EQ(sales[static_cast<std::size_t>(h)], ob[static_cast<std::size_t>(h)]);
        EXPECT_EQ(inv[static_cast<std::size_t>(h)], ob[static_cast<std::size_t>(cfg.horizon + h)]);
    }
}

TEST(Gru, GradientMatchesFiniteDifferences) {
    ModelConfig cfg = toy_config(6, 2, 4, 2, 3);
    GruModel gru(cfg, 19);
    BatchInput in = toy_batch(cfg, 2, 14);
    auto rep = model_grad_check(gru, in, {1.0, 1.0}, 1e-5);
    EXPECT_LE(rep.max_rel_error, 1e-4) << "worst param index " << rep.worst_index;
}
