#pragma once
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "tftmtl/errors.hpp"
#include "tftmtl/tensor.hpp"

namespace tftmtl {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Value {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& tensor() const;
    const Shape& shape() const;
    std::size_t numel() const;
    /// Value of a single-element node.
    double item() const;
};

// ---------------------------------------------------------------------------
// Tape: records primitive operations in topological order (every node's
// inputs are earlier nodes). backward() walks the list once in reverse and
// accumulates gradients into every requires_grad leaf; unused leaves end up
// with zero gradients.
// ---------------------------------------------------------------------------
class Tape {
  public:
    struct Node {
        Tensor value;
        std::vector<int> inputs;
        std::function<void(Tape&, int)> backprop;  // pulls own grad, pushes into inputs
        std::vector<double> grad;                  // lazily allocated during backward
        Tensor* bound = nullptr;                   // external tensor behind a leaf
        bool requires_grad = false;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Record an external tensor as a leaf. Gradients flow back into t.grad.
    Value leaf(Tensor& t) {
        int id = push(Tensor(t.shape, t.data), {}, nullptr, t.requires_grad);
        nodes_[static_cast<std::size_t>(id)].bound = &t;
        return {this, id};
    }

    /// Record an owned constant (never receives gradient).
    Value constant(Tensor t) { return {this, push(std::move(t), {}, nullptr, false)}; }

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    int push(Tensor value, std::vector<int> inputs, std::function<void(Tape&, int)> bp, bool rg) {
        nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(bp), {}, nullptr, rg});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<double>& grad_buf(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() != n.value.data.size()) n.grad.assign(n.value.data.size(), 0.0);
        return n.grad;
    }

    bool wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Reverse-mode sweep from a scalar loss node. Each node is visited at
    /// most once (reverse id order is a valid reverse-topological order).
    void backward(Value loss) {
        if (loss.tape != this) throw ContractError("backward: value belongs to a different tape");
        const Node& ln = node(loss.id);
        if (ln.value.numel() != 1) {
            throw ContractError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
        }
        for (Node& n : nodes_) n.grad.clear();
        grad_buf(loss.id)[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.requires_grad || n.grad.empty()) continue;
            if (n.backprop) n.backprop(*this, id);
        }
        for (Node& n : nodes_) {
            if (n.bound == nullptr || !n.requires_grad) continue;
            n.bound->ensure_grad();
            if (!n.grad.empty()) {
                for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
            }
        }
    }

    /// Gradient held at a node after backward (zeros if it was never reached).
    std::vector<double> grad_of(Value v) const {
        const Node& n = node(v.id);
        if (n.grad.empty()) return std::vector<double>(n.value.numel(), 0.0);
        return n.grad;
    }

  private:
    std::vector<Node> nodes_;
};

inline const Tensor& Value::tensor() const { return tape->value(id); }
inline const Shape& Value::shape() const { return tape->value(id).shape; }
inline std::size_t Value::numel() const { return tape->value(id).numel(); }
inline double Value::item() const {
    const Tensor& t = tape->value(id);
    if (t.numel() != 1) throw ContractError("item: node is not scalar, shape " + shape_str(t.shape));
    return t.data[0];
}

namespace detail {

inline void require_same_tape(Value a, Value b, const char* op) {
    if (a.tape != b.tape) throw ContractError(std::string(op) + ": values on different tapes");
}

inline void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape));
}

// c[m×n] = a[m×k] · b[k×n]
inline void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::size_t>(i) * n;
        const double* ai = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[m×k] += a[m×n] · b[k×n]ᵀ
inline void gemm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * n;
        double* ci = c + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* bp = b + static_cast<std::size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += ai[j] * bp[j];
            ci[p] += acc;
        }
    }
}

// c[k×n] += a[m×k]ᵀ · b[m×n]
inline void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        const double* bi = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable primitives
// ---------------------------------------------------------------------------

/// Matrix product [m×k]·[k×n] -> [m×n]. Gradients: dA = dC·Bᵀ, dB = Aᵀ·dC.
inline Value matmul(Value a, Value b) {
    detail::require_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    const Tensor& tb = t.value(b.id);
    detail::require_rank2(ta, "matmul");
    detail::require_rank2(tb, "matmul");
    if (ta.dim(1) != tb.dim(0)) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    }
    const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
    Tensor out = Tensor::zeros({m, n});
    detail::gemm_nn(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    bool rg = t.wants_grad(a.id) || t.wants_grad(b.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, bid = b.id, m, k, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            if (tp.wants_grad(aid)) {
                detail::gemm_nt_acc(g.data(), tp.value(bid).data.data(), tp.grad_buf(aid).data(), m, n, k);
            }
            if (tp.wants_grad(bid)) {
                detail::gemm_tn_acc(tp.value(aid).data.data(), g.data(), tp.grad_buf(bid).data(), m, k, n);
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id, b.id}, std::move(bp), rg)};
}

namespace detail {

template <typename Fwd, typename Bwd>
Value elementwise_binary(Value a, Value b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_tape(a, b, name);
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    const Tensor& tb = t.value(b.id);
    if (ta.shape != tb.shape) {
        throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(ta.shape) + " vs " +
                             shape_str(tb.shape));
    }
    Tensor out(ta.shape, std::vector<double>(ta.numel()));
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = fwd(ta.data[i], tb.data[i]);
    bool rg = t.wants_grad(a.id) || t.wants_grad(b.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, bid = b.id, bwd](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& xa = tp.value(aid).data;
            const std::vector<double>& xb = tp.value(bid).data;
            const bool ga = tp.wants_grad(aid), gb = tp.wants_grad(bid);
            std::vector<double>* da = ga ? &tp.grad_buf(aid) : nullptr;
            std::vector<double>* db = gb ? &tp.grad_buf(bid) : nullptr;
            for (std::size_t i = 0; i < g.size(); ++i) bwd(g[i], xa[i], xb[i], da ? &(*da)[i] : nullptr, db ? &(*db)[i] : nullptr);
        };
    }
    return {&t, t.push(std::move(out), {a.id, b.id}, std::move(bp), rg)};
}

template <typename Fwd, typename Bwd>
Value elementwise_unary(Value a, const char* /*name*/, Fwd fwd, Bwd bwd) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    Tensor out(ta.shape, std::vector<double>(ta.numel()));
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = fwd(ta.data[i]);
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, bwd](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& x = tp.value(aid).data;
            const std::vector<double>& y = tp.value(self).data;
            std::vector<double>& da = tp.grad_buf(aid);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bwd(x[i], y[i]);
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

}  // namespace detail

inline Value add(Value a, Value b) {
    return detail::elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double, double* da, double* db) {
            if (da) *da += g;
            if (db) *db += g;
        });
}

inline Value sub(Value a, Value b) {
    return detail::elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double, double* da, double* db) {
            if (da) *da += g;
            if (db) *db -= g;
        });
}

inline Value mul(Value a, Value b) {
    return detail::elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double x, double y, double* da, double* db) {
            if (da) *da += g * y;
            if (db) *db += g * x;
        });
}

inline Value scale(Value a, double c) {
    return detail::elementwise_unary(
        a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Value relu(Value a) {
    return detail::elementwise_unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Value sigmoid(Value a) {
    return detail::elementwise_unary(
        a, "sigmoid",
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Value tanh(Value a) {
    return detail::elementwise_unary(
        a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

/// out[i,j] = a[i,j] + v[j] with v a rank-1 bias of length cols(a).
inline Value add_rowvec(Value a, Value v) {
    detail::require_same_tape(a, v, "add_rowvec");
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    const Tensor& tv = t.value(v.id);
    detail::require_rank2(ta, "add_rowvec");
    if (tv.numel() != static_cast<std::size_t>(ta.dim(1))) {
        throw DimensionError("add_rowvec: bias length " + std::to_string(tv.numel()) + " vs matrix " +
                             shape_str(ta.shape));
    }
    const int m = ta.dim(0), n = ta.dim(1);
    Tensor out(ta.shape, std::vector<double>(ta.numel()));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out.data[static_cast<std::size_t>(i) * n + j] = ta.data[static_cast<std::size_t>(i) * n + j] + tv.data[j];
        }
    }
    bool rg = t.wants_grad(a.id) || t.wants_grad(v.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, vid = v.id, m, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            if (tp.wants_grad(aid)) {
                std::vector<double>& da = tp.grad_buf(aid);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (tp.wants_grad(vid)) {
                std::vector<double>& dv = tp.grad_buf(vid);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) dv[j] += g[static_cast<std::size_t>(i) * n + j];
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id, v.id}, std::move(bp), rg)};
}

/// out[i,j] = a[i,j] · c[i] with c a rank-1 column of length rows(a).
inline Value mul_colvec(Value a, Value c) {
    detail::require_same_tape(a, c, "mul_colvec");
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    const Tensor& tc = t.value(c.id);
    detail::require_rank2(ta, "mul_colvec");
    if (tc.numel() != static_cast<std::size_t>(ta.dim(0))) {
        throw DimensionError("mul_colvec: column length " + std::to_string(tc.numel()) + " vs matrix " +
                             shape_str(ta.shape));
    }
    const int m = ta.dim(0), n = ta.dim(1);
    Tensor out(ta.shape, std::vector<double>(ta.numel()));
    for (int i = 0; i < m; ++i) {
        const double ci = tc.data[i];
        for (int j = 0; j < n; ++j) {
            out.data[static_cast<std::size_t>(i) * n + j] = ta.data[static_cast<std::size_t>(i) * n + j] * ci;
        }
    }
    bool rg = t.wants_grad(a.id) || t.wants_grad(c.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, cid = c.id, m, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& xa = tp.value(aid).data;
            const std::vector<double>& xc = tp.value(cid).data;
            if (tp.wants_grad(aid)) {
                std::vector<double>& da = tp.grad_buf(aid);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        da[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(i) * n + j] * xc[i];
                    }
                }
            }
            if (tp.wants_grad(cid)) {
                std::vector<double>& dc = tp.grad_buf(cid);
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) {
                        acc += g[static_cast<std::size_t>(i) * n + j] * xa[static_cast<std::size_t>(i) * n + j];
                    }
                    dc[i] += acc;
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id, c.id}, std::move(bp), rg)};
}

/// Numerically stabilized softmax along `axis`; every slice sums to 1.
inline Value softmax(Value a, int axis) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    if (axis < 0 || axis >= ta.rank()) {
        throw ContractError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(ta.shape));
    }
    const int len = ta.dim(axis);
    std::size_t inner = 1, outer = 1;
    for (int i = axis + 1; i < ta.rank(); ++i) inner *= static_cast<std::size_t>(ta.dim(i));
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(ta.dim(i));

    Tensor out(ta.shape, std::vector<double>(ta.numel()));
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * static_cast<std::size_t>(len) * inner + in;
            double mx = ta.data[base];
            for (int k = 1; k < len; ++k) mx = std::max(mx, ta.data[base + static_cast<std::size_t>(k) * inner]);
            double sum = 0.0;
            for (int k = 0; k < len; ++k) {
                double e = std::exp(ta.data[base + static_cast<std::size_t>(k) * inner] - mx);
                out.data[base + static_cast<std::size_t>(k) * inner] = e;
                sum += e;
            }
            for (int k = 0; k < len; ++k) out.data[base + static_cast<std::size_t>(k) * inner] /= sum;
        }
    }
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, len, inner, outer](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& y = tp.value(self).data;
            std::vector<double>& da = tp.grad_buf(aid);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * static_cast<std::size_t>(len) * inner + in;
                    double dot = 0.0;
                    for (int k = 0; k < len; ++k) {
                        const std::size_t ix = base + static_cast<std::size_t>(k) * inner;
                        dot += g[ix] * y[ix];
                    }
                    for (int k = 0; k < len; ++k) {
                        const std::size_t ix = base + static_cast<std::size_t>(k) * inner;
                        da[ix] += y[ix] * (g[ix] - dot);
                    }
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

inline constexpr double kLayerNormEps = 1e-5;

/// Per-last-axis-slice normalization: y = gain ⊙ (x − μ)/√(var + 1e-5) + bias.
inline Value layer_norm(Value x, Value gain, Value bias) {
    detail::require_same_tape(x, gain, "layer_norm");
    detail::require_same_tape(x, bias, "layer_norm");
    Tape& t = *x.tape;
    const Tensor& tx = t.value(x.id);
    const Tensor& tg = t.value(gain.id);
    const Tensor& tb = t.value(bias.id);
    const int h = tx.dim(tx.rank() - 1);
    if (tg.numel() != static_cast<std::size_t>(h) || tb.numel() != static_cast<std::size_t>(h)) {
        throw DimensionError("layer_norm: gain/bias length must equal last axis " + std::to_string(h) + " of " +
                             shape_str(tx.shape));
    }
    const std::size_t rows = tx.numel() / static_cast<std::size_t>(h);
    Tensor out(tx.shape, std::vector<double>(tx.numel()));
    std::vector<double> inv_sigma(rows), mu(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = tx.data.data() + r * static_cast<std::size_t>(h);
        double m = 0.0;
        for (int j = 0; j < h; ++j) m += xr[j];
        m /= h;
        double var = 0.0;
        for (int j = 0; j < h; ++j) var += (xr[j] - m) * (xr[j] - m);
        var /= h;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        mu[r] = m;
        inv_sigma[r] = is;
        double* yr = out.data.data() + r * static_cast<std::size_t>(h);
        for (int j = 0; j < h; ++j) yr[j] = tg.data[j] * (xr[j] - m) * is + tb.data[j];
    }
    bool rg = t.wants_grad(x.id) || t.wants_grad(gain.id) || t.wants_grad(bias.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [xid = x.id, gid = gain.id, bid = bias.id, h, rows, mu = std::move(mu),
              inv_sigma = std::move(inv_sigma)](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& xv = tp.value(xid).data;
            const std::vector<double>& gv = tp.value(gid).data;
            const bool wx = tp.wants_grad(xid), wg = tp.wants_grad(gid), wb = tp.wants_grad(bid);
            std::vector<double>* dx = wx ? &tp.grad_buf(xid) : nullptr;
            std::vector<double>* dg = wg ? &tp.grad_buf(gid) : nullptr;
            std::vector<double>* db = wb ? &tp.grad_buf(bid) : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t off = r * static_cast<std::size_t>(h);
                const double is = inv_sigma[r], m = mu[r];
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int j = 0; j < h; ++j) {
                    const double xhat = (xv[off + j] - m) * is;
                    const double dxhat = g[off + j] * gv[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    if (wg) (*dg)[j] += g[off + j] * xhat;
                    if (wb) (*db)[j] += g[off + j];
                }
                if (wx) {
                    for (int j = 0; j < h; ++j) {
                        const double xhat = (xv[off + j] - m) * is;
                        const double dxhat = g[off + j] * gv[j];
                        (*dx)[off + j] += is * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / h);
                    }
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {x.id, gain.id, bias.id}, std::move(bp), rg)};
}

/// Sum of all entries -> [1].
inline Value sum_all(Value a) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    double s = 0.0;
    for (double v : ta.data) s += v;
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id](Tape& tp, int self) {
            const double g = tp.grad_buf(self)[0];
            std::vector<double>& da = tp.grad_buf(aid);
            for (double& v : da) v += g;
        };
    }
    return {&t, t.push(Tensor::scalar(s), {a.id}, std::move(bp), rg)};
}

/// Contiguous row block [r0, r0+len) of a rank-2 tensor.
inline Value slice_rows(Value a, int r0, int len) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    detail::require_rank2(ta, "slice_rows");
    const int m = ta.dim(0), n = ta.dim(1);
    if (r0 < 0 || len <= 0 || r0 + len > m) {
        throw ContractError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r0 + len) +
                            ") out of bounds for " + shape_str(ta.shape));
    }
    Tensor out({len, n}, std::vector<double>(ta.data.begin() + static_cast<std::size_t>(r0) * n,
                                             ta.data.begin() + static_cast<std::size_t>(r0 + len) * n));
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, r0, len, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::vector<double>& da = tp.grad_buf(aid);
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * n; ++i) {
                da[static_cast<std::size_t>(r0) * n + i] += g[i];
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Column block [c0, c0+len) of a rank-2 tensor.
inline Value slice_cols(Value a, int c0, int len) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    detail::require_rank2(ta, "slice_cols");
    const int m = ta.dim(0), n = ta.dim(1);
    if (c0 < 0 || len <= 0 || c0 + len > n) {
        throw ContractError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c0 + len) +
                            ") out of bounds for " + shape_str(ta.shape));
    }
    Tensor out = Tensor::zeros({m, len});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < len; ++j) {
            out.data[static_cast<std::size_t>(i) * len + j] = ta.data[static_cast<std::size_t>(i) * n + c0 + j];
        }
    }
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, c0, len, m, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::vector<double>& da = tp.grad_buf(aid);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < len; ++j) {
                    da[static_cast<std::size_t>(i) * n + c0 + j] += g[static_cast<std::size_t>(i) * len + j];
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Stack rank-2 blocks with equal column counts on top of each other.
inline Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    Tape& t = *parts[0].tape;
    const int n = t.value(parts[0].id).dim(1);
    int m = 0;
    bool rg = false;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Value p : parts) {
        detail::require_same_tape(parts[0], p, "concat_rows");
        const Tensor& tp = t.value(p.id);
        detail::require_rank2(tp, "concat_rows");
        if (tp.dim(1) != n) {
            throw DimensionError("concat_rows: column mismatch " + shape_str(tp.shape) + " vs " +
                                 shape_str(t.value(parts[0].id).shape));
        }
        m += tp.dim(0);
        rg = rg || t.wants_grad(p.id);
        ids.push_back(p.id);
    }
    Tensor out = Tensor::zeros({m, n});
    std::size_t off = 0;
    for (int id : ids) {
        const Tensor& tp = t.value(id);
        std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += tp.numel();
    }
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [ids](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::size_t off = 0;
            for (int id : ids) {
                const std::size_t len = tp.value(id).numel();
                if (tp.wants_grad(id)) {
                    std::vector<double>& d = tp.grad_buf(id);
                    for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
                }
                off += len;
            }
        };
    }
    return {&t, t.push(std::move(out), std::move(ids), std::move(bp), rg)};
}

/// Concatenate rank-2 blocks with equal row counts side by side.
inline Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    Tape& t = *parts[0].tape;
    const int m = t.value(parts[0].id).dim(0);
    int n = 0;
    bool rg = false;
    std::vector<int> ids;
    std::vector<int> widths;
    for (Value p : parts) {
        detail::require_same_tape(parts[0], p, "concat_cols");
        const Tensor& tp = t.value(p.id);
        detail::require_rank2(tp, "concat_cols");
        if (tp.dim(0) != m) {
            throw DimensionError("concat_cols: row mismatch " + shape_str(tp.shape) + " vs " +
                                 shape_str(t.value(parts[0].id).shape));
        }
        n += tp.dim(1);
        rg = rg || t.wants_grad(p.id);
        ids.push_back(p.id);
        widths.push_back(tp.dim(1));
    }
    Tensor out = Tensor::zeros({m, n});
    int coff = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Tensor& tp = t.value(ids[k]);
        const int w = widths[k];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < w; ++j) {
                out.data[static_cast<std::size_t>(i) * n + coff + j] = tp.data[static_cast<std::size_t>(i) * w + j];
            }
        }
        coff += w;
    }
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [ids, widths, m, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            int coff = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const int w = widths[k];
                if (tp.wants_grad(ids[k])) {
                    std::vector<double>& d = tp.grad_buf(ids[k]);
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < w; ++j) {
                            d[static_cast<std::size_t>(i) * w + j] += g[static_cast<std::size_t>(i) * n + coff + j];
                        }
                    }
                }
                coff += w;
            }
        };
    }
    return {&t, t.push(std::move(out), std::move(ids), std::move(bp), rg)};
}

inline Value transpose(Value a) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    detail::require_rank2(ta, "transpose");
    const int m = ta.dim(0), n = ta.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out.data[static_cast<std::size_t>(j) * m + i] = ta.data[static_cast<std::size_t>(i) * n + j];
        }
    }
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, m, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::vector<double>& da = tp.grad_buf(aid);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    da[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Gather rows of a rank-2 tensor by index (duplicates allowed). Backward
/// scatter-adds, so it also serves as embedding lookup and row tiling.
inline Value gather_rows(Value a, std::vector<int> rows) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    detail::require_rank2(ta, "gather_rows");
    const int m = ta.dim(0), n = ta.dim(1);
    for (int r : rows) {
        if (r < 0 || r >= m) {
            throw ContractError("gather_rows: index " + std::to_string(r) + " out of bounds for " +
                                shape_str(ta.shape));
        }
    }
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = ta.data.data() + static_cast<std::size_t>(rows[i]) * n;
        std::copy(src, src + n, out.data.data() + i * static_cast<std::size_t>(n));
    }
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, rows = std::move(rows), n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::vector<double>& da = tp.grad_buf(aid);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (int j = 0; j < n; ++j) {
                    da[static_cast<std::size_t>(rows[i]) * n + j] += g[i * static_cast<std::size_t>(n) + j];
                }
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Same data, new shape (numel must match).
inline Value reshape(Value a, Shape s) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    if (shape_numel(s) != ta.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(ta.shape) + " as " + shape_str(s));
    }
    Tensor out(std::move(s), ta.data);
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            std::vector<double>& da = tp.grad_buf(aid);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Softmax over the allowed prefix of each row of a square score matrix:
/// row t is a distribution over columns 0..t, zero beyond. Row 0 is [1,0,..].
/// Avoids -inf masking entirely, so finite inputs always give finite output.
inline Value causal_softmax(Value a) {
    Tape& t = *a.tape;
    const Tensor& ta = t.value(a.id);
    detail::require_rank2(ta, "causal_softmax");
    if (ta.dim(0) != ta.dim(1)) {
        throw DimensionError("causal_softmax: expected square scores, got " + shape_str(ta.shape));
    }
    const int n = ta.dim(0);
    Tensor out = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        const double* xr = ta.data.data() + static_cast<std::size_t>(i) * n;
        double* yr = out.data.data() + static_cast<std::size_t>(i) * n;
        double mx = xr[0];
        for (int j = 1; j <= i; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (int j = 0; j <= i; ++j) yr[j] /= sum;
    }
    bool rg = t.wants_grad(a.id);
    std::function<void(Tape&, int)> bp;
    if (rg) {
        bp = [aid = a.id, n](Tape& tp, int self) {
            const std::vector<double>& g = tp.grad_buf(self);
            const std::vector<double>& y = tp.value(self).data;
            std::vector<double>& da = tp.grad_buf(aid);
            for (int i = 0; i < n; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j <= i; ++j) dot += g[off + j] * y[off + j];
                for (int j = 0; j <= i; ++j) da[off + j] += y[off + j] * (g[off + j] - dot);
            }
        };
    }
    return {&t, t.push(std::move(out), {a.id}, std::move(bp), rg)};
}

/// Mean of all entries -> [1]. Convenience: scale(sum_all(a), 1/numel).
inline Value mean_all(Value a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

}  // namespace tftmtl
