#pragma once
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tftmtl/errors.hpp"
#include "tftmtl/tensor.hpp"

namespace tftmtl {

struct AdamWHyper {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// First/second moment buffers over the flattened parameter set.
struct AdamWState {
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
    AdamWHyper hyper;

    static AdamWState init(std::size_t total_params, AdamWHyper h = {}) {
        AdamWState s;
        s.m.assign(total_params, 0.0);
        s.v.assign(total_params, 0.0);
        s.hyper = h;
        return s;
    }
};

/// Decoupled-weight-decay Adam with bias correction:
///   m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²
///   p ← p − lr·( m̂/(√v̂ + eps) + weight_decay·p )
/// Parameters are visited in order; every tensor must carry a gradient.
inline void adamw_step(const std::vector<Tensor*>& params, AdamWState& state) {
    std::size_t total = 0;
    for (const Tensor* p : params) total += p->numel();
    if (state.m.size() != total || state.v.size() != total) {
        throw ContractError("adamw_step: state sized for " + std::to_string(state.m.size()) +
                            " parameters, got " + std::to_string(total));
    }
    state.step += 1;
    const AdamWHyper& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    std::size_t off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        if (p.grad.size() != p.data.size()) {
            throw ContractError("adamw_step: parameter " + std::to_string(k) + " has no gradient (shape " +
                                shape_str(p.shape) + ")");
        }
        for (std::size_t i = 0; i < p.data.size(); ++i, ++off) {
            const double g = p.grad[i];
            state.m[off] = h.beta1 * state.m[off] + (1.0 - h.beta1) * g;
            state.v[off] = h.beta2 * state.v[off] + (1.0 - h.beta2) * g * g;
            const double mhat = state.m[off] / bc1;
            const double vhat = state.v[off] / bc2;
            p.data[i] -= h.lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * p.data[i]);
        }
    }
}

/// Scales all gradients so their joint L2 norm is at most max_norm.
/// Returns the pre-clip norm.
inline double clip_global_norm(const std::vector<Tensor*>& params, double max_norm) {
    double sq = 0.0;
    for (const Tensor* p : params) {
        for (double g : p->grad) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (Tensor* p : params) {
            for (double& g : p->grad) g *= s;
        }
    }
    return norm;
}

inline void zero_grads(const std::vector<Tensor*>& params) {
    for (Tensor* p : params) {
        p->ensure_grad();
        p->zero_grad();
    }
}

}  // namespace tftmtl
