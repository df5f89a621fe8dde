#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tftmtl/errors.hpp"

namespace tftmtl {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major f64 tensor. `grad` is empty until backward() touches it;
/// when present it has the same length as `data`.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;

    Tensor() = default;

    Tensor(Shape s, std::vector<double> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (shape_numel(shape) != data.size()) {
            throw DimensionError("tensor: shape " + shape_str(shape) + " does not match data length " +
                                 std::to_string(data.size()));
        }
        for (int dim : shape) {
            if (dim <= 0) throw DimensionError("tensor: nonpositive dimension in " + shape_str(shape));
        }
    }

    static Tensor zeros(Shape s, bool rg = false) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0), rg);
    }

    static Tensor full(Shape s, double v, bool rg = false) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(n, v), rg);
    }

    static Tensor scalar(double v, bool rg = false) { return Tensor({1}, {v}, rg); }

    static Tensor row(std::vector<double> d, bool rg = false) {
        int n = static_cast<int>(d.size());
        return Tensor({n}, std::move(d), rg);
    }

    static Tensor matrix(int r, int c, std::vector<double> d, bool rg = false) {
        return Tensor({r, c}, std::move(d), rg);
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& v : t.data) v = d(rng);
}

}  // namespace tftmtl
