#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgat/matrix.hpp"

namespace pgat {

// ---------------------------------------------------------------------------
// Linear layer: y = W x + b applied column-wise.
// ---------------------------------------------------------------------------

struct LinearParams {
    Matrix weight; // out x in
    Vector bias;   // out

    LinearParams() = default;
    LinearParams(int out_dim, int in_dim) : weight(out_dim, in_dim), bias(out_dim, 0.0) {}

    int in_dim() const { return weight.cols(); }
    int out_dim() const { return weight.rows(); }
};

Matrix linear_forward(const LinearParams& params, const Matrix& x);

// d_out is the gradient w.r.t. the output; accumulates parameter gradients
// into a parameter-shaped buffer and returns the gradient w.r.t. the input.
Matrix linear_backward(const LinearParams& params, const Matrix& x, const Matrix& d_out,
                       LinearParams& grads);

// ---------------------------------------------------------------------------
// Masked layer normalization: per-feature statistics over mask-true columns.
// Padding columns contribute nothing and are zeroed in the output.
// ---------------------------------------------------------------------------

struct MaskedNormParams {
    Vector gamma;
    Vector beta;
    double epsilon = 1e-5;

    MaskedNormParams() = default;
    explicit MaskedNormParams(int features, double eps = 1e-5)
        : gamma(features, 1.0), beta(features, 0.0), epsilon(eps) {}
};

struct MaskedNormCache {
    Matrix x_hat;      // standardized values, zero at masked columns
    Vector inv_std;    // per feature
    Mask mask;
    int valid_count = 0;
};

Matrix masked_layer_norm(const Matrix& x, const Mask& mask, const MaskedNormParams& params,
                         MaskedNormCache* cache = nullptr);

Matrix masked_layer_norm_backward(const Matrix& d_out, const MaskedNormCache& cache,
                                  const MaskedNormParams& params, MaskedNormParams& grads);

// ---------------------------------------------------------------------------
// Masked softmax over sender columns, row-max stabilized.
// ---------------------------------------------------------------------------

Matrix masked_softmax(const Matrix& scores, const Mask& sender_mask);

// probs is the forward output; returns gradient w.r.t. scores.
Matrix masked_softmax_backward(const Matrix& d_probs, const Matrix& probs,
                               const Mask& sender_mask);

// ---------------------------------------------------------------------------
// Rectifier.
// ---------------------------------------------------------------------------

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& d_out, const Matrix& x);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

// Named view over one parameter (or input) tensor; the gradient checker and
// the optimizer walk models through flat lists of these.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    std::vector<int> shape;
};

inline TensorRef ref(const std::string& name, Matrix& m) {
    return {name, m.data(), m.size(), {m.rows(), m.cols()}};
}
inline TensorRef ref(const std::string& name, Vector& v) {
    return {name, v.data(), v.size(), {static_cast<int>(v.size())}};
}

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    std::string worst_name;

    bool passes(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of `analytic` against the loss function. `params`
// are perturbed in place and restored; relative error per scalar is
// |g_a - g_n| / max(1, |g_a|, |g_n|). The loss must be deterministic.
GradCheckReport grad_check(const std::function<double()>& loss_fn, std::span<TensorRef> params,
                           std::span<const TensorRef> analytic, double epsilon);

} // namespace pgat
