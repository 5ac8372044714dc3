#include "pgat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pgat {

Matrix linear_forward(const LinearParams& params, const Matrix& x) {
    if (x.rows() != params.in_dim()) {
        throw DimensionError("linear_forward: input has " + std::to_string(x.rows()) +
                             " rows, layer expects " + std::to_string(params.in_dim()));
    }
    Matrix y = matmul(params.weight, x);
    for (int r = 0; r < y.rows(); ++r) {
        double* row = y.row(r);
        const double b = params.bias[r];
        for (int c = 0; c < y.cols(); ++c) row[c] += b;
    }
    return y;
}

Matrix linear_backward(const LinearParams& params, const Matrix& x, const Matrix& d_out,
                       LinearParams& grads) {
    if (d_out.rows() != params.out_dim() || d_out.cols() != x.cols()) {
        throw DimensionError("linear_backward: gradient shape mismatch");
    }
    if (grads.weight.empty()) grads.weight = Matrix(params.out_dim(), params.in_dim());
    if (grads.bias.empty()) grads.bias.assign(params.bias.size(), 0.0);

    grads.weight.add_scaled(matmul_nt(d_out, x), 1.0);
    for (int r = 0; r < d_out.rows(); ++r) {
        const double* row = d_out.row(r);
        double acc = 0.0;
        for (int c = 0; c < d_out.cols(); ++c) acc += row[c];
        grads.bias[r] += acc;
    }
    return matmul_tn(params.weight, d_out);
}

Matrix masked_layer_norm(const Matrix& x, const Mask& mask, const MaskedNormParams& params,
                         MaskedNormCache* cache) {
    if (static_cast<int>(mask.size()) != x.cols()) {
        throw DimensionError("masked_layer_norm: mask length does not match column count");
    }
    if (static_cast<int>(params.gamma.size()) != x.rows()) {
        throw DimensionError("masked_layer_norm: gamma length does not match feature count");
    }
    const int n_valid = mask_count(mask);
    if (n_valid == 0) {
        throw DegenerateInputError("masked_layer_norm: all columns masked out");
    }

    Matrix out(x.rows(), x.cols());
    Matrix x_hat(x.rows(), x.cols());
    Vector inv_std(x.rows(), 0.0);
    const double inv_n = 1.0 / n_valid;

    for (int r = 0; r < x.rows(); ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (int c = 0; c < x.cols(); ++c) {
            if (mask[c]) mean += xr[c];
        }
        mean *= inv_n;
        double var = 0.0;
        for (int c = 0; c < x.cols(); ++c) {
            if (mask[c]) {
                const double d = xr[c] - mean;
                var += d * d;
            }
        }
        var *= inv_n;
        const double is = 1.0 / std::sqrt(var + params.epsilon);
        inv_std[r] = is;

        double* xh = x_hat.row(r);
        double* o = out.row(r);
        const double g = params.gamma[r];
        const double b = params.beta[r];
        for (int c = 0; c < x.cols(); ++c) {
            if (mask[c]) {
                xh[c] = (xr[c] - mean) * is;
                o[c] = g * xh[c] + b;
            }
        }
    }

    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->mask = mask;
        cache->valid_count = n_valid;
    }
    return out;
}

Matrix masked_layer_norm_backward(const Matrix& d_out, const MaskedNormCache& cache,
                                  const MaskedNormParams& params, MaskedNormParams& grads) {
    const Matrix& x_hat = cache.x_hat;
    if (d_out.rows() != x_hat.rows() || d_out.cols() != x_hat.cols()) {
        throw DimensionError("masked_layer_norm_backward: gradient shape mismatch");
    }
    if (grads.gamma.empty()) grads.gamma.assign(params.gamma.size(), 0.0);
    if (grads.beta.empty()) grads.beta.assign(params.beta.size(), 0.0);

    Matrix d_x(d_out.rows(), d_out.cols());
    const double inv_n = 1.0 / cache.valid_count;

    for (int r = 0; r < d_out.rows(); ++r) {
        const double* dy = d_out.row(r);
        const double* xh = x_hat.row(r);
        const double g = params.gamma[r];
        const double is = cache.inv_std[r];

        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int c = 0; c < d_out.cols(); ++c) {
            if (cache.mask[c]) {
                sum_dy += dy[c];
                sum_dy_xh += dy[c] * xh[c];
            }
        }
        grads.gamma[r] += sum_dy_xh;
        grads.beta[r] += sum_dy;

        double* dx = d_x.row(r);
        for (int c = 0; c < d_out.cols(); ++c) {
            if (cache.mask[c]) {
                dx[c] = g * is * (dy[c] - inv_n * sum_dy - xh[c] * inv_n * sum_dy_xh);
            }
        }
    }
    return d_x;
}

Matrix masked_softmax(const Matrix& scores, const Mask& sender_mask) {
    if (static_cast<int>(sender_mask.size()) != scores.cols()) {
        throw DimensionError("masked_softmax: mask length does not match sender count");
    }
    if (mask_count(sender_mask) == 0) {
        throw DegenerateInputError("masked_softmax: all senders masked out");
    }

    Matrix probs(scores.rows(), scores.cols());
    for (int r = 0; r < scores.rows(); ++r) {
        const double* s = scores.row(r);
        double row_max = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < scores.cols(); ++c) {
            if (sender_mask[c]) row_max = std::max(row_max, s[c]);
        }
        double denom = 0.0;
        double* p = probs.row(r);
        for (int c = 0; c < scores.cols(); ++c) {
            if (sender_mask[c]) {
                p[c] = std::exp(s[c] - row_max);
                denom += p[c];
            }
        }
        const double inv = 1.0 / denom;
        for (int c = 0; c < scores.cols(); ++c) {
            if (sender_mask[c]) p[c] *= inv;
        }
    }
    return probs;
}

Matrix masked_softmax_backward(const Matrix& d_probs, const Matrix& probs,
                               const Mask& sender_mask) {
    if (d_probs.rows() != probs.rows() || d_probs.cols() != probs.cols()) {
        throw DimensionError("masked_softmax_backward: gradient shape mismatch");
    }
    Matrix d_scores(probs.rows(), probs.cols());
    for (int r = 0; r < probs.rows(); ++r) {
        const double* dp = d_probs.row(r);
        const double* p = probs.row(r);
        double dot = 0.0;
        for (int c = 0; c < probs.cols(); ++c) {
            if (sender_mask[c]) dot += dp[c] * p[c];
        }
        double* ds = d_scores.row(r);
        for (int c = 0; c < probs.cols(); ++c) {
            if (sender_mask[c]) ds[c] = p[c] * (dp[c] - dot);
        }
    }
    return d_scores;
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
    return out;
}

Matrix relu_backward(const Matrix& d_out, const Matrix& x) {
    if (d_out.rows() != x.rows() || d_out.cols() != x.cols()) {
        throw DimensionError("relu_backward: gradient shape mismatch");
    }
    Matrix d_x = d_out;
    for (std::size_t i = 0; i < d_x.size(); ++i) {
        if (x.data()[i] <= 0.0) d_x.data()[i] = 0.0;
    }
    return d_x;
}

GradCheckReport grad_check(const std::function<double()>& loss_fn, std::span<TensorRef> params,
                           std::span<const TensorRef> analytic, double epsilon) {
    if (params.size() != analytic.size()) {
        throw DimensionError("grad_check: parameter and gradient lists differ in length");
    }
    GradCheckReport report;
    for (std::size_t t = 0; t < params.size(); ++t) {
        TensorRef& p = params[t];
        const TensorRef& g = analytic[t];
        if (p.size != g.size) {
            throw DimensionError("grad_check: tensor " + p.name + " size mismatch");
        }
        GradCheckEntry entry{p.name, 0.0};
        for (std::size_t i = 0; i < p.size; ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + epsilon;
            const double f_plus = loss_fn();
            p.data[i] = saved - epsilon;
            const double f_minus = loss_fn();
            p.data[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw NumericError("grad_check: non-finite loss while perturbing " + p.name);
            }
            const double g_num = (f_plus - f_minus) / (2.0 * epsilon);
            const double g_ana = g.data[i];
            const double rel =
                std::abs(g_ana - g_num) / std::max({1.0, std::abs(g_ana), std::abs(g_num)});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        if (entry.max_rel_err > report.max_rel_err) {
            report.max_rel_err = entry.max_rel_err;
            report.worst_name = entry.name;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace pgat
