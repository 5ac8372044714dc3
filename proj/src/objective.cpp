#include "pgat/objective.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace pgat {

namespace {

// Column norms; throws when a column of a matrix that takes part in a cosine
// is numerically zero.
std::vector<double> column_norms_checked(const Matrix& m, const Mask* mask, const char* side) {
    std::vector<double> norms(m.cols(), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) norms[c] += row[c] * row[c];
    }
    for (int c = 0; c < m.cols(); ++c) {
        if (mask && !(*mask)[c]) continue;
        norms[c] = std::sqrt(norms[c]);
        if (norms[c] < 1e-12) {
            throw DegenerateInputError(std::string("degenerate descriptor: ") + side + " column " +
                                       std::to_string(c) + " has (near-)zero norm");
        }
    }
    return norms;
}

} // namespace

Matrix similarity_matrix(const Matrix& fa, const Matrix& fb) {
    if (fa.rows() != fb.rows()) {
        throw DimensionError("similarity_matrix: descriptor dims disagree");
    }
    const std::vector<double> na = column_norms_checked(fa, nullptr, "left");
    const std::vector<double> nb = column_norms_checked(fb, nullptr, "right");
    Matrix s = matmul_tn(fa, fb);
    for (int i = 0; i < s.rows(); ++i) {
        double* row = s.row(i);
        const double inv_a = 1.0 / na[i];
        for (int j = 0; j < s.cols(); ++j) row[j] *= inv_a / nb[j];
    }
    return s;
}

Matrix to_probability(const Matrix& s) {
    Matrix p = s;
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = 0.5 * p.data()[i] + 0.5;
    return p;
}

BceResult weighted_bce(const Matrix& probs, const PairLabels& labels) {
    if (probs.rows() != labels.y.rows() || probs.cols() != labels.y.cols() ||
        probs.rows() != labels.omega.rows() || probs.cols() != labels.omega.cols()) {
        throw DimensionError("weighted_bce: shape mismatch between probabilities and labels");
    }
    BceResult res;
    for (int i = 0; i < probs.rows(); ++i) {
        for (int j = 0; j < probs.cols(); ++j) {
            const double w = labels.omega(i, j);
            if (w == 0.0) continue;
            const double y = labels.y(i, j);
            const double p = std::min(std::max(probs(i, j), kProbClamp), 1.0 - kProbClamp);
            res.loss_sum -= w * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            res.active_pairs += 1;
        }
    }
    return res;
}

BceResult pair_objective(const Matrix& fa, const Mask& mask_a, const Matrix& fb,
                         const Mask& mask_b, const PairLabels& labels, double grad_scale,
                         Matrix* d_fa, Matrix* d_fb) {
    if (fa.rows() != fb.rows()) {
        throw DimensionError("pair_objective: descriptor dims disagree");
    }
    if (labels.y.rows() != fa.cols() || labels.y.cols() != fb.cols()) {
        throw DimensionError("pair_objective: labels shaped " + std::to_string(labels.y.rows()) +
                             "x" + std::to_string(labels.y.cols()) + ", features " +
                             std::to_string(fa.cols()) + "x" + std::to_string(fb.cols()));
    }
    const int dim = fa.rows();
    const std::vector<double> na = column_norms_checked(fa, &mask_a, "left");
    const std::vector<double> nb = column_norms_checked(fb, &mask_b, "right");

    BceResult res;
    for (int i = 0; i < fa.cols(); ++i) {
        if (!mask_a[i]) continue;
        for (int j = 0; j < fb.cols(); ++j) {
            if (!mask_b[j]) continue;
            const double w = labels.omega(i, j);
            if (w == 0.0) continue;
            const double y = labels.y(i, j);

            double dot = 0.0;
            for (int r = 0; r < dim; ++r) dot += fa(r, i) * fb(r, j);
            const double s = dot / (na[i] * nb[j]);
            const double p_raw = 0.5 * s + 0.5;
            const double p = std::min(std::max(p_raw, kProbClamp), 1.0 - kProbClamp);
            res.loss_sum -= w * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            res.active_pairs += 1;

            if (d_fa && d_fb && p_raw > kProbClamp && p_raw < 1.0 - kProbClamp) {
                // dL/dp through the affine map, then the cosine quotient rule.
                const double dl_dp = w * (p - y) / (p * (1.0 - p));
                const double dl_ds = 0.5 * dl_dp * grad_scale;
                const double inv_ab = 1.0 / (na[i] * nb[j]);
                const double coeff_a = s / (na[i] * na[i]);
                const double coeff_b = s / (nb[j] * nb[j]);
                for (int r = 0; r < dim; ++r) {
                    (*d_fa)(r, i) += dl_ds * (fb(r, j) * inv_ab - coeff_a * fa(r, i));
                    (*d_fb)(r, j) += dl_ds * (fa(r, i) * inv_ab - coeff_b * fb(r, j));
                }
            }
        }
    }
    return res;
}

} // namespace pgat
