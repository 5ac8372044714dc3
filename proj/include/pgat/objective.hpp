#pragma once

#include "pgat/matrix.hpp"
#include "pgat/pose_graph.hpp"

namespace pgat {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the logs.
inline constexpr double kProbClamp = 1e-7;

// Cosine similarity between every column of fa and every column of fb.
// Throws on (near-)zero-norm columns.
Matrix similarity_matrix(const Matrix& fa, const Matrix& fb);

// p = 0.5 s + 0.5, elementwise.
Matrix to_probability(const Matrix& s);

struct BceResult {
    double loss_sum = 0.0; // summed over active pairs
    long active_pairs = 0; // count of omega != 0 entries

    double mean() const { return active_pairs > 0 ? loss_sum / active_pairs : 0.0; }
};

BceResult weighted_bce(const Matrix& probs, const PairLabels& labels);

// Fused similarity -> probability -> BCE over the unmasked columns of a
// refined descriptor pair, with gradients to fa/fb. Labels must be sized like
// fa.cols() x fb.cols() with omega = 0 at padded entries. Gradients are
// scaled by grad_scale and accumulated; pass null to skip the backward pass.
BceResult pair_objective(const Matrix& fa, const Mask& mask_a, const Matrix& fb,
                         const Mask& mask_b, const PairLabels& labels, double grad_scale = 1.0,
                         Matrix* d_fa = nullptr, Matrix* d_fb = nullptr);

} // namespace pgat
