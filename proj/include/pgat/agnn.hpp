#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pgat/kernels.hpp"
#include "pgat/matrix.hpp"
#include "pgat/pose_graph.hpp"

namespace pgat {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// One attention block: per-head q/k/v projections, an output merge, and the
// residual message MLP [2E -> 2E -> norm -> relu -> E].
struct AttentionBlockParams {
    std::vector<LinearParams> query; // per head, d_k x E
    std::vector<LinearParams> key;
    std::vector<LinearParams> value;
    LinearParams merge;        // E x E
    LinearParams mlp1;         // 2E x 2E
    MaskedNormParams mlp_norm; // 2E features
    LinearParams mlp2;         // E x 2E

    static AttentionBlockParams create(int embed_dim, int heads);
};

struct LayerParams {
    AttentionBlockParams intra;
    AttentionBlockParams inter;
};

struct ModelDims {
    int embed_dim = 256; // E
    int layers = 9;      // L
    int heads = 4;       // h
};

// Positional-encoder hidden widths, fixed: 3 -> 32 -> 64 -> 128 -> E.
inline constexpr int kPosEncoderHidden[3] = {32, 64, 128};

struct ModelParams {
    ModelDims dims;
    std::vector<LinearParams> pos_encoder; // 4 layers
    std::vector<LayerParams> layers;

    static ModelParams create(const ModelDims& dims);

    // Every trainable tensor, in the fixed serialization order shared by the
    // checkpoint format, the optimizer and the gradient checker.
    std::vector<TensorRef> tensor_refs();
    std::size_t parameter_count() const;
};

// Structure-copy with all tensors zeroed; gradient and moment buffers.
ModelParams zeros_like(const ModelParams& model);

// Near-identity initialization: fan-in scaled uniform weights, with the merge
// and final message-MLP layers drawn two orders of magnitude smaller so the
// untrained residual stack starts close to the identity map. Biases zero.
void init_model(ModelParams& model, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Subgraph tensors
// ---------------------------------------------------------------------------

struct SubgraphTensor {
    Matrix x;   // E x N (descriptors, later fused/refined features)
    Matrix pos; // 3 x N normalized positions
    Mask mask;  // per column
};

// pad_to < 0 pads to the subgraph's own size (no padding).
SubgraphTensor make_subgraph_tensor(const Subgraph& sg, int pad_to = -1);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct PosEncoderCache {
    std::vector<Matrix> inputs;  // input to each linear layer
    std::vector<Matrix> pre_act; // each layer's linear output
    Mask mask;
};

Matrix encode_positions(const ModelParams& model, const Matrix& pos, PosEncoderCache* cache);

// Returns gradient w.r.t. the positions; parameter gradients accumulate into
// `grads.pos_encoder`.
Matrix encode_positions_backward(const ModelParams& model, const PosEncoderCache& cache,
                                 const Matrix& d_out, ModelParams& grads);

// X = D + MLP_enc(P), with mask-false columns forced to zero.
Matrix encode_and_fuse(const Matrix& descriptors, const Matrix& pos, const Mask& mask,
                       const ModelParams& model, PosEncoderCache* cache = nullptr);

struct AttentionHeadCache {
    Matrix q, k, v; // d_k x N
    Matrix attn;    // N_R x N_S
};

struct AttentionBlockCache {
    Matrix xr, xs;
    Mask mr, ms;
    std::vector<AttentionHeadCache> heads;
    Matrix merged_in; // head messages stacked, E x N_R
    Matrix cat;       // [x ; m_e], 2E x N_R
    Matrix z1;
    MaskedNormCache norm;
    Matrix normed;
    Matrix h;
};

// One attention + residual-MLP update of the receiver features. Senders and
// receivers may be the same subgraph (intra) or the two halves of a pair
// (inter). Masked receiver columns stay zero.
Matrix attention_block(const Matrix& xr, const Mask& mask_r, const Matrix& xs, const Mask& mask_s,
                       const AttentionBlockParams& params, AttentionBlockCache* cache = nullptr);

// Accumulates into d_xr / d_xs (callers pass zeroed or partially accumulated
// buffers; for intra blocks both may alias the same matrix).
void attention_block_backward(const Matrix& d_out, const AttentionBlockParams& params,
                              const AttentionBlockCache& cache, AttentionBlockParams& grads,
                              Matrix& d_xr, Matrix& d_xs);

struct PgatLayerCache {
    AttentionBlockCache intra_a, intra_b, inter_a, inter_b;
};

struct PgatCache {
    std::vector<PgatLayerCache> layers;
};

// Runs L layers of (intra, inter) attention over the fused pair; inputs must
// already be fused via encode_and_fuse. Updates within each step are computed
// from pre-step values and applied simultaneously.
std::pair<Matrix, Matrix> pgat_forward(const Matrix& xa, const Mask& mask_a, const Matrix& xb,
                                       const Mask& mask_b, const ModelParams& model,
                                       PgatCache* cache = nullptr);

void pgat_backward(const Matrix& d_fa, const Matrix& d_fb, const ModelParams& model,
                   const PgatCache& cache, ModelParams& grads, Matrix& d_xa, Matrix& d_xb);

// Fuse + forward for a subgraph pair, compacting the refined descriptors to
// the unmasked columns.
std::pair<Matrix, Matrix> pgat_apply(const SubgraphTensor& a, const SubgraphTensor& b,
                                     const ModelParams& model);

} // namespace pgat
