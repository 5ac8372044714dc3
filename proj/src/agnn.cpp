#include "pgat/agnn.hpp"

#include <cmath>
#include <string>

#include "pgat/rng.hpp"

namespace pgat {

AttentionBlockParams AttentionBlockParams::create(int embed_dim, int heads) {
    const int dk = embed_dim / heads;
    AttentionBlockParams p;
    p.query.reserve(heads);
    p.key.reserve(heads);
    p.value.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        p.query.emplace_back(dk, embed_dim);
        p.key.emplace_back(dk, embed_dim);
        p.value.emplace_back(dk, embed_dim);
    }
    p.merge = LinearParams(embed_dim, embed_dim);
    p.mlp1 = LinearParams(2 * embed_dim, 2 * embed_dim);
    p.mlp_norm = MaskedNormParams(2 * embed_dim);
    p.mlp2 = LinearParams(embed_dim, 2 * embed_dim);
    return p;
}

ModelParams ModelParams::create(const ModelDims& dims) {
    if (dims.embed_dim < 1 || dims.layers < 0 || dims.heads < 1) {
        throw DimensionError("model dims must satisfy E >= 1, L >= 0, h >= 1");
    }
    if (dims.embed_dim % dims.heads != 0) {
        throw DimensionError("embed dim " + std::to_string(dims.embed_dim) +
                             " not divisible by head count " + std::to_string(dims.heads));
    }
    ModelParams m;
    m.dims = dims;
    int in = 3;
    for (int hidden : kPosEncoderHidden) {
        m.pos_encoder.emplace_back(hidden, in);
        in = hidden;
    }
    m.pos_encoder.emplace_back(dims.embed_dim, in);
    m.layers.reserve(dims.layers);
    for (int l = 0; l < dims.layers; ++l) {
        m.layers.push_back(LayerParams{AttentionBlockParams::create(dims.embed_dim, dims.heads),
                                       AttentionBlockParams::create(dims.embed_dim, dims.heads)});
    }
    return m;
}

namespace {

void append_linear_refs(std::vector<TensorRef>& refs, const std::string& prefix,
                        LinearParams& lin) {
    refs.push_back(ref(prefix + ".weight", lin.weight));
    refs.push_back(ref(prefix + ".bias", lin.bias));
}

void append_block_refs(std::vector<TensorRef>& refs, const std::string& prefix,
                       AttentionBlockParams& block) {
    for (std::size_t h = 0; h < block.query.size(); ++h) {
        const std::string head = prefix + ".heads." + std::to_string(h);
        append_linear_refs(refs, head + ".query", block.query[h]);
        append_linear_refs(refs, head + ".key", block.key[h]);
        append_linear_refs(refs, head + ".value", block.value[h]);
    }
    append_linear_refs(refs, prefix + ".merge", block.merge);
    append_linear_refs(refs, prefix + ".mlp.0", block.mlp1);
    refs.push_back(ref(prefix + ".mlp.norm.gamma", block.mlp_norm.gamma));
    refs.push_back(ref(prefix + ".mlp.norm.beta", block.mlp_norm.beta));
    append_linear_refs(refs, prefix + ".mlp.1", block.mlp2);
}

} // namespace

std::vector<TensorRef> ModelParams::tensor_refs() {
    std::vector<TensorRef> refs;
    for (std::size_t i = 0; i < pos_encoder.size(); ++i) {
        append_linear_refs(refs, "enc." + std::to_string(i), pos_encoder[i]);
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l);
        append_block_refs(refs, prefix + ".intra", layers[l].intra);
        append_block_refs(refs, prefix + ".inter", layers[l].inter);
    }
    return refs;
}

std::size_t ModelParams::parameter_count() const {
    auto& self = const_cast<ModelParams&>(*this); // refs are read-only here
    std::size_t total = 0;
    for (const TensorRef& r : self.tensor_refs()) total += r.size;
    return total;
}

ModelParams zeros_like(const ModelParams& model) {
    ModelParams z = ModelParams::create(model.dims);
    for (TensorRef& r : z.tensor_refs()) {
        for (std::size_t i = 0; i < r.size; ++i) r.data[i] = 0.0;
    }
    return z;
}

namespace {

void init_linear(LinearParams& lin, Rng& rng, double scale_factor) {
    const double scale = scale_factor / std::sqrt(static_cast<double>(lin.in_dim()));
    for (std::size_t i = 0; i < lin.weight.size(); ++i) {
        lin.weight.data()[i] = rng.uniform(-scale, scale);
    }
    for (double& b : lin.bias) b = 0.0;
}

} // namespace

void init_model(ModelParams& model, std::uint64_t seed) {
    Rng rng(derive_stream(seed, 0x1417));
    for (LinearParams& lin : model.pos_encoder) init_linear(lin, rng, 1.0);
    for (LayerParams& layer : model.layers) {
        for (AttentionBlockParams* block : {&layer.intra, &layer.inter}) {
            for (LinearParams& lin : block->query) init_linear(lin, rng, 1.0);
            for (LinearParams& lin : block->key) init_linear(lin, rng, 1.0);
            for (LinearParams& lin : block->value) init_linear(lin, rng, 1.0);
            init_linear(block->merge, rng, 0.01);
            init_linear(block->mlp1, rng, 1.0);
            init_linear(block->mlp2, rng, 0.01);
            std::fill(block->mlp_norm.gamma.begin(), block->mlp_norm.gamma.end(), 1.0);
            std::fill(block->mlp_norm.beta.begin(), block->mlp_norm.beta.end(), 0.0);
        }
    }
}

SubgraphTensor make_subgraph_tensor(const Subgraph& sg, int pad_to) {
    const int n = sg.size();
    if (n == 0) throw InputError("make_subgraph_tensor: empty subgraph");
    const int width = pad_to < 0 ? n : pad_to;
    if (width < n) throw DimensionError("make_subgraph_tensor: pad width smaller than subgraph");
    const int dim = static_cast<int>(sg.descriptors[0]->size());

    SubgraphTensor t;
    t.x = Matrix(dim, width);
    t.pos = Matrix(3, width);
    t.mask.assign(width, 0);
    for (int j = 0; j < n; ++j) {
        const Vector& d = *sg.descriptors[j];
        if (static_cast<int>(d.size()) != dim) {
            throw DimensionError("make_subgraph_tensor: inconsistent descriptor length");
        }
        for (int r = 0; r < dim; ++r) t.x(r, j) = d[r];
        for (int r = 0; r < 3; ++r) t.pos(r, j) = sg.p[j][r];
        t.mask[j] = 1;
    }
    return t;
}

Matrix encode_positions(const ModelParams& model, const Matrix& pos, PosEncoderCache* cache) {
    if (pos.rows() != 3) throw DimensionError("encode_positions: positions must have 3 rows");
    Matrix cur = pos;
    const std::size_t n_layers = model.pos_encoder.size();
    if (cache) {
        cache->inputs.clear();
        cache->pre_act.clear();
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        if (cache) cache->inputs.push_back(cur);
        Matrix z = linear_forward(model.pos_encoder[i], cur);
        if (cache) cache->pre_act.push_back(z);
        cur = (i + 1 < n_layers) ? relu(z) : std::move(z);
    }
    return cur;
}

Matrix encode_positions_backward(const ModelParams& model, const PosEncoderCache& cache,
                                 const Matrix& d_out, ModelParams& grads) {
    Matrix d = d_out;
    for (int i = static_cast<int>(model.pos_encoder.size()) - 1; i >= 0; --i) {
        if (i + 1 < static_cast<int>(model.pos_encoder.size())) {
            d = relu_backward(d, cache.pre_act[i]);
        }
        Matrix d_w = matmul_nt(d, cache.inputs[i]);
        grads.pos_encoder[i].weight.add_scaled(d_w, 1.0);
        for (int r = 0; r < d.rows(); ++r) {
            double acc = 0.0;
            const double* row = d.row(r);
            for (int c = 0; c < d.cols(); ++c) acc += row[c];
            grads.pos_encoder[i].bias[r] += acc;
        }
        d = matmul_tn(model.pos_encoder[i].weight, d);
    }
    return d;
}

Matrix encode_and_fuse(const Matrix& descriptors, const Matrix& pos, const Mask& mask,
                       const ModelParams& model, PosEncoderCache* cache) {
    if (descriptors.rows() != model.dims.embed_dim) {
        throw DimensionError("encode_and_fuse: descriptor dim " +
                             std::to_string(descriptors.rows()) + " does not match model E " +
                             std::to_string(model.dims.embed_dim));
    }
    if (descriptors.cols() != pos.cols() ||
        static_cast<int>(mask.size()) != descriptors.cols()) {
        throw DimensionError("encode_and_fuse: column counts disagree");
    }
    Matrix fused = descriptors + encode_positions(model, pos, cache);
    zero_masked_columns(fused, mask);
    if (cache) cache->mask = mask;
    return fused;
}

Matrix attention_block(const Matrix& xr, const Mask& mask_r, const Matrix& xs, const Mask& mask_s,
                       const AttentionBlockParams& params, AttentionBlockCache* cache) {
    const int embed = params.merge.out_dim();
    if (xr.rows() != embed || xs.rows() != embed) {
        throw DimensionError("attention_block: feature dim mismatch");
    }
    if (static_cast<int>(mask_r.size()) != xr.cols() ||
        static_cast<int>(mask_s.size()) != xs.cols()) {
        throw DimensionError("attention_block: mask length mismatch");
    }
    if (mask_count(mask_s) == 0) {
        throw DegenerateInputError("attention_block: all sender nodes masked out");
    }
    const int heads = static_cast<int>(params.query.size());
    const int dk = params.query[0].out_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const int n_r = xr.cols();

    Matrix stacked(embed, n_r); // per-head messages, concatenated along features
    std::vector<AttentionHeadCache> head_caches;
    if (cache) head_caches.resize(heads);

    for (int h = 0; h < heads; ++h) {
        Matrix q = linear_forward(params.query[h], xr);
        Matrix k = linear_forward(params.key[h], xs);
        Matrix v = linear_forward(params.value[h], xs);

        Matrix scores = matmul_tn(q, k); // N_R x N_S
        for (std::size_t i = 0; i < scores.size(); ++i) scores.data()[i] *= scale;
        Matrix attn = masked_softmax(scores, mask_s);

        Matrix msg = matmul_nt(v, attn); // d_k x N_R
        for (int r = 0; r < dk; ++r) {
            double* dst = stacked.row(h * dk + r);
            const double* src = msg.row(r);
            for (int c = 0; c < n_r; ++c) dst[c] = src[c];
        }
        if (cache) {
            head_caches[h].q = std::move(q);
            head_caches[h].k = std::move(k);
            head_caches[h].v = std::move(v);
            head_caches[h].attn = std::move(attn);
        }
    }

    Matrix merged = linear_forward(params.merge, stacked); // m_e, E x N_R

    // [x || m_e] -> linear -> masked norm -> relu -> linear, residual add.
    Matrix cat(2 * embed, n_r);
    for (int r = 0; r < embed; ++r) {
        const double* xrow = xr.row(r);
        const double* mrow = merged.row(r);
        double* top = cat.row(r);
        double* bot = cat.row(embed + r);
        for (int c = 0; c < n_r; ++c) {
            top[c] = xrow[c];
            bot[c] = mrow[c];
        }
    }
    Matrix z1 = linear_forward(params.mlp1, cat);
    MaskedNormCache norm_cache;
    Matrix normed = masked_layer_norm(z1, mask_r, params.mlp_norm, cache ? &norm_cache : nullptr);
    Matrix hidden = relu(normed);
    Matrix update = linear_forward(params.mlp2, hidden);
    zero_masked_columns(update, mask_r);

    Matrix out = xr + update;
    zero_masked_columns(out, mask_r);

    if (cache) {
        cache->xr = xr;
        cache->xs = xs;
        cache->mr = mask_r;
        cache->ms = mask_s;
        cache->heads = std::move(head_caches);
        cache->merged_in = std::move(stacked);
        cache->cat = std::move(cat);
        cache->z1 = std::move(z1);
        cache->norm = std::move(norm_cache);
        cache->normed = std::move(normed);
        cache->h = std::move(hidden);
    }
    return out;
}

void attention_block_backward(const Matrix& d_out, const AttentionBlockParams& params,
                              const AttentionBlockCache& cache, AttentionBlockParams& grads,
                              Matrix& d_xr, Matrix& d_xs) {
    const int embed = params.merge.out_dim();
    const int heads = static_cast<int>(params.query.size());
    const int dk = params.query[0].out_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const int n_r = cache.xr.cols();

    Matrix d_o = d_out;
    zero_masked_columns(d_o, cache.mr);

    // Residual path.
    d_xr.add_scaled(d_o, 1.0);

    // MLP path.
    Matrix d_h = linear_backward(params.mlp2, cache.h, d_o, grads.mlp2);
    Matrix d_normed = relu_backward(d_h, cache.normed);
    Matrix d_z1 = masked_layer_norm_backward(d_normed, cache.norm, params.mlp_norm, grads.mlp_norm);
    Matrix d_cat = linear_backward(params.mlp1, cache.cat, d_z1, grads.mlp1);

    Matrix d_merged(embed, n_r);
    for (int r = 0; r < embed; ++r) {
        const double* top = d_cat.row(r);
        const double* bot = d_cat.row(embed + r);
        double* xg = d_xr.row(r);
        double* mg = d_merged.row(r);
        for (int c = 0; c < n_r; ++c) {
            xg[c] += top[c];
            mg[c] = bot[c];
        }
    }

    // Merge projection back onto the stacked per-head messages.
    Matrix d_stacked = linear_backward(params.merge, cache.merged_in, d_merged, grads.merge);

    for (int h = 0; h < heads; ++h) {
        const AttentionHeadCache& hc = cache.heads[h];
        Matrix d_msg(dk, n_r);
        for (int r = 0; r < dk; ++r) {
            const double* src = d_stacked.row(h * dk + r);
            double* dst = d_msg.row(r);
            for (int c = 0; c < n_r; ++c) dst[c] = src[c];
        }
        // msg = V attn^T
        Matrix d_v = matmul(d_msg, hc.attn);    // d_k x N_S
        Matrix d_attn = matmul_tn(d_msg, hc.v); // N_R x N_S
        Matrix d_scores = masked_softmax_backward(d_attn, hc.attn, cache.ms);
        for (std::size_t i = 0; i < d_scores.size(); ++i) d_scores.data()[i] *= scale;

        Matrix d_q = matmul_nt(hc.k, d_scores); // d_k x N_R
        Matrix d_k = matmul(hc.q, d_scores);    // d_k x N_S

        d_xr.add_scaled(linear_backward(params.query[h], cache.xr, d_q, grads.query[h]), 1.0);
        d_xs.add_scaled(linear_backward(params.key[h], cache.xs, d_k, grads.key[h]), 1.0);
        d_xs.add_scaled(linear_backward(params.value[h], cache.xs, d_v, grads.value[h]), 1.0);
    }
}

std::pair<Matrix, Matrix> pgat_forward(const Matrix& xa, const Mask& mask_a, const Matrix& xb,
                                       const Mask& mask_b, const ModelParams& model,
                                       PgatCache* cache) {
    Matrix a = xa;
    Matrix b = xb;
    if (cache) {
        cache->layers.clear();
        cache->layers.resize(model.layers.size());
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const LayerParams& layer = model.layers[l];
        PgatLayerCache* lc = cache ? &cache->layers[l] : nullptr;

        Matrix a1 = attention_block(a, mask_a, a, mask_a, layer.intra, lc ? &lc->intra_a : nullptr);
        Matrix b1 = attention_block(b, mask_b, b, mask_b, layer.intra, lc ? &lc->intra_b : nullptr);
        Matrix a2 =
            attention_block(a1, mask_a, b1, mask_b, layer.inter, lc ? &lc->inter_a : nullptr);
        Matrix b2 =
            attention_block(b1, mask_b, a1, mask_a, layer.inter, lc ? &lc->inter_b : nullptr);
        a = std::move(a2);
        b = std::move(b2);
    }
    return {std::move(a), std::move(b)};
}

void pgat_backward(const Matrix& d_fa, const Matrix& d_fb, const ModelParams& model,
                   const PgatCache& cache, ModelParams& grads, Matrix& d_xa, Matrix& d_xb) {
    Matrix d_a = d_fa;
    Matrix d_b = d_fb;
    for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
        const LayerParams& layer = model.layers[l];
        const PgatLayerCache& lc = cache.layers[l];

        Matrix d_a1(d_a.rows(), d_a.cols());
        Matrix d_b1(d_b.rows(), d_b.cols());
        attention_block_backward(d_a, layer.inter, lc.inter_a, grads.layers[l].inter, d_a1, d_b1);
        attention_block_backward(d_b, layer.inter, lc.inter_b, grads.layers[l].inter, d_b1, d_a1);

        Matrix d_a0(d_a.rows(), d_a.cols());
        Matrix d_b0(d_b.rows(), d_b.cols());
        attention_block_backward(d_a1, layer.intra, lc.intra_a, grads.layers[l].intra, d_a0, d_a0);
        attention_block_backward(d_b1, layer.intra, lc.intra_b, grads.layers[l].intra, d_b0, d_b0);

        d_a = std::move(d_a0);
        d_b = std::move(d_b0);
    }
    d_xa.add_scaled(d_a, 1.0);
    d_xb.add_scaled(d_b, 1.0);
}

std::pair<Matrix, Matrix> pgat_apply(const SubgraphTensor& a, const SubgraphTensor& b,
                                     const ModelParams& model) {
    Matrix xa = encode_and_fuse(a.x, a.pos, a.mask, model);
    Matrix xb = encode_and_fuse(b.x, b.pos, b.mask, model);
    auto [fa, fb] = pgat_forward(xa, a.mask, xb, b.mask, model);
    return {compact_columns(fa, a.mask), compact_columns(fb, b.mask)};
}

} // namespace pgat
