#pragma once

// Prompt text encoder (embedding lookup plus one unmasked self-attention
// mixing pass) and the direction-vector arithmetic that moves a source style
// embedding toward a target one. Pure functions over immutable data.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "styleshift/numerics.hpp"

namespace styleshift {

/// Encoded style prompt: one d-dimensional vector per token plus the set of
/// attribute token positions (0-based, sorted, each < length).
struct PromptEmbedding {
    std::vector<std::vector<float>> vectors;
    std::vector<std::size_t> attr_positions;

    std::size_t length() const { return vectors.size(); }
    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

/// Per-attribute-position difference vectors: half the target-minus-source
/// displacement at each attribute token.
struct DirectionVector {
    std::vector<std::size_t> positions;
    std::vector<std::vector<float>> deltas;

    std::size_t dim() const { return deltas.empty() ? 0 : deltas.front().size(); }
};

struct EncoderWeights {
    Matrix token_embedding;  // vocab x d
    Matrix wq, wk, wv, wo;   // d x d each
};

namespace detail {

inline void check_positions(const std::vector<std::size_t>& positions, std::size_t length,
                            const char* who) {
    for (std::size_t p : positions) {
        if (p >= length) throw std::invalid_argument(std::string(who) + ": attribute position out of range");
    }
}

inline void check_aligned(const PromptEmbedding& a, const PromptEmbedding& b, const char* who) {
    if (a.length() != b.length() || a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(who) + ": shape mismatch");
    }
}

}  // namespace detail

/// Lookup + one full (unmasked) self-attention pass with a residual add.
/// Contextual: the attention mixes every position into every output.
inline PromptEmbedding encode_prompt(std::span<const int> token_ids,
                                     std::vector<std::size_t> attr_positions,
                                     const EncoderWeights& w) {
    if (token_ids.empty()) throw std::invalid_argument("encode_prompt: empty prompt");
    const std::size_t l = token_ids.size();
    const std::size_t d = w.token_embedding.cols();
    detail::check_positions(attr_positions, l, "encode_prompt");

    std::vector<std::vector<float>> x(l);
    for (std::size_t i = 0; i < l; ++i) {
        const int id = token_ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= w.token_embedding.rows()) {
            throw std::invalid_argument("encode_prompt: token id out of vocabulary");
        }
        const auto row = w.token_embedding.row(static_cast<std::size_t>(id));
        x[i].assign(row.begin(), row.end());
    }

    std::vector<std::vector<float>> q(l), k(l), v(l);
    for (std::size_t i = 0; i < l; ++i) {
        q[i] = matvec(w.wq, x[i]);
        k[i] = matvec(w.wk, x[i]);
        v[i] = matvec(w.wv, x[i]);
    }

    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const AdditiveMaskRow all_allowed(l, MaskEntry::allowed);
    PromptEmbedding out;
    out.attr_positions = std::move(attr_positions);
    std::sort(out.attr_positions.begin(), out.attr_positions.end());
    out.vectors.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        std::vector<float> scores(l);
        for (std::size_t j = 0; j < l; ++j) scores[j] = dot(q[i], k[j]) * scale;
        const auto weights = masked_softmax(scores, all_allowed);
        std::vector<float> ctx(d, 0.0f);
        for (std::size_t j = 0; j < l; ++j) {
            for (std::size_t c = 0; c < d; ++c) ctx[c] += weights[j] * v[j][c];
        }
        out.vectors[i] = x[i];
        add_inplace(out.vectors[i], matvec(w.wo, ctx));
    }
    return out;
}

/// d_i = (e_i^target - e_i^source) / 2 at each attribute position.
inline DirectionVector compute_direction(const PromptEmbedding& src, const PromptEmbedding& tgt,
                                         const std::vector<std::size_t>& attr_positions) {
    detail::check_aligned(src, tgt, "compute_direction");
    detail::check_positions(attr_positions, src.length(), "compute_direction");
    DirectionVector dir;
    dir.positions = attr_positions;
    std::sort(dir.positions.begin(), dir.positions.end());
    dir.deltas.reserve(dir.positions.size());
    for (std::size_t p : dir.positions) {
        std::vector<float> delta(src.dim());
        for (std::size_t c = 0; c < delta.size(); ++c) {
            delta[c] = 0.5f * (tgt.vectors[p][c] - src.vectors[p][c]);
        }
        dir.deltas.push_back(std::move(delta));
    }
    return dir;
}

/// e'_i = e_i + alpha * d_i at attribute positions, e_i elsewhere (bitwise).
/// alpha is unrestricted; values outside [0, 2] extrapolate.
inline PromptEmbedding interpolate(const PromptEmbedding& src, const DirectionVector& dir,
                                   float alpha) {
    if (!dir.deltas.empty() && dir.dim() != src.dim()) {
        throw std::invalid_argument("interpolate: dimension mismatch");
    }
    for (std::size_t p : dir.positions) {
        if (std::find(src.attr_positions.begin(), src.attr_positions.end(), p) ==
            src.attr_positions.end()) {
            throw std::invalid_argument("interpolate: direction position not an attribute position");
        }
    }
    PromptEmbedding out = src;
    if (alpha == 0.0f) return out;  // reproduces the source exactly
    for (std::size_t idx = 0; idx < dir.positions.size(); ++idx) {
        const std::size_t p = dir.positions[idx];
        for (std::size_t c = 0; c < src.dim(); ++c) {
            out.vectors[p][c] = src.vectors[p][c] + alpha * dir.deltas[idx][c];
        }
    }
    return out;
}

/// Full-vector variant: attribute positions move by alpha * d_i, every other
/// position moves by beta * half the target-minus-source displacement.
inline PromptEmbedding interpolate_full(const PromptEmbedding& src, const PromptEmbedding& tgt,
                                        float alpha, float beta,
                                        const std::vector<std::size_t>& attr_positions) {
    detail::check_aligned(src, tgt, "interpolate_full");
    detail::check_positions(attr_positions, src.length(), "interpolate_full");
    PromptEmbedding out = src;
    for (std::size_t p = 0; p < src.length(); ++p) {
        const bool is_attr = std::find(attr_positions.begin(), attr_positions.end(), p) !=
                             attr_positions.end();
        const float strength = is_attr ? alpha : beta;
        if (strength == 0.0f) continue;
        for (std::size_t c = 0; c < src.dim(); ++c) {
            const float half_delta = 0.5f * (tgt.vectors[p][c] - src.vectors[p][c]);
            out.vectors[p][c] = src.vectors[p][c] + strength * half_delta;
        }
    }
    return out;
}

}  // namespace styleshift
