#pragma once

// Layered autoregressive decoder: per layer one self-attention head over the
// KV cache, one cross-attention head over the style memory, and а
// feed-forward block, joined by plain residual adds (no normalization).
// Absolute positional encodings keep row p meaning position p across prefix
// swaps. DecoderWeights are immutable and shareable across threads;
// DecoderState is single-owner mutable.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "styleshift/attention.hpp"
#include "styleshift/embedding.hpp"
#include "styleshift/numerics.hpp"

namespace styleshift {

/// Token id fed at the first generated step (there is no previous token yet).
inline constexpr int kStartTokenId = 0;

struct LayerWeights {
    Matrix self_wq, self_wk, self_wv, self_wo;      // d x d
    Matrix cross_wq, cross_wk, cross_wv, cross_wo;  // d x d
    Matrix ffn_w1;               // ffn_dim x d
    std::vector<float> ffn_b1;   // ffn_dim
    Matrix ffn_w2;               // d x ffn_dim
    std::vector<float> ffn_b2;   // d
};

struct DecoderDims {
    std::size_t layers = 2;
    std::size_t dim = 16;
    std::size_t ffn_dim = 16;
    std::size_t vocab = 64;
    std::size_t max_len = 512;
};

struct DecoderWeights {
    DecoderDims dims;
    Matrix token_embedding;  // vocab x d
    Matrix positional;       // max_len x d; row p-1 encodes 1-based position p
    Matrix head;             // d x vocab
    std::vector<LayerWeights> layers;

    void validate() const {
        if (layers.size() != dims.layers) throw std::invalid_argument("DecoderWeights: layer count mismatch");
        if (token_embedding.rows() != dims.vocab || token_embedding.cols() != dims.dim)
            throw std::invalid_argument("DecoderWeights: token embedding shape");
        if (positional.rows() != dims.max_len || positional.cols() != dims.dim)
            throw std::invalid_argument("DecoderWeights: positional table shape");
        if (head.rows() != dims.dim || head.cols() != dims.vocab)
            throw std::invalid_argument("DecoderWeights: head shape");
        for (const auto& lw : layers) {
            for (const Matrix* m : {&lw.self_wq, &lw.self_wk, &lw.self_wv, &lw.self_wo,
                                    &lw.cross_wq, &lw.cross_wk, &lw.cross_wv, &lw.cross_wo}) {
                if (m->rows() != dims.dim || m->cols() != dims.dim)
                    throw std::invalid_argument("DecoderWeights: projection shape");
            }
            if (lw.ffn_w1.rows() != dims.ffn_dim || lw.ffn_w1.cols() != dims.dim ||
                lw.ffn_w2.rows() != dims.dim || lw.ffn_w2.cols() != dims.ffn_dim ||
                lw.ffn_b1.size() != dims.ffn_dim || lw.ffn_b2.size() != dims.dim)
                throw std::invalid_argument("DecoderWeights: ffn shape");
        }
    }
};

/// Standard absolute sinusoidal table; row p-1 encodes 1-based position p.
inline Matrix sinusoidal_positional_table(std::size_t max_len, std::size_t dim) {
    Matrix table(max_len, dim);
    for (std::size_t p = 0; p < max_len; ++p) {
        for (std::size_t c = 0; c + 1 < dim; c += 2) {
            const double angle = static_cast<double>(p + 1) /
                                 std::pow(10000.0, static_cast<double>(c) / static_cast<double>(dim));
            table.at(p, c) = static_cast<float>(std::sin(angle));
            table.at(p, c + 1) = static_cast<float>(std::cos(angle));
        }
    }
    return table;
}

/// Greedy decoding is the default; temperature sampling derives all
/// randomness from one explicit 64-bit seed.
struct Sampler {
    enum class Kind { greedy, temperature };

    Kind kind = Kind::greedy;
    float temperature = 1.0f;
    std::uint64_t seed = 0;

    static Sampler greedy() { return Sampler{}; }
    static Sampler with_temperature(float t, std::uint64_t seed) {
        if (t <= 0.0f) throw std::invalid_argument("Sampler: temperature must be positive");
        return Sampler{Kind::temperature, t, seed};
    }
};

struct TraceEntry {
    int token = -1;
    std::vector<std::vector<float>> cross_weights;  // [layer][style position]
    std::size_t self_allowed = 0;
};

struct GenerationTrace {
    std::vector<TraceEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

struct DecoderState {
    const DecoderWeights* weights = nullptr;
    KVCache cache;
    PromptEmbedding style;
    std::size_t position = 0;  // == cache length between steps
    std::size_t n_text = 0;
    int next_input = kStartTokenId;
};

namespace detail {

inline std::vector<float> embed_at(const DecoderWeights& w, int token_id, std::size_t pos) {
    if (token_id < 0 || static_cast<std::size_t>(token_id) >= w.dims.vocab) {
        throw std::invalid_argument("decoder: token id out of vocabulary");
    }
    if (pos == 0 || pos > w.dims.max_len) {
        throw std::invalid_argument("decoder: position exceeds max_len");
    }
    const auto emb = w.token_embedding.row(static_cast<std::size_t>(token_id));
    const auto pe = w.positional.row(pos - 1);
    std::vector<float> h(emb.begin(), emb.end());
    add_inplace(h, pe);
    return h;
}

/// Cross-attention of one hidden state over the style memory. Keys and
/// values are recomputed from the current style memory each call, so a
/// style replacement takes effect immediately.
inline std::vector<float> cross_attend(const LayerWeights& lw, std::span<const float> h,
                                       const PromptEmbedding& style,
                                       std::vector<float>* weights_out) {
    const std::size_t d = lw.cross_wq.rows();
    const std::size_t ls = style.length();
    const auto q = matvec(lw.cross_wq, h);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    std::vector<float> scores(ls);
    for (std::size_t s = 0; s < ls; ++s) {
        scores[s] = dot(q, matvec(lw.cross_wk, style.vectors[s])) * scale;
    }
    const AdditiveMaskRow all_allowed(ls, MaskEntry::allowed);
    auto weights = masked_softmax(scores, all_allowed);
    std::vector<float> ctx(d, 0.0f);
    for (std::size_t s = 0; s < ls; ++s) {
        const auto v = matvec(lw.cross_wv, style.vectors[s]);
        for (std::size_t c = 0; c < d; ++c) ctx[c] += weights[s] * v[c];
    }
    if (weights_out) *weights_out = std::move(weights);
    return matvec(lw.cross_wo, ctx);
}

inline std::vector<float> feed_forward(const LayerWeights& lw, std::span<const float> h) {
    auto hidden = matvec(lw.ffn_w1, h);
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        hidden[i] += lw.ffn_b1[i];
        if (hidden[i] < 0.0f) hidden[i] = 0.0f;
    }
    auto out = matvec(lw.ffn_w2, hidden);
    add_inplace(out, lw.ffn_b2);
    return out;
}

/// One full forward pass at 1-based position pos: appends this position's
/// K/V rows to every layer and returns the final hidden state.
inline std::vector<float> forward_position(DecoderState& st, int token_id, std::size_t pos,
                                           const MaskSpec& spec, TraceEntry* entry) {
    const DecoderWeights& w = *st.weights;
    std::vector<float> h = embed_at(w, token_id, pos);
    for (std::size_t l = 0; l < w.dims.layers; ++l) {
        const LayerWeights& lw = w.layers[l];
        st.cache.append(l, matvec(lw.self_wk, h), matvec(lw.self_wv, h));
        const auto q = matvec(lw.self_wq, h);
        const auto ctx = attend(q, st.cache, l, pos, spec);
        add_inplace(h, matvec(lw.self_wo, ctx));

        std::vector<float> cross_weights;
        const auto cross = cross_attend(lw, h, st.style, entry ? &cross_weights : nullptr);
        add_inplace(h, cross);
        if (entry) entry->cross_weights.push_back(std::move(cross_weights));

        add_inplace(h, feed_forward(lw, h));
    }
    return h;
}

inline std::vector<float> head_logits(const DecoderWeights& w, std::span<const float> h) {
    std::vector<float> logits(w.dims.vocab, 0.0f);
    for (std::size_t v = 0; v < w.dims.vocab; ++v) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < w.dims.dim; ++c) acc += h[c] * w.head.at(c, v);
        logits[v] = acc;
    }
    return logits;
}

}  // namespace detail

/// Process the text prompt into the first n_text cache positions. No audio
/// token is emitted; text positions see each other fully (for any sliding
/// spec with n >= n_text the masks coincide over the text region).
inline DecoderState prefill(const DecoderWeights& weights, std::span<const int> text_ids,
                            PromptEmbedding style) {
    if (text_ids.empty()) throw std::invalid_argument("prefill: empty text prompt");
    weights.validate();
    DecoderState st;
    st.weights = &weights;
    st.cache = KVCache(weights.dims.layers, weights.dims.dim, weights.dims.dim);
    st.style = std::move(style);
    st.n_text = text_ids.size();
    const MaskSpec causal = MaskSpec::full_causal();
    for (std::size_t i = 0; i < text_ids.size(); ++i) {
        detail::forward_position(st, text_ids[i], i + 1, causal, nullptr);
        st.position = i + 1;
    }
    st.next_input = kStartTokenId;
    return st;
}

struct StepResult {
    std::vector<float> logits;
    TraceEntry entry;  // token is filled in by the caller once sampled
};

/// One incremental decode step: appends one position to every layer's cache
/// and returns the next-token logits plus the trace entry for this step.
inline StepResult step(DecoderState& state, const MaskSpec& spec) {
    if (state.position == 0) throw std::invalid_argument("step: state not prefilled");
    const std::size_t pos = state.position + 1;
    StepResult result;
    result.entry.self_allowed = allowed_count(pos, spec);
    const auto h = detail::forward_position(state, state.next_input, pos, spec, &result.entry);
    state.position = pos;
    result.logits = detail::head_logits(*state.weights, h);
    return result;
}

/// Swap the style memory used by cross-attention; caches are untouched.
inline void replace_style(DecoderState& state, PromptEmbedding new_style) {
    if (new_style.length() != state.style.length() || new_style.dim() != state.style.dim()) {
        throw std::invalid_argument("replace_style: shape mismatch");
    }
    state.style = std::move(new_style);
}

inline int sample_token(std::span<const float> logits, const Sampler& sampler,
                        std::mt19937_64& rng) {
    if (sampler.kind == Sampler::Kind::greedy) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < logits.size(); ++v) {
            if (logits[v] > logits[best]) best = v;
        }
        return static_cast<int>(best);
    }
    std::vector<float> scaled(logits.size());
    for (std::size_t v = 0; v < logits.size(); ++v) scaled[v] = logits[v] / sampler.temperature;
    const AdditiveMaskRow all_allowed(logits.size(), MaskEntry::allowed);
    const auto probs = masked_softmax(scaled, all_allowed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double r = unit(rng);
    for (std::size_t v = 0; v < probs.size(); ++v) {
        r -= probs[v];
        if (r <= 0.0) return static_cast<int>(v);
    }
    return static_cast<int>(probs.size() - 1);
}

struct GenerateResult {
    std::vector<int> tokens;
    GenerationTrace trace;
};

/// Prefill followed by exactly `steps` decode steps. A pure function of
/// (weights, text_ids, style, steps, spec, sampler seed).
inline GenerateResult generate(const DecoderWeights& weights, std::span<const int> text_ids,
                               PromptEmbedding style, std::size_t steps, const MaskSpec& spec,
                               const Sampler& sampler = Sampler::greedy()) {
    if (steps < 1) throw std::invalid_argument("generate: steps must be >= 1");
    DecoderState st = prefill(weights, text_ids, std::move(style));
    std::mt19937_64 rng(sampler.seed);
    GenerateResult result;
    result.tokens.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        auto r = step(st, spec);
        const int token = sample_token(r.logits, sampler, rng);
        st.next_input = token;
        r.entry.token = token;
        result.tokens.push_back(token);
        result.trace.entries.push_back(std::move(r.entry));
    }
    return result;
}

}  // namespace styleshift
