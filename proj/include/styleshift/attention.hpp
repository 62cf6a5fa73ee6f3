#pragma once

// KV-cache storage, the sliding-window mask predicate, the prefix swap, and
// incremental scaled-dot-product attention over cached rows.
//
// Positions are 1-based throughout this module. A KVCache is a single-owner
// mutable object; mask_allows and attend over a quiescent cache are safe to
// call concurrently.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "styleshift/numerics.hpp"

namespace styleshift {

/// Mask over self-attention key positions. full_causal allows every j <= i.
/// sliding additionally requires j <= initial or i - window <= j: the first
/// n positions stay visible forever, the rest only inside the recent window.
struct MaskSpec {
    enum class Kind { full_causal, sliding };

    Kind kind = Kind::full_causal;
    std::size_t initial = 0;  // n = n_text + k
    std::size_t window = 1;   // w >= 1

    static MaskSpec full_causal() { return MaskSpec{}; }

    static MaskSpec sliding(std::size_t initial, std::size_t window) {
        if (window < 1) throw std::invalid_argument("MaskSpec: window must be >= 1");
        MaskSpec spec;
        spec.kind = Kind::sliding;
        spec.initial = initial;
        spec.window = window;
        return spec;
    }
};

/// True iff the query at position i may attend to the key at position j.
/// Causality (j <= i) is always enforced; the predicate answers false for
/// j > i rather than requiring it.
inline bool mask_allows(std::size_t i, std::size_t j, const MaskSpec& spec) {
    if (j == 0 || j > i) return false;
    if (spec.kind == MaskSpec::Kind::full_causal) return true;
    if (j <= spec.initial) return true;
    return i <= spec.window || j >= i - spec.window;
}

/// Size of the allowed set {j : mask_allows(i, j)}. Non-empty for i >= 1
/// since the self position is always allowed.
inline std::size_t allowed_count(std::size_t i, const MaskSpec& spec) {
    std::size_t count = 0;
    for (std::size_t j = 1; j <= i; ++j) {
        if (mask_allows(i, j, spec)) ++count;
    }
    return count;
}

/// Per-layer append-only key/value row stores with a swappable prefix.
/// Rows are append-only except via swap_prefix; growth is unbounded (the
/// initial region j <= n must remain addressable forever, so nothing is
/// evicted even when the sliding mask blocks it).
class KVCache {
public:
    KVCache() = default;
    KVCache(std::size_t layer_count, std::size_t key_dim, std::size_t value_dim)
        : key_dim_(key_dim), value_dim_(value_dim), layers_(layer_count) {}

    std::size_t layer_count() const { return layers_.size(); }
    std::size_t key_dim() const { return key_dim_; }
    std::size_t value_dim() const { return value_dim_; }

    /// Common length across layers (layers may differ transiently while a
    /// decoder step walks them; they agree again between steps).
    std::size_t length() const { return layers_.empty() ? 0 : layers_.front().length; }

    std::size_t layer_length(std::size_t layer) const {
        check_layer(layer);
        return layers_[layer].length;
    }

    void append(std::size_t layer, std::span<const float> k_row, std::span<const float> v_row) {
        check_layer(layer);
        if (k_row.size() != key_dim_ || v_row.size() != value_dim_) {
            throw std::invalid_argument("KVCache::append: row dimension mismatch");
        }
        auto& store = layers_[layer];
        store.keys.insert(store.keys.end(), k_row.begin(), k_row.end());
        store.values.insert(store.values.end(), v_row.begin(), v_row.end());
        ++store.length;
    }

    /// Key row at 1-based position pos.
    std::span<const float> key_row(std::size_t layer, std::size_t pos) const {
        check_row(layer, pos);
        return {layers_[layer].keys.data() + (pos - 1) * key_dim_, key_dim_};
    }

    std::span<const float> value_row(std::size_t layer, std::size_t pos) const {
        check_row(layer, pos);
        return {layers_[layer].values.data() + (pos - 1) * value_dim_, value_dim_};
    }

    friend void swap_prefix(KVCache& dst, const KVCache& src, std::size_t n);

private:
    struct LayerStore {
        std::vector<float> keys;    // length x key_dim, row-major
        std::vector<float> values;  // length x value_dim, row-major
        std::size_t length = 0;
    };

    void check_layer(std::size_t layer) const {
        if (layer >= layers_.size()) throw std::invalid_argument("KVCache: layer out of range");
    }
    void check_row(std::size_t layer, std::size_t pos) const {
        check_layer(layer);
        if (pos == 0 || pos > layers_[layer].length) {
            throw std::invalid_argument("KVCache: position out of range");
        }
    }

    std::size_t key_dim_ = 0;
    std::size_t value_dim_ = 0;
    std::vector<LayerStore> layers_;
};

/// Overwrite dst rows 1..n with src rows 1..n, bitwise, in every layer.
/// Rows beyond n and dst's length are untouched.
inline void swap_prefix(KVCache& dst, const KVCache& src, std::size_t n) {
    if (dst.layer_count() != src.layer_count() || dst.key_dim() != src.key_dim() ||
        dst.value_dim() != src.value_dim()) {
        throw std::invalid_argument("swap_prefix: cache shape mismatch");
    }
    if (n == 0) return;
    for (std::size_t l = 0; l < dst.layer_count(); ++l) {
        if (dst.layers_[l].length < n || src.layers_[l].length < n) {
            throw std::invalid_argument("swap_prefix: prefix exceeds cache length");
        }
    }
    for (std::size_t l = 0; l < dst.layer_count(); ++l) {
        auto& d = dst.layers_[l];
        const auto& s = src.layers_[l];
        std::copy(s.keys.begin(), s.keys.begin() + static_cast<std::ptrdiff_t>(n * dst.key_dim_),
                  d.keys.begin());
        std::copy(s.values.begin(),
                  s.values.begin() + static_cast<std::ptrdiff_t>(n * dst.value_dim_),
                  d.values.begin());
    }
}

/// Masked scaled-dot-product attention of query q at position i over the
/// first i cached rows of one layer. The self position always contributes.
inline std::vector<float> attend(std::span<const float> q, const KVCache& cache,
                                 std::size_t layer, std::size_t i, const MaskSpec& spec) {
    if (i == 0 || i > cache.layer_length(layer)) {
        throw std::invalid_argument("attend: position outside cache");
    }
    if (q.size() != cache.key_dim()) {
        throw std::invalid_argument("attend: query dimension mismatch");
    }
    const float scale = 1.0f / std::sqrt(static_cast<float>(cache.key_dim()));
    std::vector<float> scores(i);
    AdditiveMaskRow mask(i, MaskEntry::blocked);
    for (std::size_t j = 1; j <= i; ++j) {
        scores[j - 1] = dot(q, cache.key_row(layer, j)) * scale;
        if (mask_allows(i, j, spec)) mask[j - 1] = MaskEntry::allowed;
    }
    const auto weights = masked_softmax(scores, mask);
    std::vector<float> context(cache.value_dim(), 0.0f);
    for (std::size_t j = 1; j <= i; ++j) {
        const float wj = weights[j - 1];
        if (wj == 0.0f) continue;
        const auto v = cache.value_row(layer, j);
        for (std::size_t c = 0; c < context.size(); ++c) context[c] += wj * v[c];
    }
    return context;
}

}  // namespace styleshift
