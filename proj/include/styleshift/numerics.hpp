#pragma once

// Minimal deterministic dense float32 linear algebra used by every other
// module. Row-major storage, fixed accumulation order, no SIMD/blocking:
// correctness over speed at desk scale.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace styleshift {

/// Dense row-major float32 matrix. All entries are required to be finite.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<float> data) {
        if (data.size() != rows * cols) {
            throw std::invalid_argument("Matrix: data length does not match rows*cols");
        }
        Matrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(data);
        m.require_finite("Matrix::from_rows");
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0f;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const float> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    void require_finite(const char* who) const {
        for (float x : data_) {
            if (!std::isfinite(x)) {
                throw std::invalid_argument(std::string(who) + ": non-finite entry");
            }
        }
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

enum class MaskEntry : unsigned char { allowed, blocked };

/// One additive mask row: allowed means +0 before the softmax exponent,
/// blocked means the -inf sentinel (realized as "skip and emit exact 0").
using AdditiveMaskRow = std::vector<MaskEntry>;

inline void require_finite(std::span<const float> v, const char* who) {
    for (float x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(who) + ": non-finite entry");
        }
    }
}

/// Standard product with deterministic row-major, left-to-right accumulation.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: dimension mismatch");
    }
    a.require_finite("matmul lhs");
    b.require_finite("matmul rhs");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const float aik = a.at(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

/// W (out x in) applied to a column vector x (in).
inline std::vector<float> matvec(const Matrix& w, std::span<const float> x) {
    if (w.cols() != x.size()) {
        throw std::invalid_argument("matvec: dimension mismatch");
    }
    std::vector<float> out(w.rows(), 0.0f);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        float acc = 0.0f;
        const auto row = w.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out.at(c, r) = m.at(r, c);
    }
    return out;
}

inline float dot(std::span<const float> a, std::span<const float> b) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline void add_inplace(std::vector<float>& dst, std::span<const float> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

/// Softmax over the allowed entries of one score row. Blocked positions come
/// out as exact 0; allowed positions are positive and sum to 1 (within fp).
/// Throws if every entry is blocked (a malformed mask: the self position is
/// always allowed upstream).
inline std::vector<float> masked_softmax(std::span<const float> scores,
                                         const AdditiveMaskRow& mask) {
    if (scores.size() != mask.size()) {
        throw std::invalid_argument("masked_softmax: length mismatch");
    }
    require_finite(scores, "masked_softmax");
    float max_score = 0.0f;
    bool any_allowed = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i] != MaskEntry::allowed) continue;
        if (!any_allowed || scores[i] > max_score) max_score = scores[i];
        any_allowed = true;
    }
    if (!any_allowed) {
        throw std::invalid_argument("masked_softmax: all entries blocked");
    }
    std::vector<float> out(scores.size(), 0.0f);
    float denom = 0.0f;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i] != MaskEntry::allowed) continue;
        const float e = std::exp(scores[i] - max_score);
        out[i] = e;
        denom += e;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i] == MaskEntry::allowed) out[i] /= denom;
    }
    return out;
}

}  // namespace styleshift
