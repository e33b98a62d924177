#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "acmca/error.hpp"
#include "acmca/tensor.hpp"

namespace acmca {

using cdouble = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Direct O(N^2) evaluation of X[k] = sum_n exp(-i 2 pi n k / N) x[n].
inline std::vector<cdouble> dft_naive(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    if (n == 0) throw UsageError("dft of empty sequence");
    std::vector<cdouble> out(n);
    const double base = -2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        cdouble acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = base * static_cast<double>(j) * static_cast<double>(k);
            acc += x[j] * cdouble{std::cos(ang), std::sin(ang)};
        }
        out[k] = acc;
    }
    return out;
}

namespace detail {

// In-place iterative radix-2 Cooley-Tukey; `invert` flips the twiddle sign
// (no 1/N scaling here).
inline void fft_radix2(std::vector<cdouble>& a, bool invert) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (invert ? 1.0 : -1.0);
        const cdouble wlen{std::cos(ang), std::sin(ang)};
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w{1.0, 0.0};
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cdouble u = a[i + j];
                const cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace detail

// Forward DFT; radix-2 fast path for power-of-two lengths, direct evaluation
// otherwise (token counts like 10 are not powers of two).
inline std::vector<cdouble> dft1d(const std::vector<cdouble>& x) {
    if (x.empty()) throw UsageError("dft of empty sequence");
    if (is_power_of_two(x.size())) {
        std::vector<cdouble> a = x;
        detail::fft_radix2(a, false);
        return a;
    }
    return dft_naive(x);
}

// Inverse DFT with 1/N scaling; same fast-path dispatch.
inline std::vector<cdouble> idft1d(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    if (n == 0) throw UsageError("idft of empty sequence");
    std::vector<cdouble> a;
    if (is_power_of_two(n)) {
        a = x;
        detail::fft_radix2(a, true);
    } else {
        a.resize(n);
        const double base = 2.0 * std::numbers::pi / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            cdouble acc{0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j) {
                const double ang = base * static_cast<double>(j) * static_cast<double>(k);
                acc += x[j] * cdouble{std::cos(ang), std::sin(ang)};
            }
            a[k] = acc;
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
    return a;
}

namespace detail {

// Re(F_rows . X . F_cols) for a real rows x cols matrix: DFT down each
// column (token axis), DFT across each row (feature axis), keep the real
// part. Used by both the forward pass and (being self-adjoint, since DFT
// matrices are symmetric) the backward pass of the Fourier mixing op.
inline void fourier_mix_matrix(const double* x, double* out, std::size_t rows, std::size_t cols) {
    std::vector<std::vector<cdouble>> stage(rows, std::vector<cdouble>(cols));
    std::vector<cdouble> buf;
    // feature axis
    for (std::size_t r = 0; r < rows; ++r) {
        buf.assign(cols, cdouble{});
        for (std::size_t c = 0; c < cols; ++c) buf[c] = cdouble{x[r * cols + c], 0.0};
        stage[r] = dft1d(buf);
    }
    // token axis
    for (std::size_t c = 0; c < cols; ++c) {
        buf.assign(rows, cdouble{});
        for (std::size_t r = 0; r < rows; ++r) buf[r] = stage[r][c];
        buf = dft1d(buf);
        for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = buf[r].real();
    }
}

}  // namespace detail

// FNet-style token mixing on a (batch, tokens, dim) tensor: per sample, the
// real part of the 2D DFT taken along the token axis and the feature axis.
// Linear in x, so the transform is its own backward map.
inline Tensor fourier_mix(Graph& g, const Tensor& x) {
    const Shape& s = x.shape();
    if (s.size() != 3)
        throw ShapeError("fourier_mix wants (batch, tokens, dim), got " + shape_str(s));
    const std::size_t b = s[0], t = s[1], d = s[2];
    Tensor out = Tensor::zeros(s, x.requires_grad());
    {
        const auto& xv = x.values();
        auto& ov = out.values_mut();
        for (std::size_t i = 0; i < b; ++i)
            detail::fourier_mix_matrix(xv.data() + i * t * d, ov.data() + i * t * d, t, d);
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi, b, t, d] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            std::vector<double> tmp(t * d);
            for (std::size_t i = 0; i < b; ++i) {
                detail::fourier_mix_matrix(oi->grad.data() + i * t * d, tmp.data(), t, d);
                for (std::size_t j = 0; j < t * d; ++j) xi->grad[i * t * d + j] += tmp[j];
            }
        });
    }
    return out;
}

}  // namespace acmca
