#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "acmca/error.hpp"

namespace acmca {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

struct TensorImpl {
    Shape shape;
    std::vector<double> data;   // row-major
    bool requires_grad = false;
    std::vector<double> grad;   // empty until first accumulation

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantics handle to a dense float64 array. The buffer is treated as
// immutable once the tensor has entered a Graph; values_mut() exists for
// initialization and for finite-difference probes in tests.
class Tensor {
  public:
    Tensor() : impl_(std::make_shared<TensorImpl>()) {}

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : impl_(std::make_shared<TensorImpl>()) {
        if (numel(shape) != values.size())
            throw ShapeError("tensor shape " + shape_str(shape) + " wants " +
                             std::to_string(numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        impl_->shape = std::move(shape);
        impl_->data = std::move(values);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> v(numel(shape), 0.0);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        std::vector<double> v(numel(shape), value);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
    }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
    std::size_t size() const { return impl_->data.size(); }
    bool requires_grad() const { return impl_->requires_grad; }

    const std::vector<double>& values() const { return impl_->data; }
    std::vector<double>& values_mut() { return impl_->data; }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const {
        if (impl_->grad.empty())
            throw UsageError("tensor has no gradient; run backward first");
        return impl_->grad;
    }
    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    double item() const {
        if (size() != 1)
            throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
        return impl_->data[0];
    }

    double at(const std::vector<std::size_t>& idx) const {
        const Shape& s = impl_->shape;
        if (idx.size() != s.size())
            throw UsageError("index rank mismatch for " + shape_str(s));
        std::size_t off = 0;
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (idx[d] >= s[d]) throw UsageError("index out of range");
            off = off * s[d] + idx[d];
        }
        return impl_->data[off];
    }

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

  private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
};

// Tape of executed differentiable operations. backward() replays the tape in
// exact reverse execution order. A Graph and its backward pass belong to a
// single thread; tensors may be shared across graphs.
class Graph {
  public:
    using BackFn = std::function<void()>;

    void record(BackFn fn) { tape_.push_back(std::move(fn)); }
    std::size_t size() const { return tape_.size(); }

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable
    // requires_grad tensor. Accumulation is additive; callers zero
    // gradients between steps. A detached scalar (requires_grad false)
    // is a no-op.
    void backward(const Tensor& loss) {
        if (loss.size() != 1)
            throw UsageError("backward requires a scalar loss, got " +
                             shape_str(loss.shape()));
        if (!loss.requires_grad()) return;
        auto li = loss.impl();
        li->ensure_grad();
        li->grad[0] += 1.0;
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

  private:
    std::vector<BackFn> tape_;
};

// ---------------------------------------------------------------------------
// broadcasting helpers (NumPy alignment rules, right-aligned)

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Element strides of `s` aligned into broadcast result `out`; 0 marks a
// broadcast dimension.
inline std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
    std::vector<std::size_t> st(out.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t si = s.size() - 1 - i;
        const std::size_t oi = out.size() - 1 - i;
        st[oi] = (s[si] == 1 && out[oi] != 1) ? 0 : stride;
        stride *= s[si];
    }
    return st;
}

// Visits every output position of `out`, handing the functor the linear
// offsets (io, ia, ib) under the two aligned stride vectors.
template <class Fn>
inline void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                               const std::vector<std::size_t>& sb, Fn&& fn) {
    const std::size_t n = numel(out);
    if (n == 0) return;
    std::vector<std::size_t> idx(out.size(), 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t io = 0; io < n; ++io) {
        fn(io, ia, ib);
        for (std::size_t d = out.size(); d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out[d]) break;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

namespace detail {

// outer/axis/inner decomposition for per-slice ops along one axis
struct AxisSplit {
    std::size_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
    if (axis >= s.size())
        throw UsageError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisSplit sp{1, s[axis], 1};
    for (std::size_t d = 0; d < axis; ++d) sp.outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) sp.inner *= s[d];
    return sp;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// differentiable operations

// Matrix product over the trailing two dimensions; leading batch dimensions
// broadcast. Backward: dA += dOut.B^T, dB += A^T.dOut (broadcast dims reduce
// by accumulation).
inline Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2)
        throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(sa) +
                         " and " + shape_str(sb));
    const std::size_t n = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const std::size_t k2 = sb[sb.size() - 2], m = sb[sb.size() - 1];
    if (k != k2)
        throw ShapeError("matmul inner dimensions differ: " + shape_str(sa) + " vs " +
                         shape_str(sb));
    const Shape ba(sa.begin(), sa.end() - 2);
    const Shape bb(sb.begin(), sb.end() - 2);
    const Shape bout = broadcast_shape(ba, bb);
    Shape so = bout;
    so.push_back(n);
    so.push_back(m);

    const auto sta = broadcast_strides(ba, bout);
    const auto stb = broadcast_strides(bb, bout);
    const std::size_t amat = n * k, bmat = k * m, omat = n * m;

    Tensor out = Tensor::zeros(so, a.requires_grad() || b.requires_grad());
    {
        const auto& av = a.values();
        const auto& bv = b.values();
        auto& ov = out.values_mut();
        for_each_broadcast(bout, sta, stb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
            const double* A = av.data() + ia * amat;
            const double* B = bv.data() + ib * bmat;
            double* O = ov.data() + io * omat;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    const double aval = A[i * k + t];
                    if (aval == 0.0) continue;
                    const double* Brow = B + t * m;
                    double* Orow = O + i * m;
                    for (std::size_t j = 0; j < m; ++j) Orow[j] += aval * Brow[j];
                }
        });
    }

    if (out.requires_grad()) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        g.record([ai, bi, oi, bout, sta, stb, n, k, m, amat, bmat, omat] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) ai->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            for_each_broadcast(bout, sta, stb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
                const double* G = oi->grad.data() + io * omat;
                if (ai->requires_grad) {
                    const double* B = bi->data.data() + ib * bmat;
                    double* dA = ai->grad.data() + ia * amat;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < m; ++j) {
                            const double gv = G[i * m + j];
                            if (gv == 0.0) continue;
                            for (std::size_t t = 0; t < k; ++t)
                                dA[i * k + t] += gv * B[t * m + j];
                        }
                }
                if (bi->requires_grad) {
                    const double* A = ai->data.data() + ia * amat;
                    double* dB = bi->grad.data() + ib * bmat;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t t = 0; t < k; ++t) {
                            const double aval = A[i * k + t];
                            if (aval == 0.0) continue;
                            for (std::size_t j = 0; j < m; ++j)
                                dB[t * m + j] += aval * G[i * m + j];
                        }
                }
            });
        });
    }
    return out;
}

// Swap the trailing two dimensions.
inline Tensor transpose(Graph& g, const Tensor& x) {
    const Shape& s = x.shape();
    if (s.size() < 2)
        throw ShapeError("transpose needs rank >= 2, got " + shape_str(s));
    const std::size_t n = s[s.size() - 2], m = s[s.size() - 1];
    Shape so = s;
    std::swap(so[so.size() - 2], so[so.size() - 1]);
    const std::size_t batches = numel(s) / (n * m);

    Tensor out = Tensor::zeros(so, x.requires_grad());
    {
        const auto& xv = x.values();
        auto& ov = out.values_mut();
        for (std::size_t b = 0; b < batches; ++b)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    ov[b * n * m + j * n + i] = xv[b * n * m + i * m + j];
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi, batches, n, m] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t b = 0; b < batches; ++b)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j)
                        xi->grad[b * n * m + i * m + j] += oi->grad[b * n * m + j * n + i];
        });
    }
    return out;
}

// Copy into a new shape with identical element count.
inline Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    Tensor out(std::move(shape), x.values(), x.requires_grad());
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
        });
    }
    return out;
}

// Concatenate along `axis`; all other dimensions must agree.
inline Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw UsageError("concat of zero tensors");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size())
        throw UsageError("concat axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s0));
    std::size_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size())
            throw ShapeError("concat rank mismatch: " + shape_str(s0) + " vs " + shape_str(s));
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != s0[d])
                throw ShapeError("concat shapes differ off-axis: " + shape_str(s0) + " vs " +
                                 shape_str(s));
        total += s[axis];
        rg = rg || p.requires_grad();
    }
    Shape so = s0;
    so[axis] = total;
    const auto sp = detail::split_axis(so, axis);

    Tensor out = Tensor::zeros(so, rg);
    {
        auto& ov = out.values_mut();
        std::size_t base = 0;
        for (const auto& p : parts) {
            const std::size_t w = p.shape()[axis];
            const auto& pv = p.values();
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t i = 0; i < w; ++i)
                    for (std::size_t in = 0; in < sp.inner; ++in)
                        ov[(o * sp.n + base + i) * sp.inner + in] =
                            pv[(o * w + i) * sp.inner + in];
            base += w;
        }
    }
    if (rg) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        std::vector<std::size_t> widths;
        for (const auto& p : parts) {
            impls.push_back(p.impl());
            widths.push_back(p.shape()[axis]);
        }
        auto oi = out.impl();
        g.record([impls, widths, oi, sp] {
            if (oi->grad.empty()) return;
            std::size_t base = 0;
            for (std::size_t t = 0; t < impls.size(); ++t) {
                const std::size_t w = widths[t];
                if (impls[t]->requires_grad) {
                    impls[t]->ensure_grad();
                    for (std::size_t o = 0; o < sp.outer; ++o)
                        for (std::size_t i = 0; i < w; ++i)
                            for (std::size_t in = 0; in < sp.inner; ++in)
                                impls[t]->grad[(o * w + i) * sp.inner + in] +=
                                    oi->grad[(o * sp.n + base + i) * sp.inner + in];
                }
                base += w;
            }
        });
    }
    return out;
}

// Elementwise sum with broadcasting; gradients reduce over broadcast axes.
inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    const Shape so = broadcast_shape(a.shape(), b.shape());
    const auto sta = broadcast_strides(a.shape(), so);
    const auto stb = broadcast_strides(b.shape(), so);

    Tensor out = Tensor::zeros(so, a.requires_grad() || b.requires_grad());
    {
        const auto& av = a.values();
        const auto& bv = b.values();
        auto& ov = out.values_mut();
        for_each_broadcast(so, sta, stb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
            ov[io] = av[ia] + bv[ib];
        });
    }
    if (out.requires_grad()) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        g.record([ai, bi, oi, so, sta, stb] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) ai->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            for_each_broadcast(so, sta, stb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
                if (ai->requires_grad) ai->grad[ia] += oi->grad[io];
                if (bi->requires_grad) bi->grad[ib] += oi->grad[io];
            });
        });
    }
    return out;
}

// x * c for a plain scalar c.
inline Tensor scale(Graph& g, const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    {
        const auto& xv = x.values();
        auto& ov = out.values_mut();
        for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * c;
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi, c] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i] * c;
        });
    }
    return out;
}

inline Tensor relu(Graph& g, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    {
        const auto& xv = x.values();
        auto& ov = out.values_mut();
        for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i)
                if (xi->data[i] > 0.0) xi->grad[i] += oi->grad[i];
        });
    }
    return out;
}

inline Tensor sum(Graph& g, const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    Tensor out = Tensor::scalar(acc, x.requires_grad());
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[0];
        });
    }
    return out;
}

inline Tensor mean(Graph& g, const Tensor& x) {
    if (x.size() == 0) throw UsageError("mean of empty tensor");
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::scalar(acc * inv, x.requires_grad());
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi, inv] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[0] * inv;
        });
    }
    return out;
}

// Numerically stable softmax along `axis`: the per-slice max is subtracted
// before exponentiation, so constant offsets cancel exactly.
inline Tensor softmax(Graph& g, const Tensor& x, std::size_t axis) {
    const auto sp = detail::split_axis(x.shape(), axis);
    for (double v : x.values())
        if (!std::isfinite(v)) throw NumericError("softmax on non-finite input");

    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    {
        const auto& xv = x.values();
        auto& ov = out.values_mut();
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const auto at = [&](std::size_t i) { return (o * sp.n + i) * sp.inner + in; };
                double mx = xv[at(0)];
                for (std::size_t i = 1; i < sp.n; ++i) mx = std::max(mx, xv[at(i)]);
                double z = 0.0;
                for (std::size_t i = 0; i < sp.n; ++i) {
                    const double e = std::exp(xv[at(i)] - mx);
                    ov[at(i)] = e;
                    z += e;
                }
                for (std::size_t i = 0; i < sp.n; ++i) ov[at(i)] /= z;
            }
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), oi = out.impl();
        g.record([xi, oi, sp] {
            if (oi->grad.empty()) return;
            xi->ensure_grad();
            // dx = y * (dy - sum(dy * y)) per slice
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const auto at = [&](std::size_t i) { return (o * sp.n + i) * sp.inner + in; };
                    double dot = 0.0;
                    for (std::size_t i = 0; i < sp.n; ++i) dot += oi->grad[at(i)] * oi->data[at(i)];
                    for (std::size_t i = 0; i < sp.n; ++i)
                        xi->grad[at(i)] += oi->data[at(i)] * (oi->grad[at(i)] - dot);
                }
        });
    }
    return out;
}

// Normalize along `axis` to zero mean, unit variance (biased, eps-stabilized),
// then apply the per-position affine gain/bias. A zero-variance slice comes
// out as plain bias.
inline Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias,
                         std::size_t axis, double eps = 1e-5) {
    const auto sp = detail::split_axis(x.shape(), axis);
    if (eps <= 0.0) throw UsageError("layer_norm eps must be positive");
    if (gain.size() != sp.n || bias.size() != sp.n)
        throw ShapeError("layer_norm gain/bias length " + std::to_string(gain.size()) + "/" +
                         std::to_string(bias.size()) + " != axis size " + std::to_string(sp.n));

    const std::size_t slices = sp.outer * sp.inner;
    std::vector<double> xhat(x.size());
    std::vector<double> inv_sigma(slices);

    Tensor out = Tensor::zeros(x.shape(), x.requires_grad() || gain.requires_grad() ||
                                              bias.requires_grad());
    {
        const auto& xv = x.values();
        const auto& gv = gain.values();
        const auto& bv = bias.values();
        auto& ov = out.values_mut();
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const auto at = [&](std::size_t i) { return (o * sp.n + i) * sp.inner + in; };
                double mu = 0.0;
                for (std::size_t i = 0; i < sp.n; ++i) mu += xv[at(i)];
                mu /= static_cast<double>(sp.n);
                double var = 0.0;
                for (std::size_t i = 0; i < sp.n; ++i) {
                    const double d = xv[at(i)] - mu;
                    var += d * d;
                }
                var /= static_cast<double>(sp.n);
                const double is = 1.0 / std::sqrt(var + eps);
                inv_sigma[o * sp.inner + in] = is;
                for (std::size_t i = 0; i < sp.n; ++i) {
                    const double xh = (xv[at(i)] - mu) * is;
                    xhat[at(i)] = xh;
                    ov[at(i)] = gv[i] * xh + bv[i];
                }
            }
    }
    if (out.requires_grad()) {
        auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl();
        g.record([xi, gi, bi, oi, sp, xhat = std::move(xhat),
                  inv_sigma = std::move(inv_sigma)] {
            if (oi->grad.empty()) return;
            if (xi->requires_grad) xi->ensure_grad();
            if (gi->requires_grad) gi->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            const double invn = 1.0 / static_cast<double>(sp.n);
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const auto at = [&](std::size_t i) { return (o * sp.n + i) * sp.inner + in; };
                    const double is = inv_sigma[o * sp.inner + in];
                    double m_dxh = 0.0, m_dxh_xh = 0.0;
                    for (std::size_t i = 0; i < sp.n; ++i) {
                        const double dout = oi->grad[at(i)];
                        const double dxh = dout * gi->data[i];
                        m_dxh += dxh;
                        m_dxh_xh += dxh * xhat[at(i)];
                        if (gi->requires_grad) gi->grad[i] += dout * xhat[at(i)];
                        if (bi->requires_grad) bi->grad[i] += dout;
                    }
                    if (!xi->requires_grad) continue;
                    m_dxh *= invn;
                    m_dxh_xh *= invn;
                    for (std::size_t i = 0; i < sp.n; ++i) {
                        const double dxh = oi->grad[at(i)] * gi->data[i];
                        xi->grad[at(i)] += (dxh - m_dxh - xhat[at(i)] * m_dxh_xh) * is;
                    }
                }
        });
    }
    return out;
}

// x.W + b row-wise; W is (in, out), b is (out).
inline Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(g, matmul(g, x, w), b);
}

// ---------------------------------------------------------------------------
// non-differentiable utilities

inline std::vector<int> argmax_rows(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.size() != 2) throw UsageError("argmax_rows wants a rank-2 tensor, got " + shape_str(s));
    const std::size_t rows = s[0], cols = s[1];
    std::vector<int> out(rows, 0);
    const auto& v = t.values();
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (v[r * cols + c] > v[r * cols + best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

inline Tensor rand_uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                           bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values_mut()) v = dist(rng);
    return t;
}

inline Tensor rand_normal(Shape shape, double mean, double sd, std::mt19937_64& rng,
                          bool requires_grad = false) {
    std::normal_distribution<double> dist(mean, sd);
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values_mut()) v = dist(rng);
    return t;
}

// Glorot/Xavier uniform init for a (fan_in, fan_out) weight matrix.
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rand_uniform(Shape{fan_in, fan_out}, -a, a, rng, true);
}

}  // namespace acmca
