#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "protosent/tensor.hpp"

namespace protosent {

namespace detail {

// Broadcast modes for the second operand of an elementwise binary op.
enum class Bcast { same, scalar, row, col };

inline Bcast bcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::col;
    throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

inline std::size_t bindex(Bcast m, std::size_t r, std::size_t c, std::size_t cols) {
    switch (m) {
        case Bcast::same: return r * cols + c;
        case Bcast::scalar: return 0;
        case Bcast::row: return c;
        case Bcast::col: return r;
    }
    return 0;
}

template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, BwdA dfa, BwdB dfb) {
    const Bcast mode = bcast_mode(a, b, name);
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<real> out(R * C);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = r * C + c;
            out[i] = fwd(av[i], bv[bindex(mode, r, c, C)]);
        }
    auto n = detail::make_node(R, C, std::move(out), {a.node(), b.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        TensorNode* pb = b.node().get();
        n->backward_fn = [pa, pb, mode, dfa, dfb](TensorNode& self) {
            const std::size_t R = self.rows, C = self.cols;
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t i = r * C + c;
                        pa->grad[i] += self.grad[i] * dfa(pa->value[i], pb->value[bindex(mode, r, c, C)]);
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t i = r * C + c;
                        const std::size_t j = bindex(mode, r, c, C);
                        pb->grad[j] += self.grad[i] * dfb(pa->value[i], pb->value[j]);
                    }
            }
        };
    }
    return Tensor(std::move(n));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.numel() == 1 && b.numel() > 1) return add(b, a);
    return detail::binary_op(
        a, b, "add", [](real x, real y) { return x + y; }, [](real, real) { return real(1); },
        [](real, real) { return real(1); });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "sub", [](real x, real y) { return x - y; }, [](real, real) { return real(1); },
        [](real, real) { return real(-1); });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.numel() == 1 && b.numel() > 1) return mul(b, a);
    return detail::binary_op(
        a, b, "mul", [](real x, real y) { return x * y; }, [](real, real y) { return y; },
        [](real x, real) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "div", [](real x, real y) { return x / y; }, [](real, real y) { return real(1) / y; },
        [](real x, real y) { return -x / (y * y); });
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<real> out(a.values());
    for (auto& v : out) v *= static_cast<real>(s);
    auto n = detail::make_node(a.rows(), a.cols(), std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        const real rs = static_cast<real>(s);
        n->backward_fn = [pa, rs](TensorNode& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * rs;
        };
    }
    return Tensor(std::move(n));
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape() + " x " + b.shape());
    const std::size_t M = a.rows(), K = a.cols(), N = b.cols();
    std::vector<real> out(M * N, real(0));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const real aik = av[i * K + k];
            if (aik == real(0)) continue;
            const real* brow = &bv[k * N];
            real* orow = &out[i * N];
            for (std::size_t j = 0; j < N; ++j) orow[j] += aik * brow[j];
        }
    auto n = detail::make_node(M, N, std::move(out), {a.node(), b.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        TensorNode* pb = b.node().get();
        n->backward_fn = [pa, pb](TensorNode& self) {
            const std::size_t M = pa->rows, K = pa->cols, N = pb->cols;
            if (pa->requires_grad) {
                pa->ensure_grad();
                // dA = dC * B^T
                for (std::size_t i = 0; i < M; ++i)
                    for (std::size_t k = 0; k < K; ++k) {
                        real acc = 0;
                        const real* grow = &self.grad[i * N];
                        const real* brow = &pb->value[k * N];
                        for (std::size_t j = 0; j < N; ++j) acc += grow[j] * brow[j];
                        pa->grad[i * K + k] += acc;
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                // dB = A^T * dC
                for (std::size_t i = 0; i < M; ++i)
                    for (std::size_t k = 0; k < K; ++k) {
                        const real aik = pa->value[i * K + k];
                        if (aik == real(0)) continue;
                        const real* grow = &self.grad[i * N];
                        real* brow = &pb->grad[k * N];
                        for (std::size_t j = 0; j < N; ++j) brow[j] += aik * grow[j];
                    }
            }
        };
    }
    return Tensor(std::move(n));
}

inline Tensor transpose(const Tensor& a) {
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<real> out(R * C);
    const auto& av = a.values();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out[c * R + r] = av[r * C + c];
    auto n = detail::make_node(C, R, std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa](TensorNode& self) {
            pa->ensure_grad();
            const std::size_t R = pa->rows, C = pa->cols;
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) pa->grad[r * C + c] += self.grad[c * R + r];
        };
    }
    return Tensor(std::move(n));
}

inline Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t nrows) {
    if (r0 + nrows > a.rows())
        throw DimensionError("slice_rows: range [" + std::to_string(r0) + ", " +
                             std::to_string(r0 + nrows) + ") exceeds " + a.shape());
    const std::size_t C = a.cols();
    std::vector<real> out(a.values().begin() + r0 * C, a.values().begin() + (r0 + nrows) * C);
    auto n = detail::make_node(nrows, C, std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa, r0](TensorNode& self) {
            pa->ensure_grad();
            const std::size_t C = self.cols;
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[r0 * C + i] += self.grad[i];
        };
    }
    return Tensor(std::move(n));
}

inline Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t ncols) {
    if (c0 + ncols > a.cols())
        throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " +
                             std::to_string(c0 + ncols) + ") exceeds " + a.shape());
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<real> out(R * ncols);
    const auto& av = a.values();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < ncols; ++c) out[r * ncols + c] = av[r * C + c0 + c];
    auto n = detail::make_node(R, ncols, std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa, c0](TensorNode& self) {
            pa->ensure_grad();
            const std::size_t R = self.rows, NC = self.cols, C = pa->cols;
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < NC; ++c)
                    pa->grad[r * C + c0 + c] += self.grad[r * NC + c];
        };
    }
    return Tensor(std::move(n));
}

inline Tensor row(const Tensor& a, std::size_t r) { return slice_rows(a, r, 1); }

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
    std::vector<std::shared_ptr<TensorNode>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) parents.push_back(p.node());

    if (axis == 0) {
        const std::size_t C = parts.front().cols();
        std::size_t R = 0;
        for (const auto& p : parts) {
            if (p.cols() != C)
                throw DimensionError("concat axis 0: column mismatch " + p.shape() + " vs " +
                                     parts.front().shape());
            R += p.rows();
        }
        std::vector<real> out;
        out.reserve(R * C);
        for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
        auto n = detail::make_node(R, C, std::move(out), std::move(parents));
        if (n->requires_grad) {
            n->backward_fn = [](TensorNode& self) {
                std::size_t offset = 0;
                for (auto& p : self.parents) {
                    const std::size_t len = p->numel();
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::size_t i = 0; i < len; ++i) p->grad[i] += self.grad[offset + i];
                    }
                    offset += len;
                }
            };
        }
        return Tensor(std::move(n));
    }

    const std::size_t R = parts.front().rows();
    std::size_t C = 0;
    for (const auto& p : parts) {
        if (p.rows() != R)
            throw DimensionError("concat axis 1: row mismatch " + p.shape() + " vs " +
                                 parts.front().shape());
        C += p.cols();
    }
    std::vector<real> out(R * C);
    std::size_t c0 = 0;
    for (const auto& p : parts) {
        const auto& pv = p.values();
        const std::size_t pc = p.cols();
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < pc; ++c) out[r * C + c0 + c] = pv[r * pc + c];
        c0 += pc;
    }
    auto n = detail::make_node(R, C, std::move(out), std::move(parents));
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            const std::size_t R = self.rows, C = self.cols;
            std::size_t c0 = 0;
            for (auto& p : self.parents) {
                const std::size_t pc = p->cols;
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c = 0; c < pc; ++c)
                            p->grad[r * pc + c] += self.grad[r * C + c0 + c];
                }
                c0 += pc;
            }
        };
    }
    return Tensor(std::move(n));
}

// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& a) {
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<real> out(R * C);
    const auto& av = a.values();
    for (std::size_t r = 0; r < R; ++r) {
        const real* x = &av[r * C];
        real* y = &out[r * C];
        real mx = x[0];
        for (std::size_t c = 0; c < C; ++c) {
            if (!std::isfinite(static_cast<double>(x[c])))
                throw NumericError("softmax: non-finite input");
            mx = std::max(mx, x[c]);
        }
        real sum = 0;
        for (std::size_t c = 0; c < C; ++c) {
            y[c] = std::exp(x[c] - mx);
            sum += y[c];
        }
        for (std::size_t c = 0; c < C; ++c) y[c] /= sum;
    }
    auto n = detail::make_node(R, C, std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa](TensorNode& self) {
            pa->ensure_grad();
            const std::size_t R = self.rows, C = self.cols;
            for (std::size_t r = 0; r < R; ++r) {
                const real* y = &self.value[r * C];
                const real* dy = &self.grad[r * C];
                real dot = 0;
                for (std::size_t c = 0; c < C; ++c) dot += y[c] * dy[c];
                real* dx = &pa->grad[r * C];
                for (std::size_t c = 0; c < C; ++c) dx[c] += y[c] * (dy[c] - dot);
            }
        };
    }
    return Tensor(std::move(n));
}

// Normalization over the last axis followed by the affine map gain/bias (1xC).
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
    const std::size_t R = x.rows(), C = x.cols();
    if (gain.rows() != 1 || gain.cols() != C || bias.rows() != 1 || bias.cols() != C)
        throw DimensionError("layer_norm: gain/bias must be (1x" + std::to_string(C) + "), got " +
                             gain.shape() + " and " + bias.shape());
    std::vector<real> out(R * C);
    std::vector<real> xhat(R * C);
    std::vector<real> sinv_row(R);
    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    for (std::size_t r = 0; r < R; ++r) {
        const real* xr = &xv[r * C];
        real mean = 0;
        for (std::size_t c = 0; c < C; ++c) mean += xr[c];
        mean /= static_cast<real>(C);
        real var = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const real d = xr[c] - mean;
            var += d * d;
        }
        var /= static_cast<real>(C);
        const real sinv = real(1) / std::sqrt(var + static_cast<real>(eps));
        sinv_row[r] = sinv;
        for (std::size_t c = 0; c < C; ++c) {
            const real h = (xr[c] - mean) * sinv;
            xhat[r * C + c] = h;
            out[r * C + c] = h * gv[c] + bv[c];
        }
    }
    auto n = detail::make_node(R, C, std::move(out), {x.node(), gain.node(), bias.node()});
    if (n->requires_grad) {
        TensorNode* px = x.node().get();
        TensorNode* pg = gain.node().get();
        TensorNode* pb = bias.node().get();
        n->backward_fn = [px, pg, pb, xhat = std::move(xhat),
                          sinv_row = std::move(sinv_row)](TensorNode& self) {
            const std::size_t R = self.rows, C = self.cols;
            if (px->requires_grad) px->ensure_grad();
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (std::size_t r = 0; r < R; ++r) {
                const real* dy = &self.grad[r * C];
                const real* h = &xhat[r * C];
                if (pg->requires_grad || pb->requires_grad) {
                    for (std::size_t c = 0; c < C; ++c) {
                        if (pg->requires_grad) pg->grad[c] += dy[c] * h[c];
                        if (pb->requires_grad) pb->grad[c] += dy[c];
                    }
                }
                if (px->requires_grad) {
                    real sum1 = 0, sum2 = 0;
                    for (std::size_t c = 0; c < C; ++c) {
                        const real dyh = dy[c] * pg->value[c];
                        sum1 += dyh;
                        sum2 += dyh * h[c];
                    }
                    const real sinv = sinv_row[r];
                    real* dx = &px->grad[r * C];
                    for (std::size_t c = 0; c < C; ++c) {
                        const real dyh = dy[c] * pg->value[c];
                        dx[c] += sinv * (dyh - (sum1 + h[c] * sum2) / static_cast<real>(C));
                    }
                }
            }
        };
    }
    return Tensor(std::move(n));
}

namespace detail {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd dExpr) {
    std::vector<real> out(a.values());
    for (auto& v : out) v = fwd(v);
    auto n = detail::make_node(a.rows(), a.cols(), std::move(out), {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa, dExpr](TensorNode& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * dExpr(pa->value[i], self.value[i]);
        };
    }
    return Tensor(std::move(n));
}

}  // namespace detail

inline Tensor relu(const Tensor& a) {
    return detail::unary_op(
        a, [](real x) { return x > 0 ? x : real(0); },
        [](real x, real) { return x > 0 ? real(1) : real(0); });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        a,
        [](real x) {
            if (x >= 0) return real(1) / (real(1) + std::exp(-x));
            const real e = std::exp(x);
            return e / (real(1) + e);
        },
        [](real, real y) { return y * (real(1) - y); });
}

inline Tensor sqrt_elem(const Tensor& a) {
    return detail::unary_op(
        a, [](real x) { return std::sqrt(x); }, [](real, real y) { return real(0.5) / y; });
}

inline Tensor square(const Tensor& a) {
    return detail::unary_op(
        a, [](real x) { return x * x; }, [](real x, real) { return real(2) * x; });
}

inline Tensor sum_all(const Tensor& a) {
    real s = 0;
    for (real v : a.values()) s += v;
    auto n = detail::make_node(1, 1, {s}, {a.node()});
    if (n->requires_grad) {
        TensorNode* pa = a.node().get();
        n->backward_fn = [pa](TensorNode& self) {
            pa->ensure_grad();
            for (auto& g : pa->grad) g += self.grad[0];
        };
    }
    return Tensor(std::move(n));
}

inline Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

// axis 0 collapses rows (result 1xC), axis 1 collapses columns (result Rx1).
inline Tensor sum_axis(const Tensor& a, int axis) {
    const std::size_t R = a.rows(), C = a.cols();
    const auto& av = a.values();
    if (axis == 0) {
        std::vector<real> out(C, real(0));
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) out[c] += av[r * C + c];
        auto n = detail::make_node(1, C, std::move(out), {a.node()});
        if (n->requires_grad) {
            TensorNode* pa = a.node().get();
            n->backward_fn = [pa](TensorNode& self) {
                pa->ensure_grad();
                const std::size_t R = pa->rows, C = pa->cols;
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) pa->grad[r * C + c] += self.grad[c];
            };
        }
        return Tensor(std::move(n));
    }
    if (axis == 1) {
        std::vector<real> out(R, real(0));
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) out[r] += av[r * C + c];
        auto n = detail::make_node(R, 1, std::move(out), {a.node()});
        if (n->requires_grad) {
            TensorNode* pa = a.node().get();
            n->backward_fn = [pa](TensorNode& self) {
                pa->ensure_grad();
                const std::size_t R = pa->rows, C = pa->cols;
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) pa->grad[r * C + c] += self.grad[r];
            };
        }
        return Tensor(std::move(n));
    }
    throw ContractError("sum_axis: axis must be 0 or 1");
}

inline Tensor mean_axis(const Tensor& a, int axis) {
    const double denom = axis == 0 ? static_cast<double>(a.rows()) : static_cast<double>(a.cols());
    return scale(sum_axis(a, axis), 1.0 / denom);
}

// Inverted-scaling dropout: kept units are divided by 1-p during training so
// evaluation is a plain identity.
inline Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must satisfy 0 <= p < 1, got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const real keep_scale = static_cast<real>(1.0 / (1.0 - p));
    std::vector<real> mask(x.numel());
    for (auto& m : mask) m = rng.uniform() < p ? real(0) : keep_scale;
    Tensor mask_t = Tensor::from_values(x.rows(), x.cols(), std::move(mask));
    return mul(x, mask_t);
}

}  // namespace protosent
