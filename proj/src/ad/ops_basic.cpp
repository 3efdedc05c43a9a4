#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "dscodec/ad/ops.hpp"

namespace dscodec::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

template <typename F, typename G>
Var unary(const Var& x, F f, G df) {
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
    });
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        accumulate(self, 0, self.grad);
        accumulate(self, 1, self.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        accumulate(self, 0, self.grad);
        Node& p = *self.parents[1];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] -= self.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
        }
    });
}

Var scale(const Var& x, double s) {
    return unary(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& x, double s) {
    return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Var square(const Var& x) {
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sigmoid(const Var& x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var silu(const Var& x) {
    return unary(
        x, [](double v) { return v / (1.0 + std::exp(-v)); },
        [](double v, double) {
            double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 + v * (1.0 - s));
        });
}

Var leaky_relu(const Var& x, double slope) {
    return unary(
        x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
        [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Var log_clamp(const Var& x, double floor) {
    return unary(
        x, [floor](double v) { return std::log(std::max(v, floor)); },
        [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Var add_bias(const Var& x, const Var& b, int axis) {
    int nd = x.ndim();
    int ax = axis < 0 ? axis + nd : axis;
    std::int64_t c = x.dim(ax);
    if (b.numel() != c)
        throw std::invalid_argument("add_bias: bias of " + std::to_string(b.numel()) + " for axis size " +
                                    std::to_string(c));
    std::int64_t inner = 1;
    for (int i = ax + 1; i < nd; ++i) inner *= x.dim(i);
    std::int64_t outer = x.numel() / (c * inner);
    std::vector<double> out(x.values());
    const auto& bv = b.values();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t k = 0; k < c; ++k) {
            double* row = out.data() + (o * c + k) * inner;
            for (std::int64_t i = 0; i < inner; ++i) row[i] += bv[static_cast<std::size_t>(k)];
        }
    return make_result(x.shape(), std::move(out), {x, b}, [outer, c, inner](Node& self) {
        accumulate(self, 0, self.grad);
        Node& pb = *self.parents[1];
        if (!pb.requires_grad) return;
        pb.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t k = 0; k < c; ++k) {
                const double* row = self.grad.data() + (o * c + k) * inner;
                double s = 0.0;
                for (std::int64_t i = 0; i < inner; ++i) s += row[i];
                pb.grad[static_cast<std::size_t>(k)] += s;
            }
    });
}

Var sum(const Var& x) {
    double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    return make_result({}, {s}, {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (auto& g : p.grad) g += self.grad[0];
    });
}

Var mean(const Var& x) {
    if (x.numel() == 0) return Var::scalar(0.0);
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Var mean_abs_diff(const Var& a, const Var& b) {
    require_same_shape(a, b, "mean_abs_diff");
    const auto n = static_cast<double>(a.numel());
    if (a.numel() == 0) return Var::scalar(0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) s += std::abs(a.values()[i] - b.values()[i]);
    return make_result({}, {s / n}, {a, b}, [n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        double g = self.grad[0] / n;
        for (std::size_t i = 0; i < pa.value.size(); ++i) {
            double d = pa.value[i] - pb.value[i];
            double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            if (pa.requires_grad) {
                pa.ensure_grad();
                pa.grad[i] += g * sgn;
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                pb.grad[i] -= g * sgn;
            }
        }
    });
}

Var mean_sq_diff(const Var& a, const Var& b) {
    require_same_shape(a, b, "mean_sq_diff");
    if (a.numel() == 0) return Var::scalar(0.0);
    const auto n = static_cast<double>(a.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return make_result({}, {s / n}, {a, b}, [n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        double g = 2.0 * self.grad[0] / n;
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::size_t i = 0; i < pa.value.size(); ++i) {
            double d = pa.value[i] - pb.value[i];
            if (pa.requires_grad) pa.grad[i] += g * d;
            if (pb.requires_grad) pb.grad[i] -= g * d;
        }
    });
}

Var sum_all(const std::vector<Var>& scalars) {
    if (scalars.empty()) return Var::scalar(0.0);
    double s = 0.0;
    for (const auto& v : scalars) s += v.item();
    return make_result({}, {s}, scalars, [](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) accumulate(self, i, self.grad);
    });
}

Var reshape(const Var& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    return make_result(std::move(shape), x.values(), {x}, [](Node& self) { accumulate(self, 0, self.grad); });
}

Var permute(const Var& x, const std::vector<int>& axes) {
    const int nd = x.ndim();
    if (static_cast<int>(axes.size()) != nd) throw std::invalid_argument("permute: axis count mismatch");
    Shape out_shape(static_cast<std::size_t>(nd));
    std::vector<std::int64_t> in_strides(static_cast<std::size_t>(nd), 1);
    for (int i = nd - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * x.dim(i + 1);
    for (int i = 0; i < nd; ++i) out_shape[i] = x.dim(axes[i]);
    // Stride in the input for each output axis.
    std::vector<std::int64_t> src_stride(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) src_stride[i] = in_strides[axes[i]];

    const std::int64_t n = x.numel();
    std::vector<std::int64_t> map(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
    std::int64_t src = 0;
    for (std::int64_t o = 0; o < n; ++o) {
        map[o] = src;
        for (int a = nd - 1; a >= 0; --a) {
            if (++idx[a] < out_shape[a]) {
                src += src_stride[a];
                break;
            }
            src -= src_stride[a] * (out_shape[a] - 1);
            idx[a] = 0;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::int64_t o = 0; o < n; ++o) out[o] = x.values()[map[o]];
    return make_result(std::move(out_shape), std::move(out), {x}, [map = std::move(map)](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t o = 0; o < map.size(); ++o) p.grad[map[o]] += self.grad[o];
    });
}

Var slice(const Var& x, int axis, std::int64_t start, std::int64_t length) {
    const int nd = x.ndim();
    const int ax = axis < 0 ? axis + nd : axis;
    const std::int64_t extent = x.dim(ax);
    if (start < 0 || length < 0 || start + length > extent)
        throw std::out_of_range("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") of axis size " + std::to_string(extent));
    std::int64_t inner = 1;
    for (int i = ax + 1; i < nd; ++i) inner *= x.dim(i);
    const std::int64_t outer = extent == 0 ? 0 : x.numel() / (extent * inner);
    Shape shape = x.shape();
    shape[ax] = length;
    std::vector<double> out(static_cast<std::size_t>(outer * length * inner));
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(x.values().data() + (o * extent + start) * inner, length * inner,
                    out.data() + o * length * inner);
    return make_result(std::move(shape), std::move(out), {x}, [=](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
            const double* g = self.grad.data() + o * length * inner;
            double* dst = p.grad.data() + (o * extent + start) * inner;
            for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += g[i];
        }
    });
}

Var concat(const std::vector<Var>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat of nothing");
    const int nd = xs[0].ndim();
    const int ax = axis < 0 ? axis + nd : axis;
    Shape shape = xs[0].shape();
    std::int64_t total = 0;
    for (const auto& x : xs) {
        if (x.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
        for (int i = 0; i < nd; ++i)
            if (i != ax && x.dim(i) != shape[i]) throw std::invalid_argument("concat: shape mismatch");
        total += x.dim(ax);
    }
    shape[ax] = total;
    std::int64_t inner = 1;
    for (int i = ax + 1; i < nd; ++i) inner *= shape[i];
    std::int64_t outer = 1;
    for (int i = 0; i < ax; ++i) outer *= shape[i];
    std::vector<double> out(static_cast<std::size_t>(numel(shape)));
    std::vector<std::int64_t> offsets;
    std::int64_t off = 0;
    for (const auto& x : xs) {
        offsets.push_back(off);
        const std::int64_t len = x.dim(ax);
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(x.values().data() + o * len * inner, len * inner,
                        out.data() + (o * total + off) * inner);
        off += len;
    }
    std::vector<std::int64_t> lens;
    for (const auto& x : xs) lens.push_back(x.dim(ax));
    return make_result(std::move(shape), std::move(out), xs, [=](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            const std::int64_t len = lens[k];
            for (std::int64_t o = 0; o < outer; ++o) {
                const double* g = self.grad.data() + (o * total + offsets[k]) * inner;
                double* dst = p.grad.data() + o * len * inner;
                for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += g[i];
            }
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    const bool batched = a.ndim() == 3;
    if (!((a.ndim() == 2 && b.ndim() == 2) || (a.ndim() == 3 && b.ndim() == 3)))
        throw std::invalid_argument("matmul: expects 2-D or 3-D operands");
    const std::int64_t nb = batched ? a.dim(0) : 1;
    if (batched && b.dim(0) != nb) throw std::invalid_argument("matmul: batch mismatch");
    const std::int64_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
    if (b.dim(-2) != k)
        throw std::invalid_argument("matmul: inner mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(nb * m * n));
    for (std::int64_t i = 0; i < nb; ++i) {
        CMapMat am(a.values().data() + i * m * k, m, k);
        CMapMat bm(b.values().data() + i * k * n, k, n);
        MapMat om(out.data() + i * m * n, m, n);
        om.noalias() = am * bm;
    }
    Shape shape = batched ? Shape{nb, m, n} : Shape{m, n};
    return make_result(std::move(shape), std::move(out), {a, b}, [=](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::int64_t i = 0; i < nb; ++i) {
            CMapMat g(self.grad.data() + i * m * n, m, n);
            if (pa.requires_grad) {
                MapMat ga(pa.grad.data() + i * m * k, m, k);
                ga.noalias() += g * CMapMat(pb.value.data() + i * k * n, k, n).transpose();
            }
            if (pb.requires_grad) {
                MapMat gb(pb.grad.data() + i * k * n, k, n);
                gb.noalias() += CMapMat(pa.value.data() + i * m * k, m, k).transpose() * g;
            }
        }
    });
}

Var linear(const Var& x, const Var& w) {
    const std::int64_t in = w.dim(1), out_dim = w.dim(0);
    if (x.dim(-1) != in)
        throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    const std::int64_t rows = x.numel() / in;
    std::vector<double> out(static_cast<std::size_t>(rows * out_dim));
    {
        CMapMat xm(x.values().data(), rows, in);
        CMapMat wm(w.values().data(), out_dim, in);
        MapMat om(out.data(), rows, out_dim);
        om.noalias() = xm * wm.transpose();
    }
    Shape shape = x.shape();
    shape.back() = out_dim;
    return make_result(std::move(shape), std::move(out), {x, w}, [=](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        CMapMat g(self.grad.data(), rows, out_dim);
        if (px.requires_grad) {
            px.ensure_grad();
            MapMat(px.grad.data(), rows, in).noalias() += g * CMapMat(pw.value.data(), out_dim, in);
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            MapMat(pw.grad.data(), out_dim, in).noalias() += g.transpose() * CMapMat(px.value.data(), rows, in);
        }
    });
}

}  // namespace dscodec::ad
