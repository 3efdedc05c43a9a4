#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "dscodec/ad/ops.hpp"

namespace dscodec::ad {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
}  // namespace

Var snake(const Var& x, const Var& log_alpha) {
    if (x.ndim() != 3) throw std::invalid_argument("snake expects (B, C, T)");
    const std::int64_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
    if (log_alpha.numel() != ch) throw std::invalid_argument("snake: alpha size mismatch");
    std::vector<double> out(x.values().size());
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < ch; ++c) {
            const double a = std::exp(log_alpha.values()[c]);
            const double* xi = x.values().data() + (b * ch + c) * len;
            double* yi = out.data() + (b * ch + c) * len;
            for (std::int64_t t = 0; t < len; ++t) {
                const double s = std::sin(a * xi[t]);
                yi[t] = xi[t] + s * s / a;
            }
        }
    return make_result(x.shape(), std::move(out), {x, log_alpha}, [=](Node& self) {
        Node& px = *self.parents[0];
        Node& pa = *self.parents[1];
        if (px.requires_grad) px.ensure_grad();
        if (pa.requires_grad) pa.ensure_grad();
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t c = 0; c < ch; ++c) {
                const double a = std::exp(pa.value[c]);
                const double* xi = px.value.data() + (b * ch + c) * len;
                const double* g = self.grad.data() + (b * ch + c) * len;
                double ga = 0.0;
                for (std::int64_t t = 0; t < len; ++t) {
                    const double s = std::sin(a * xi[t]);
                    const double s2 = std::sin(2.0 * a * xi[t]);
                    if (px.requires_grad) px.grad[(b * ch + c) * len + t] += g[t] * (1.0 + s2);
                    // d/da [sin^2(a x)/a] = x sin(2ax)/a - sin^2(ax)/a^2; chain with da/dlog_a = a.
                    ga += g[t] * (xi[t] * s2 - s * s / a);
                }
                if (pa.requires_grad) pa.grad[c] += ga;
            }
    });
}

Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& bias) {
    if (x.ndim() != 3) throw std::invalid_argument("lstm expects (B, T, I)");
    const std::int64_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
    const std::int64_t hidden = w_hh.dim(1);
    const std::int64_t g4 = 4 * hidden;
    if (w_ih.dim(0) != g4 || w_ih.dim(1) != in || w_hh.dim(0) != g4 || bias.numel() != g4)
        throw std::invalid_argument("lstm: weight shapes inconsistent with input " + shape_str(x.shape()));

    // Gate activations per (t, b): [i f g o] after nonlinearity; cell states.
    auto gates = std::make_shared<std::vector<double>>(static_cast<std::size_t>(steps * batch * g4));
    auto cells = std::make_shared<std::vector<double>>(static_cast<std::size_t>(steps * batch * hidden));
    std::vector<double> out(static_cast<std::size_t>(batch * steps * hidden));

    RowMat xw(batch * steps, g4);
    xw.noalias() = CMapMat(x.values().data(), batch * steps, in) * CMapMat(w_ih.values().data(), g4, in).transpose();
    CMapMat whh(w_hh.values().data(), g4, hidden);
    RowMat h = RowMat::Zero(batch, hidden);
    RowMat c = RowMat::Zero(batch, hidden);
    RowMat pre(batch, g4);
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::int64_t t = 0; t < steps; ++t) {
        pre.noalias() = h * whh.transpose();
        for (std::int64_t b = 0; b < batch; ++b) {
            double* gt = gates->data() + (t * batch + b) * g4;
            for (std::int64_t j = 0; j < g4; ++j) gt[j] = pre(b, j) + xw(b * steps + t, j) + bias.values()[j];
            for (std::int64_t j = 0; j < hidden; ++j) {
                const double ig = sig(gt[j]);
                const double fg = sig(gt[hidden + j]);
                const double gg = std::tanh(gt[2 * hidden + j]);
                const double og = sig(gt[3 * hidden + j]);
                gt[j] = ig;
                gt[hidden + j] = fg;
                gt[2 * hidden + j] = gg;
                gt[3 * hidden + j] = og;
                c(b, j) = fg * c(b, j) + ig * gg;
                h(b, j) = og * std::tanh(c(b, j));
                (*cells)[(t * batch + b) * hidden + j] = c(b, j);
                out[(b * steps + t) * hidden + j] = h(b, j);
            }
        }
    }

    return make_result({batch, steps, hidden}, std::move(out), {x, w_ih, w_hh, bias}, [=](Node& self) {
        Node& px = *self.parents[0];
        Node& pih = *self.parents[1];
        Node& phh = *self.parents[2];
        Node& pb = *self.parents[3];
        for (Node* p : {&px, &pih, &phh, &pb})
            if (p->requires_grad) p->ensure_grad();
        CMapMat wih(pih.value.data(), g4, in);
        CMapMat wh(phh.value.data(), g4, hidden);
        RowMat dh_next = RowMat::Zero(batch, hidden);
        RowMat dc_next = RowMat::Zero(batch, hidden);
        RowMat da(batch, g4);
        RowMat h_prev(batch, hidden);
        for (std::int64_t t = steps - 1; t >= 0; --t) {
            for (std::int64_t b = 0; b < batch; ++b) {
                const double* gt = gates->data() + (t * batch + b) * g4;
                const double* ct = cells->data() + (t * batch + b) * hidden;
                for (std::int64_t j = 0; j < hidden; ++j) {
                    const double ig = gt[j], fg = gt[hidden + j], gg = gt[2 * hidden + j], og = gt[3 * hidden + j];
                    const double tc = std::tanh(ct[j]);
                    const double c_prev = t > 0 ? (*cells)[((t - 1) * batch + b) * hidden + j] : 0.0;
                    const double dh = self.grad[(b * steps + t) * hidden + j] + dh_next(b, j);
                    const double dc = dh * og * (1.0 - tc * tc) + dc_next(b, j);
                    da(b, j) = dc * gg * ig * (1.0 - ig);
                    da(b, hidden + j) = dc * c_prev * fg * (1.0 - fg);
                    da(b, 2 * hidden + j) = dc * ig * (1.0 - gg * gg);
                    da(b, 3 * hidden + j) = dh * tc * og * (1.0 - og);
                    dc_next(b, j) = dc * fg;
                    h_prev(b, j) = t > 0 ? self.value[(b * steps + t - 1) * hidden + j] : 0.0;
                }
            }
            if (phh.requires_grad) MapMat(phh.grad.data(), g4, hidden).noalias() += da.transpose() * h_prev;
            if (pb.requires_grad)
                for (std::int64_t b = 0; b < batch; ++b)
                    for (std::int64_t j = 0; j < g4; ++j) pb.grad[j] += da(b, j);
            for (std::int64_t b = 0; b < batch; ++b) {
                const double* xt = px.value.data() + (b * steps + t) * in;
                if (pih.requires_grad) {
                    MapMat gw(pih.grad.data(), g4, in);
                    gw.noalias() += da.row(b).transpose() * Eigen::Map<const Eigen::RowVectorXd>(xt, in);
                }
                if (px.requires_grad) {
                    Eigen::Map<Eigen::RowVectorXd> gx(px.grad.data() + (b * steps + t) * in, in);
                    gx.noalias() += da.row(b) * wih;
                }
            }
            dh_next.noalias() = da * wh;
        }
    });
}

Var rms_norm(const Var& x, const Var& gain, double eps) {
    const std::int64_t d = x.dim(-1);
    if (gain.numel() != d) throw std::invalid_argument("rms_norm: gain size mismatch");
    const std::int64_t rows = x.numel() / std::max<std::int64_t>(d, 1);
    std::vector<double> out(x.values().size());
    std::vector<double> inv(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * d;
        double ms = 0.0;
        for (std::int64_t i = 0; i < d; ++i) ms += xr[i] * xr[i];
        ms /= static_cast<double>(d);
        inv[r] = 1.0 / std::sqrt(ms + eps);
        for (std::int64_t i = 0; i < d; ++i) out[r * d + i] = xr[i] * inv[r] * gain.values()[i];
    }
    return make_result(x.shape(), std::move(out), {x, gain}, [=, inv = std::move(inv)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        if (px.requires_grad) px.ensure_grad();
        if (pg.requires_grad) pg.ensure_grad();
        std::vector<double> dxh(static_cast<std::size_t>(d));
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* xr = px.value.data() + r * d;
            const double* g = self.grad.data() + r * d;
            double dot = 0.0;
            for (std::int64_t i = 0; i < d; ++i) {
                const double xh = xr[i] * inv[r];
                dxh[i] = g[i] * pg.value[i];
                dot += dxh[i] * xh;
                if (pg.requires_grad) pg.grad[i] += g[i] * xh;
            }
            dot /= static_cast<double>(d);
            if (px.requires_grad)
                for (std::int64_t i = 0; i < d; ++i)
                    px.grad[r * d + i] += inv[r] * (dxh[i] - xr[i] * inv[r] * dot);
        }
    });
}

Var softmax(const Var& x) {
    const std::int64_t d = x.dim(-1);
    const std::int64_t rows = d == 0 ? 0 : x.numel() / d;
    std::vector<double> out(x.values().size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * d;
        double* yr = out.data() + r * d;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t i = 0; i < d; ++i) mx = std::max(mx, xr[i]);
        double s = 0.0;
        for (std::int64_t i = 0; i < d; ++i) s += (yr[i] = std::exp(xr[i] - mx));
        for (std::int64_t i = 0; i < d; ++i) yr[i] /= s;
    }
    return make_result(x.shape(), std::move(out), {x}, [=](Node& self) {
        Node& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * d;
            const double* g = self.grad.data() + r * d;
            double dot = 0.0;
            for (std::int64_t i = 0; i < d; ++i) dot += y[i] * g[i];
            for (std::int64_t i = 0; i < d; ++i) px.grad[r * d + i] += y[i] * (g[i] - dot);
        }
    });
}

Var rope(const Var& x, double base) {
    if (x.ndim() != 4) throw std::invalid_argument("rope expects (B, H, T, D)");
    const std::int64_t d = x.dim(3), steps = x.dim(2);
    if (d % 2 != 0) throw std::invalid_argument("rope needs an even head dimension");
    const std::int64_t outer = x.dim(0) * x.dim(1);
    std::vector<double> cosv(static_cast<std::size_t>(steps * d / 2)), sinv(cosv.size());
    for (std::int64_t t = 0; t < steps; ++t)
        for (std::int64_t i = 0; i < d / 2; ++i) {
            const double theta = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            cosv[t * d / 2 + i] = std::cos(static_cast<double>(t) * theta);
            sinv[t * d / 2 + i] = std::sin(static_cast<double>(t) * theta);
        }
    std::vector<double> out(x.values().size());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t t = 0; t < steps; ++t)
            for (std::int64_t i = 0; i < d / 2; ++i) {
                const std::int64_t at = (o * steps + t) * d + 2 * i;
                const double a = x.values()[at], b = x.values()[at + 1];
                const double c = cosv[t * d / 2 + i], s = sinv[t * d / 2 + i];
                out[at] = a * c - b * s;
                out[at + 1] = a * s + b * c;
            }
    return make_result(x.shape(), std::move(out), {x}, [=](Node& self) {
        Node& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t t = 0; t < steps; ++t)
                for (std::int64_t i = 0; i < d / 2; ++i) {
                    const std::int64_t at = (o * steps + t) * d + 2 * i;
                    const double ga = self.grad[at], gb = self.grad[at + 1];
                    const double c = cosv[t * d / 2 + i], s = sinv[t * d / 2 + i];
                    px.grad[at] += ga * c + gb * s;
                    px.grad[at + 1] += -ga * s + gb * c;
                }
    });
}

Var l2_normalize(const Var& x, double eps) {
    const std::int64_t d = x.dim(-1);
    const std::int64_t rows = d == 0 ? 0 : x.numel() / d;
    std::vector<double> out(x.values().size());
    std::vector<double> norms(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * d;
        double s = 0.0;
        for (std::int64_t i = 0; i < d; ++i) s += xr[i] * xr[i];
        norms[r] = std::max(std::sqrt(s), eps);
        for (std::int64_t i = 0; i < d; ++i) out[r * d + i] = xr[i] / norms[r];
    }
    return make_result(x.shape(), std::move(out), {x}, [=, norms = std::move(norms)](Node& self) {
        Node& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * d;
            const double* g = self.grad.data() + r * d;
            double dot = 0.0;
            for (std::int64_t i = 0; i < d; ++i) dot += y[i] * g[i];
            for (std::int64_t i = 0; i < d; ++i) px.grad[r * d + i] += (g[i] - y[i] * dot) / norms[r];
        }
    });
}

Var gather_rows(const Var& table, std::span<const std::uint32_t> indices) {
    if (table.ndim() != 2) throw std::invalid_argument("gather_rows expects a 2-D table");
    const std::int64_t s = table.dim(0), d = table.dim(1);
    const auto n = static_cast<std::int64_t>(indices.size());
    std::vector<double> out(static_cast<std::size_t>(n * d));
    for (std::int64_t i = 0; i < n; ++i) {
        if (indices[i] >= s) throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]));
        std::copy_n(table.values().data() + indices[i] * d, d, out.data() + i * d);
    }
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    return make_result({n, d}, std::move(out), {table}, [=, idx = std::move(idx)](Node& self) {
        Node& pt = *self.parents[0];
        if (!pt.requires_grad) return;
        pt.ensure_grad();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j) pt.grad[idx[i] * d + j] += self.grad[i * d + j];
    });
}

Var add_constant(const Var& x, std::span<const double> mask) {
    const auto m = static_cast<std::int64_t>(mask.size());
    if (m == 0 || x.numel() % m != 0) throw std::invalid_argument("add_constant: mask does not tile input");
    std::vector<double> out(x.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += mask[i % m];
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) { accumulate(self, 0, self.grad); });
}

}  // namespace dscodec::ad

namespace dscodec::ad {

Var straight_through(const Var& z, const Var& c) {
    if (z.shape() != c.shape())
        throw std::invalid_argument("straight_through: shape mismatch " + shape_str(z.shape()) + " vs " +
                                    shape_str(c.shape()));
    return make_result(c.shape(), c.values(), {z}, [](Node& self) { accumulate(self, 0, self.grad); });
}

}  // namespace dscodec::ad
