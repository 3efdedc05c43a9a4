#include <stdexcept>

#include <Eigen/Dense>

#include "dscodec/ad/ops.hpp"

namespace dscodec::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// col[(c*K + k), t] = x[c, t*stride + k*dilation - pad_left]
void im2col_1d(const double* x, std::int64_t channels, std::int64_t length, int kernel, int stride, int dilation,
               int pad_left, std::int64_t out_len, double* col) {
    for (std::int64_t c = 0; c < channels; ++c)
        for (int k = 0; k < kernel; ++k) {
            double* row = col + (c * kernel + k) * out_len;
            const double* xc = x + c * length;
            const std::int64_t offset = static_cast<std::int64_t>(k) * dilation - pad_left;
            for (std::int64_t t = 0; t < out_len; ++t) {
                const std::int64_t src = t * stride + offset;
                row[t] = (src >= 0 && src < length) ? xc[src] : 0.0;
            }
        }
}

void col2im_1d(const double* col, std::int64_t channels, std::int64_t length, int kernel, int stride, int dilation,
               int pad_left, std::int64_t out_len, double* x) {
    for (std::int64_t c = 0; c < channels; ++c)
        for (int k = 0; k < kernel; ++k) {
            const double* row = col + (c * kernel + k) * out_len;
            double* xc = x + c * length;
            const std::int64_t offset = static_cast<std::int64_t>(k) * dilation - pad_left;
            for (std::int64_t t = 0; t < out_len; ++t) {
                const std::int64_t src = t * stride + offset;
                if (src >= 0 && src < length) xc[src] += row[t];
            }
        }
}

void add_channel_bias(const Var& bias, std::int64_t batch, std::int64_t channels, std::int64_t inner,
                      std::vector<double>& out) {
    if (!bias.defined()) return;
    if (bias.numel() != channels) throw std::invalid_argument("conv bias size mismatch");
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c) {
            double* row = out.data() + (b * channels + c) * inner;
            const double v = bias.values()[static_cast<std::size_t>(c)];
            for (std::int64_t i = 0; i < inner; ++i) row[i] += v;
        }
}

void bias_backward(Node& self, std::size_t parent, std::int64_t batch, std::int64_t channels,
                   std::int64_t inner) {
    if (parent >= self.parents.size()) return;
    Node& pb = *self.parents[parent];
    if (!pb.requires_grad) return;
    pb.ensure_grad();
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c) {
            const double* row = self.grad.data() + (b * channels + c) * inner;
            double s = 0.0;
            for (std::int64_t i = 0; i < inner; ++i) s += row[i];
            pb.grad[static_cast<std::size_t>(c)] += s;
        }
}

std::vector<Var> with_bias(const Var& x, const Var& w, const Var& bias) {
    if (bias.defined()) return {x, w, bias};
    return {x, w};
}

}  // namespace

Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dOptions& opt) {
    if (x.ndim() != 3 || w.ndim() != 3) throw std::invalid_argument("conv1d expects (B,C,T) input and (O,C,K) weight");
    const std::int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
    const std::int64_t cout = w.dim(0);
    const int kernel = static_cast<int>(w.dim(2));
    if (w.dim(1) != cin)
        throw std::invalid_argument("conv1d: input channels " + std::to_string(cin) + " vs weight " +
                                    shape_str(w.shape()));
    if (opt.stride < 1 || opt.dilation < 1) throw std::invalid_argument("conv1d: stride and dilation must be >= 1");
    const std::int64_t span = static_cast<std::int64_t>(opt.dilation) * (kernel - 1) + 1;
    const std::int64_t padded = len + opt.pad_left + opt.pad_right;
    const std::int64_t out_len = padded >= span ? (padded - span) / opt.stride + 1 : 0;
    const std::int64_t rows = cin * kernel;

    std::vector<double> col(static_cast<std::size_t>(batch * rows * out_len));
    std::vector<double> out(static_cast<std::size_t>(batch * cout * out_len));
    CMapMat wm(w.values().data(), cout, rows);
    for (std::int64_t b = 0; b < batch; ++b) {
        double* cb = col.data() + b * rows * out_len;
        im2col_1d(x.values().data() + b * cin * len, cin, len, kernel, opt.stride, opt.dilation, opt.pad_left,
                  out_len, cb);
        MapMat(out.data() + b * cout * out_len, cout, out_len).noalias() = wm * CMapMat(cb, rows, out_len);
    }
    add_channel_bias(bias, batch, cout, out_len, out);

    return make_result(
        {batch, cout, out_len}, std::move(out), with_bias(x, w, bias),
        [=, col = std::move(col)](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            CMapMat wmat(pw.value.data(), cout, rows);
            std::vector<double> gcol;
            if (px.requires_grad) {
                px.ensure_grad();
                gcol.resize(static_cast<std::size_t>(rows * out_len));
            }
            if (pw.requires_grad) pw.ensure_grad();
            for (std::int64_t b = 0; b < batch; ++b) {
                CMapMat g(self.grad.data() + b * cout * out_len, cout, out_len);
                if (pw.requires_grad)
                    MapMat(pw.grad.data(), cout, rows).noalias() +=
                        g * CMapMat(col.data() + b * rows * out_len, rows, out_len).transpose();
                if (px.requires_grad) {
                    MapMat(gcol.data(), rows, out_len).noalias() = wmat.transpose() * g;
                    col2im_1d(gcol.data(), cin, len, kernel, opt.stride, opt.dilation, opt.pad_left, out_len,
                              px.grad.data() + b * cin * len);
                }
            }
            bias_backward(self, 2, batch, cout, out_len);
        });
}

Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, int stride, int crop_left, int crop_right) {
    if (x.ndim() != 3 || w.ndim() != 3)
        throw std::invalid_argument("conv_transpose1d expects (B,C,T) input and (Cin,Cout,K) weight");
    const std::int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
    if (w.dim(0) != cin) throw std::invalid_argument("conv_transpose1d: channel mismatch");
    const std::int64_t cout = w.dim(1);
    const int kernel = static_cast<int>(w.dim(2));
    const std::int64_t full = len > 0 ? (len - 1) * stride + kernel : 0;
    const std::int64_t out_len = full - crop_left - crop_right;
    if (out_len < 0) throw std::invalid_argument("conv_transpose1d: crop exceeds output length");
    const std::int64_t rows = cout * kernel;

    // Transposed convolution is the adjoint of a strided convolution whose
    // im2col reads out[co, t*stride + k - crop_left].
    std::vector<double> out(static_cast<std::size_t>(batch * cout * out_len), 0.0);
    std::vector<double> cols(static_cast<std::size_t>(rows * len));
    CMapMat wm(w.values().data(), cin, rows);
    for (std::int64_t b = 0; b < batch; ++b) {
        MapMat(cols.data(), rows, len).noalias() =
            wm.transpose() * CMapMat(x.values().data() + b * cin * len, cin, len);
        col2im_1d(cols.data(), cout, out_len, kernel, stride, 1, crop_left, len, out.data() + b * cout * out_len);
    }
    add_channel_bias(bias, batch, cout, out_len, out);

    return make_result({batch, cout, out_len}, std::move(out), with_bias(x, w, bias), [=](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        std::vector<double> gcols(static_cast<std::size_t>(rows * len));
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        CMapMat wmat(pw.value.data(), cin, rows);
        for (std::int64_t b = 0; b < batch; ++b) {
            im2col_1d(self.grad.data() + b * cout * out_len, cout, out_len, kernel, stride, 1, crop_left, len,
                      gcols.data());
            CMapMat gc(gcols.data(), rows, len);
            if (pw.requires_grad)
                MapMat(pw.grad.data(), cin, rows).noalias() +=
                    CMapMat(px.value.data() + b * cin * len, cin, len) * gc.transpose();
            if (px.requires_grad) MapMat(px.grad.data() + b * cin * len, cin, len).noalias() += wmat * gc;
        }
        bias_backward(self, 2, batch, cout, out_len);
    });
}

namespace {

struct Geometry2d {
    std::int64_t cin, h, w, kh, kw, oh, ow;
    Conv2dOptions opt;
};

void im2col_2d(const double* x, const Geometry2d& g, double* col) {
    const std::int64_t plane = g.oh * g.ow;
    for (std::int64_t c = 0; c < g.cin; ++c)
        for (std::int64_t i = 0; i < g.kh; ++i)
            for (std::int64_t j = 0; j < g.kw; ++j) {
                double* row = col + ((c * g.kh + i) * g.kw + j) * plane;
                const double* xc = x + c * g.h * g.w;
                for (std::int64_t y = 0; y < g.oh; ++y) {
                    const std::int64_t sy = y * g.opt.stride_h + i * g.opt.dilation_h - g.opt.pad_h;
                    double* r = row + y * g.ow;
                    if (sy < 0 || sy >= g.h) {
                        std::fill_n(r, g.ow, 0.0);
                        continue;
                    }
                    for (std::int64_t xo = 0; xo < g.ow; ++xo) {
                        const std::int64_t sx = xo * g.opt.stride_w + j * g.opt.dilation_w - g.opt.pad_w;
                        r[xo] = (sx >= 0 && sx < g.w) ? xc[sy * g.w + sx] : 0.0;
                    }
                }
            }
}

void col2im_2d(const double* col, const Geometry2d& g, double* x) {
    const std::int64_t plane = g.oh * g.ow;
    for (std::int64_t c = 0; c < g.cin; ++c)
        for (std::int64_t i = 0; i < g.kh; ++i)
            for (std::int64_t j = 0; j < g.kw; ++j) {
                const double* row = col + ((c * g.kh + i) * g.kw + j) * plane;
                double* xc = x + c * g.h * g.w;
                for (std::int64_t y = 0; y < g.oh; ++y) {
                    const std::int64_t sy = y * g.opt.stride_h + i * g.opt.dilation_h - g.opt.pad_h;
                    if (sy < 0 || sy >= g.h) continue;
                    const double* r = row + y * g.ow;
                    for (std::int64_t xo = 0; xo < g.ow; ++xo) {
                        const std::int64_t sx = xo * g.opt.stride_w + j * g.opt.dilation_w - g.opt.pad_w;
                        if (sx >= 0 && sx < g.w) xc[sy * g.w + sx] += r[xo];
                    }
                }
            }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, const Conv2dOptions& opt) {
    if (x.ndim() != 4 || w.ndim() != 4) throw std::invalid_argument("conv2d expects 4-D input and weight");
    Geometry2d g{};
    g.opt = opt;
    const std::int64_t batch = x.dim(0);
    g.cin = x.dim(1);
    g.h = x.dim(2);
    g.w = x.dim(3);
    const std::int64_t cout = w.dim(0);
    if (w.dim(1) != g.cin) throw std::invalid_argument("conv2d: channel mismatch");
    g.kh = w.dim(2);
    g.kw = w.dim(3);
    const std::int64_t span_h = opt.dilation_h * (g.kh - 1) + 1;
    const std::int64_t span_w = opt.dilation_w * (g.kw - 1) + 1;
    const std::int64_t ph = g.h + 2 * opt.pad_h, pw = g.w + 2 * opt.pad_w;
    g.oh = ph >= span_h ? (ph - span_h) / opt.stride_h + 1 : 0;
    g.ow = pw >= span_w ? (pw - span_w) / opt.stride_w + 1 : 0;
    const std::int64_t rows = g.cin * g.kh * g.kw;
    const std::int64_t plane = g.oh * g.ow;

    std::vector<double> col(static_cast<std::size_t>(batch * rows * plane));
    std::vector<double> out(static_cast<std::size_t>(batch * cout * plane));
    CMapMat wm(w.values().data(), cout, rows);
    for (std::int64_t b = 0; b < batch; ++b) {
        double* cb = col.data() + b * rows * plane;
        im2col_2d(x.values().data() + b * g.cin * g.h * g.w, g, cb);
        MapMat(out.data() + b * cout * plane, cout, plane).noalias() = wm * CMapMat(cb, rows, plane);
    }
    add_channel_bias(bias, batch, cout, plane, out);

    return make_result(
        {batch, cout, g.oh, g.ow}, std::move(out), with_bias(x, w, bias),
        [=, col = std::move(col)](Node& self) {
            Node& px = *self.parents[0];
            Node& pwn = *self.parents[1];
            CMapMat wmat(pwn.value.data(), cout, rows);
            std::vector<double> gcol;
            if (px.requires_grad) {
                px.ensure_grad();
                gcol.resize(static_cast<std::size_t>(rows * plane));
            }
            if (pwn.requires_grad) pwn.ensure_grad();
            for (std::int64_t b = 0; b < batch; ++b) {
                CMapMat gm(self.grad.data() + b * cout * plane, cout, plane);
                if (pwn.requires_grad)
                    MapMat(pwn.grad.data(), cout, rows).noalias() +=
                        gm * CMapMat(col.data() + b * rows * plane, rows, plane).transpose();
                if (px.requires_grad) {
                    MapMat(gcol.data(), rows, plane).noalias() = wmat.transpose() * gm;
                    col2im_2d(gcol.data(), g, px.grad.data() + b * g.cin * g.h * g.w);
                }
            }
            bias_backward(self, 2, batch, cout, plane);
        });
}

}  // namespace dscodec::ad
