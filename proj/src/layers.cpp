#include "bnad/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace bnad::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Dims4 {
    int n, c, h, w;
};

template <typename T>
Dims4 dims4(const BasicTensor<T>& t, const char* what) {
    require_rank(t, 4, what);
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

template <typename T>
void im2col(const T* image, int channels, int height, int width, int kh, int kw, ConvGeometry g,
            int out_h, int out_w, T* cols) {
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                T* row = cols + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        const bool inside = iy >= 0 && iy < height && ix >= 0 && ix < width;
                        row[static_cast<std::size_t>(oy) * out_w + ox] =
                            inside ? image[(static_cast<std::size_t>(c) * height + iy) * width + ix] : T(0);
                    }
                }
            }
}

template <typename T>
void col2im(const T* cols, int channels, int height, int width, int kh, int kw, ConvGeometry g,
            int out_h, int out_w, T* image) {
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const T* row = cols + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= height) continue;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix < 0 || ix >= width) continue;
                        image[(static_cast<std::size_t>(c) * height + iy) * width + ix] +=
                            row[static_cast<std::size_t>(oy) * out_w + ox];
                    }
                }
            }
}

}  // namespace

template <typename T>
void BasicBnState<T>::validate() const {
    const std::size_t n = mean.size();
    if (var.size() != n || gamma.size() != n || beta.size() != n)
        throw NumericsError("batchnorm: mean/var/gamma/beta lengths differ");
    if (!(eps > 0.0)) throw NumericsError("batchnorm: eps must be positive");
    for (T v : var)
        if (!(v >= T(0))) throw NumericsError("batchnorm: negative or non-finite variance");
}

// ---- dense -----------------------------------------------------------------

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    const int n = input.dim(0), in = input.dim(1), out = weight.dim(0);
    if (weight.dim(1) != in)
        throw NumericsError("dense: input width " + std::to_string(in) + " vs weight " +
                            shape_string(weight.shape));
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out))
        throw NumericsError("dense: bias length mismatch");

    BasicTensor<T> y({n, out});
    MatMap<T> ym(y.data.data(), n, out);
    ConstMatMap<T> xm(input.data.data(), n, in);
    ConstMatMap<T> wm(weight.data.data(), out, in);
    ym.noalias() = xm * wm.transpose();
    if (!bias.empty())
        for (int r = 0; r < n; ++r)
            for (int j = 0; j < out; ++j) ym(r, j) += bias[static_cast<std::size_t>(j)];
    return y;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_output, bool need_input_grad) {
    const int n = input.dim(0), in = input.dim(1), out = weight.dim(0);
    const int dims[] = {n, out};
    require_shape(grad_output, dims, "dense grad_output");

    DenseGrads<T> g;
    ConstMatMap<T> dy(grad_output.data.data(), n, out);
    ConstMatMap<T> xm(input.data.data(), n, in);
    ConstMatMap<T> wm(weight.data.data(), out, in);

    g.weight = BasicTensor<T>({out, in});
    MatMap<T>(g.weight.data.data(), out, in).noalias() = dy.transpose() * xm;

    g.bias = BasicTensor<T>({out});
    for (int j = 0; j < out; ++j) {
        double acc = 0.0;
        for (int r = 0; r < n; ++r) acc += static_cast<double>(dy(r, j));
        g.bias[static_cast<std::size_t>(j)] = static_cast<T>(acc);
    }
    if (need_input_grad) {
        g.input = BasicTensor<T>({n, in});
        MatMap<T>(g.input.data.data(), n, in).noalias() = dy * wm;
    }
    return g;
}

// ---- convolution -----------------------------------------------------------

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias, ConvGeometry geom) {
    const auto [n, c, h, w] = dims4(input, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    const int oc = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != c) throw NumericsError("conv2d: kernel channels do not match input");
    if (geom.stride < 1 || geom.pad < 0) throw NumericsError("conv2d: invalid stride/pad");
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(oc))
        throw NumericsError("conv2d: bias length mismatch");
    const int oh = conv_output_size(h, kh, geom.stride, geom.pad);
    const int ow = conv_output_size(w, kw, geom.stride, geom.pad);
    if (oh < 1 || ow < 1) throw NumericsError("conv2d: kernel larger than padded input");

    const int patch = c * kh * kw;
    const int plane = oh * ow;
    BasicTensor<T> y({n, oc, oh, ow});
    std::vector<T> cols(static_cast<std::size_t>(patch) * plane);
    ConstMatMap<T> km(kernel.data.data(), oc, patch);
    for (int i = 0; i < n; ++i) {
        im2col(input.data.data() + static_cast<std::size_t>(i) * c * h * w, c, h, w, kh, kw, geom, oh, ow,
               cols.data());
        MatMap<T> ym(y.data.data() + static_cast<std::size_t>(i) * oc * plane, oc, plane);
        ym.noalias() = km * ConstMatMap<T>(cols.data(), patch, plane);
        if (!bias.empty())
            for (int o = 0; o < oc; ++o) ym.row(o).array() += bias[static_cast<std::size_t>(o)];
    }
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                             const BasicTensor<T>& grad_output, ConvGeometry geom, bool has_bias,
                             bool need_input_grad) {
    const auto [n, c, h, w] = dims4(input, "conv2d input");
    const int oc = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int oh = conv_output_size(h, kh, geom.stride, geom.pad);
    const int ow = conv_output_size(w, kw, geom.stride, geom.pad);
    const int dims[] = {n, oc, oh, ow};
    require_shape(grad_output, dims, "conv2d grad_output");

    const int patch = c * kh * kw;
    const int plane = oh * ow;
    ConvGrads<T> g;
    g.kernel = BasicTensor<T>(kernel.shape);
    if (need_input_grad) g.input = BasicTensor<T>(input.shape);
    MatMap<T> dk(g.kernel.data.data(), oc, patch);
    ConstMatMap<T> km(kernel.data.data(), oc, patch);
    std::vector<T> cols(static_cast<std::size_t>(patch) * plane);
    std::vector<T> dcols(need_input_grad ? cols.size() : 0);

    for (int i = 0; i < n; ++i) {
        im2col(input.data.data() + static_cast<std::size_t>(i) * c * h * w, c, h, w, kh, kw, geom, oh, ow,
               cols.data());
        ConstMatMap<T> dy(grad_output.data.data() + static_cast<std::size_t>(i) * oc * plane, oc, plane);
        dk.noalias() += dy * ConstMatMap<T>(cols.data(), patch, plane).transpose();
        if (need_input_grad) {
            MatMap<T>(dcols.data(), patch, plane).noalias() = km.transpose() * dy;
            col2im(dcols.data(), c, h, w, kh, kw, geom, oh, ow,
                   g.input.data.data() + static_cast<std::size_t>(i) * c * h * w);
        }
    }
    if (has_bias) {
        g.bias = BasicTensor<T>({oc});
        for (int o = 0; o < oc; ++o) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const T* p = grad_output.data.data() + (static_cast<std::size_t>(i) * oc + o) * plane;
                for (int k = 0; k < plane; ++k) acc += static_cast<double>(p[k]);
            }
            g.bias[static_cast<std::size_t>(o)] = static_cast<T>(acc);
        }
    }
    return g;
}

// ---- pooling ---------------------------------------------------------------

template <typename T>
MaxPoolResult<T> maxpool2d_forward(const BasicTensor<T>& input, int kernel, int stride) {
    const auto [n, c, h, w] = dims4(input, "maxpool input");
    if (kernel < 1 || stride < 1) throw NumericsError("maxpool: invalid kernel/stride");
    const int oh = conv_output_size(h, kernel, stride, 0);
    const int ow = conv_output_size(w, kernel, stride, 0);
    if (oh < 1 || ow < 1) throw NumericsError("maxpool: kernel larger than input");
    MaxPoolResult<T> r;
    r.output = BasicTensor<T>({n, c, oh, ow});
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (int p = 0; p < n * c; ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * h * w;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox, ++o) {
                std::size_t best = base + static_cast<std::size_t>(oy * stride) * w + ox * stride;
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx) {
                        const std::size_t idx =
                            base + static_cast<std::size_t>(oy * stride + ky) * w + (ox * stride + kx);
                        if (input.data[idx] > input.data[best]) best = idx;
                    }
                r.output.data[o] = input.data[best];
                r.argmax[o] = best;
            }
    }
    return r;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(std::span<const int> input_shape, std::span<const std::size_t> argmax,
                                  const BasicTensor<T>& grad_output) {
    if (argmax.size() != grad_output.size()) throw NumericsError("maxpool backward: argmax size mismatch");
    BasicTensor<T> dx(std::vector<int>(input_shape.begin(), input_shape.end()));
    for (std::size_t i = 0; i < argmax.size(); ++i) dx.data[argmax[i]] += grad_output.data[i];
    return dx;
}

template <typename T>
BasicTensor<T> avgpool2d_forward(const BasicTensor<T>& input, int kernel, int stride) {
    if (input.rank() != 3 && input.rank() != 4) throw NumericsError("avgpool: expected C×H×W or N×C×H×W");
    if (kernel < 1 || stride < 1) throw NumericsError("avgpool: invalid kernel/stride");
    const int r = input.rank();
    const int h = input.dim(r - 2), w = input.dim(r - 1);
    const int oh = conv_output_size(h, kernel, stride, 0);
    const int ow = conv_output_size(w, kernel, stride, 0);
    if (oh < 1 || ow < 1) throw NumericsError("avgpool: kernel larger than input");
    std::vector<int> out_shape = input.shape;
    out_shape[r - 2] = oh;
    out_shape[r - 1] = ow;
    BasicTensor<T> y(out_shape);
    const std::size_t planes = input.size() / (static_cast<std::size_t>(h) * w);
    const double inv = 1.0 / (kernel * kernel);
    std::size_t o = 0;
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = input.data.data() + p * h * w;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox, ++o) {
                double acc = 0.0;
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx)
                        acc += static_cast<double>(src[static_cast<std::size_t>(oy * stride + ky) * w + ox * stride + kx]);
                y.data[o] = static_cast<T>(acc * inv);
            }
    }
    return y;
}

template <typename T>
BasicTensor<T> avgpool2d_backward(std::span<const int> input_shape, const BasicTensor<T>& grad_output,
                                  int kernel, int stride) {
    BasicTensor<T> dx(std::vector<int>(input_shape.begin(), input_shape.end()));
    const int r = dx.rank();
    const int h = dx.dim(r - 2), w = dx.dim(r - 1);
    const int oh = grad_output.dim(r - 2), ow = grad_output.dim(r - 1);
    const std::size_t planes = dx.size() / (static_cast<std::size_t>(h) * w);
    const T inv = static_cast<T>(1.0 / (kernel * kernel));
    std::size_t o = 0;
    for (std::size_t p = 0; p < planes; ++p) {
        T* dst = dx.data.data() + p * h * w;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox, ++o)
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx)
                        dst[static_cast<std::size_t>(oy * stride + ky) * w + ox * stride + kx] +=
                            grad_output.data[o] * inv;
    }
    return dx;
}

template <typename T>
BasicTensor<T> global_avgpool_forward(const BasicTensor<T>& input) {
    const auto [n, c, h, w] = dims4(input, "global avgpool input");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    BasicTensor<T> y({n, c});
    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < plane; ++k) acc += static_cast<double>(input.data[p * plane + k]);
        y.data[p] = static_cast<T>(acc / static_cast<double>(plane));
    }
    return y;
}

template <typename T>
BasicTensor<T> global_avgpool_backward(std::span<const int> input_shape, const BasicTensor<T>& grad_output) {
    BasicTensor<T> dx(std::vector<int>(input_shape.begin(), input_shape.end()));
    const std::size_t plane = static_cast<std::size_t>(dx.dim(2)) * dx.dim(3);
    const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
    for (std::size_t p = 0; p < grad_output.size(); ++p)
        for (std::size_t k = 0; k < plane; ++k) dx.data[p * plane + k] = grad_output.data[p] * inv;
    return dx;
}

// ---- activation ------------------------------------------------------------

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    BasicTensor<T> y = input;
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
    if (input.shape != grad_output.shape) throw NumericsError("relu backward: shape mismatch");
    BasicTensor<T> dx = grad_output;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(input.data[i] > T(0))) dx.data[i] = T(0);
    return dx;
}

// ---- batch normalization ---------------------------------------------------

template <typename T>
BnForward<T> batchnorm_forward(const BasicTensor<T>& input, const BasicBnState<T>& state, BnMode mode) {
    const auto [n, c, h, w] = dims4(input, "batchnorm input");
    state.validate();
    if (state.channels() != c)
        throw NumericsError("batchnorm: state has " + std::to_string(state.channels()) +
                            " channels, input has " + std::to_string(c));
    if (mode == BnMode::train && n < 2) throw NumericsError("batchnorm: train mode needs a batch of at least 2");

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double count = static_cast<double>(n) * static_cast<double>(plane);
    BnForward<T> f;
    f.mode = mode;
    f.output = BasicTensor<T>(input.shape);
    f.normalized = BasicTensor<T>(input.shape);
    f.inv_std.resize(static_cast<std::size_t>(c));

    std::vector<double> mean(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
    if (mode == BnMode::train) {
        for (int ch = 0; ch < c; ++ch) {
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                const T* p = input.data.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t k = 0; k < plane; ++k) sum += static_cast<double>(p[k]);
            }
            const double mu = sum / count;
            double sq = 0.0;
            for (int i = 0; i < n; ++i) {
                const T* p = input.data.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t k = 0; k < plane; ++k) {
                    const double d = static_cast<double>(p[k]) - mu;
                    sq += d * d;
                }
            }
            mean[static_cast<std::size_t>(ch)] = mu;
            var[static_cast<std::size_t>(ch)] = sq / count;
        }
        f.batch_mean = mean;
        f.batch_var = var;
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = static_cast<double>(state.mean[static_cast<std::size_t>(ch)]);
            var[static_cast<std::size_t>(ch)] = static_cast<double>(state.var[static_cast<std::size_t>(ch)]);
        }
    }

    for (int ch = 0; ch < c; ++ch) {
        const std::size_t cu = static_cast<std::size_t>(ch);
        f.inv_std[cu] = 1.0 / std::sqrt(var[cu] + state.eps);
        const T mu = static_cast<T>(mean[cu]);
        const T inv = static_cast<T>(f.inv_std[cu]);
        const T gamma = state.gamma[cu];
        const T beta = state.beta[cu];
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + cu) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const T xh = (input.data[off + k] - mu) * inv;
                f.normalized.data[off + k] = xh;
                f.output.data[off + k] = gamma * xh + beta;
            }
        }
    }
    return f;
}

template <typename T>
BnGrads<T> batchnorm_backward(const BnForward<T>& fwd, std::span<const T> gamma, const BasicTensor<T>& grad_output) {
    if (grad_output.shape != fwd.normalized.shape) throw NumericsError("batchnorm backward: shape mismatch");
    const int n = grad_output.dim(0), c = grad_output.dim(1);
    const std::size_t plane = static_cast<std::size_t>(grad_output.dim(2)) * grad_output.dim(3);
    const double count = static_cast<double>(n) * static_cast<double>(plane);

    BnGrads<T> g;
    g.input = BasicTensor<T>(grad_output.shape);
    g.gamma.assign(static_cast<std::size_t>(c), T(0));
    g.beta.assign(static_cast<std::size_t>(c), T(0));
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t cu = static_cast<std::size_t>(ch);
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + cu) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const double dy = static_cast<double>(grad_output.data[off + k]);
                sum_dy += dy;
                sum_dy_xh += dy * static_cast<double>(fwd.normalized.data[off + k]);
            }
        }
        g.gamma[cu] = static_cast<T>(sum_dy_xh);
        g.beta[cu] = static_cast<T>(sum_dy);
        const double scale = static_cast<double>(gamma[cu]) * fwd.inv_std[cu];
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + cu) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const double dy = static_cast<double>(grad_output.data[off + k]);
                double dx;
                if (fwd.mode == BnMode::train) {
                    const double xh = static_cast<double>(fwd.normalized.data[off + k]);
                    dx = scale * (dy - sum_dy / count - xh * sum_dy_xh / count);
                } else {
                    dx = scale * dy;
                }
                g.input.data[off + k] = static_cast<T>(dx);
            }
        }
    }
    return g;
}

// ---- loss ------------------------------------------------------------------

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
    std::vector<double> p(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : logits) mx = std::max(mx, static_cast<double>(v));
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

template <typename T>
XentResult<T> softmax_xent(const BasicTensor<T>& logits, std::span<const int> labels) {
    require_rank(logits, 2, "softmax_xent logits");
    const int n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != static_cast<std::size_t>(n)) throw NumericsError("softmax_xent: label count mismatch");
    XentResult<T> r;
    r.grad = BasicTensor<T>(logits.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= k)
            throw NumericsError("softmax_xent: label " + std::to_string(label) + " outside [0," +
                                std::to_string(k) + ")");
        const auto row = std::span<const T>(logits.data).subspan(static_cast<std::size_t>(i) * k, k);
        double mx = -std::numeric_limits<double>::infinity();
        for (T v : row) mx = std::max(mx, static_cast<double>(v));
        double z = 0.0;
        for (T v : row) z += std::exp(static_cast<double>(v) - mx);
        const double log_z = mx + std::log(z);
        total += log_z - static_cast<double>(row[static_cast<std::size_t>(label)]);
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(row[static_cast<std::size_t>(j)]) - log_z);
            r.grad.data[static_cast<std::size_t>(i) * k + j] =
                static_cast<T>((p - (j == label ? 1.0 : 0.0)) / n);
        }
    }
    r.loss = total / n;
    return r;
}

// ---- optimizer -------------------------------------------------------------

void sgd_step(std::span<float> param, std::span<const float> grad, std::span<float> velocity,
              const SgdConfig& cfg) {
    if (param.size() != grad.size() || param.size() != velocity.size())
        throw NumericsError("sgd_step: parameter/gradient/velocity sizes differ");
    if (!(cfg.lr > 0.0)) throw NumericsError("sgd_step: learning rate must be positive");
    const float lr = static_cast<float>(cfg.lr);
    const float mu = static_cast<float>(cfg.momentum);
    const float wd = static_cast<float>(cfg.weight_decay);
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = mu * velocity[i] + (grad[i] + wd * param[i]);
        param[i] -= lr * velocity[i];
    }
}

// ---- instantiations --------------------------------------------------------

#define BNAD_INSTANTIATE(T)                                                                                   \
    template struct BasicBnState<T>;                                                                          \
    template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                          bool);                                                              \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                           ConvGeometry);                                                     \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                          ConvGeometry, bool, bool);                                          \
    template MaxPoolResult<T> maxpool2d_forward(const BasicTensor<T>&, int, int);                             \
    template BasicTensor<T> maxpool2d_backward(std::span<const int>, std::span<const std::size_t>,            \
                                               const BasicTensor<T>&);                                        \
    template BasicTensor<T> avgpool2d_forward(const BasicTensor<T>&, int, int);                               \
    template BasicTensor<T> avgpool2d_backward(std::span<const int>, const BasicTensor<T>&, int, int);        \
    template BasicTensor<T> global_avgpool_forward(const BasicTensor<T>&);                                    \
    template BasicTensor<T> global_avgpool_backward(std::span<const int>, const BasicTensor<T>&);             \
    template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                              \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template BnForward<T> batchnorm_forward(const BasicTensor<T>&, const BasicBnState<T>&, BnMode);           \
    template BnGrads<T> batchnorm_backward(const BnForward<T>&, std::span<const T>, const BasicTensor<T>&);   \
    template XentResult<T> softmax_xent(const BasicTensor<T>&, std::span<const int>);                         \
    template std::vector<double> softmax(std::span<const T>);

BNAD_INSTANTIATE(float)
BNAD_INSTANTIATE(double)

#undef BNAD_INSTANTIATE

}  // namespace bnad::nn
