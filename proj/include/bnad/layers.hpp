#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bnad/tensor.hpp"

// Hand-written forward/backward kernels. Every kernel is a template over the
// scalar type and instantiated for float (training, inference) and double
// (finite-difference gradient checks). Batched inputs are N×C×H×W.
namespace bnad::nn {

// ---- dense -----------------------------------------------------------------

/// y = x·Wᵀ + b with x: N×in, W: out×in, b: out (b may be empty).
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_output, bool need_input_grad = true);

// ---- convolution -----------------------------------------------------------

struct ConvGeometry {
    int stride = 1;
    int pad = 0;
};

inline int conv_output_size(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

/// kernel: O×C×kh×kw, bias: O or empty. Zero padding.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias, ConvGeometry geom);

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> kernel;
    BasicTensor<T> bias;  // empty when the layer has no bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                             const BasicTensor<T>& grad_output, ConvGeometry geom, bool has_bias,
                             bool need_input_grad = true);

// ---- pooling ---------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
    BasicTensor<T> output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool2d_forward(const BasicTensor<T>& input, int kernel, int stride);

template <typename T>
BasicTensor<T> maxpool2d_backward(std::span<const int> input_shape,
                                  std::span<const std::size_t> argmax,
                                  const BasicTensor<T>& grad_output);

/// Accepts C×H×W (single image) or N×C×H×W.
template <typename T>
BasicTensor<T> avgpool2d_forward(const BasicTensor<T>& input, int kernel, int stride);

template <typename T>
BasicTensor<T> avgpool2d_backward(std::span<const int> input_shape, const BasicTensor<T>& grad_output,
                                  int kernel, int stride);

/// N×C×H×W → N×C.
template <typename T>
BasicTensor<T> global_avgpool_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avgpool_backward(std::span<const int> input_shape, const BasicTensor<T>& grad_output);

// ---- activation ------------------------------------------------------------

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

// ---- batch normalization ---------------------------------------------------

enum class BnMode { train, eval };

/// Running statistics plus affine parameters of one BN layer.
template <typename T>
struct BasicBnState {
    std::vector<T> mean;
    std::vector<T> var;
    std::vector<T> gamma;
    std::vector<T> beta;
    double eps = 1e-5;

    static BasicBnState identity(int channels) {
        BasicBnState s;
        s.mean.assign(static_cast<std::size_t>(channels), T(0));
        s.var.assign(static_cast<std::size_t>(channels), T(1));
        s.gamma.assign(static_cast<std::size_t>(channels), T(1));
        s.beta.assign(static_cast<std::size_t>(channels), T(0));
        return s;
    }

    int channels() const { return static_cast<int>(mean.size()); }

    /// Throws NumericsError unless the four vectors agree, var ≥ 0 and eps > 0.
    void validate() const;

    bool operator==(const BasicBnState&) const = default;
};

using BnLayerState = BasicBnState<float>;

template <typename T>
struct BnForward {
    BnMode mode = BnMode::eval;
    BasicTensor<T> output;
    BasicTensor<T> normalized;       // x̂, kept for the backward pass
    std::vector<double> batch_mean;  // train mode only
    std::vector<double> batch_var;   // population variance, train mode only
    std::vector<double> inv_std;
};

/// Train mode normalizes with the current batch statistics (requires N ≥ 2)
/// and reports them; eval mode normalizes with state.mean / state.var.
template <typename T>
BnForward<T> batchnorm_forward(const BasicTensor<T>& input, const BasicBnState<T>& state, BnMode mode);

template <typename T>
struct BnGrads {
    BasicTensor<T> input;
    std::vector<T> gamma;
    std::vector<T> beta;
};

template <typename T>
BnGrads<T> batchnorm_backward(const BnForward<T>& forward, std::span<const T> gamma,
                              const BasicTensor<T>& grad_output);

// ---- loss ------------------------------------------------------------------

template <typename T>
struct XentResult {
    double loss = 0.0;          // mean over the batch
    BasicTensor<T> grad;        // d(mean loss)/d(logits) = (softmax − onehot) / N
};

template <typename T>
XentResult<T> softmax_xent(const BasicTensor<T>& logits, std::span<const int> labels);

/// Numerically stable softmax of one logit row.
template <typename T>
std::vector<double> softmax(std::span<const T> logits);

// ---- optimizer -------------------------------------------------------------

struct SgdConfig {
    double lr = 0.01;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

/// Classical momentum: v ← μ·v + (g + λ·p); p ← p − lr·v.
void sgd_step(std::span<float> param, std::span<const float> grad, std::span<float> velocity,
              const SgdConfig& cfg);

}  // namespace bnad::nn
