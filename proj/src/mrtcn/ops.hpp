#pragma once

// Layer kernels with explicit forward and backward passes. Tensors are laid
// out [batch, channel, time] unless noted. Every reduction runs in a fixed
// sequential order, so outputs are bit-reproducible.

#include "mrtcn/parameter.hpp"
#include "mrtcn/tensor.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrtcn {

enum class Mode { Train, Eval };

struct Conv1dSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t padding = 0;

    /// Span of input frames covered by one kernel application, d*(k-1)+1.
    std::size_t extent() const { return dilation * (kernel - 1) + 1; }

    /// floor((L_in + 2p - d(k-1) - 1)/s) + 1. Throws "window too short for
    /// layer <name>" when that would be below one.
    std::size_t output_length(std::size_t input_length, std::string_view layer_name = {}) const;

    void validate() const;

    friend bool operator==(const Conv1dSpec&, const Conv1dSpec&) = default;
};

/// weight is [c_out, c_in, k]; bias is [c_out] or empty for no bias.
Tensor conv1d_forward(const Tensor& input, const Conv1dSpec& spec, const Tensor& weight, const Tensor& bias,
                      std::string_view layer_name = {});

struct Conv1dGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

Conv1dGrads conv1d_backward(const Tensor& input, const Conv1dSpec& spec, const Tensor& weight,
                            const Tensor& grad_out);

struct BatchNormState {
    Parameter gamma;
    Parameter beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels);

    std::size_t channels() const { return running_mean.size(); }
};

/// Values the backward pass needs from the forward pass.
struct BatchNormCache {
    Mode mode = Mode::Eval;
    Tensor normalized;            // x_hat, same shape as the input
    std::vector<double> inv_std;  // per channel
};

/// Train mode normalizes with batch statistics over (batch, time) and updates
/// the running statistics (unbiased variance); eval mode uses the running ones.
Tensor batchnorm1d_forward(const Tensor& input, BatchNormState& state, Mode mode, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

BatchNormGrads batchnorm1d_backward(const BatchNormCache& cache, const BatchNormState& state, const Tensor& grad_out);

Tensor relu_forward(const Tensor& input);
/// Subgradient at exactly zero is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& logits);

enum class LossNormalization {
    WeightedMean,  // divide by the sum of the weights of the targets present
    BatchMean,     // divide by the number of target positions
};

struct LossResult {
    double loss = 0.0;
    Tensor grad_logits;
    double weight_sum = 0.0;  // sum of weights of the targets present
};

/// Weighted softmax cross-entropy. logits is [..., c]; targets holds one class
/// index per row of logits. A zero total weight yields loss 0 and zero grads.
LossResult weighted_cross_entropy(const Tensor& logits, std::span<const int> targets,
                                  std::span<const double> class_weights,
                                  LossNormalization normalization = LossNormalization::WeightedMean);

}  // namespace mrtcn
