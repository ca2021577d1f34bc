#include "mrtcn/ops.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace mrtcn {

namespace {

std::string layer_label(std::string_view layer_name) {
    return layer_name.empty() ? std::string("<unnamed>") : std::string(layer_name);
}

void expect_rank3(const Tensor& t, const std::string& what) {
    if (t.rank() != 3) {
        fail(ErrorKind::InvalidArgument, what + ": expected a rank-3 [batch, channel, time] tensor, got " +
                                             shape_string(t.shape()));
    }
}

// im2col over the whole batch, laid out [R, N] with R = c_in * k and
// N = batch * l_out: entry (i * k + kk, b * l_out + j) holds the input value
// seen by output j of item b through tap kk of input channel i (zero in the
// padding).
std::vector<double> gather_columns(const Tensor& input, const Conv1dSpec& spec, std::size_t l_out) {
    const std::size_t batch = input.dim(0);
    const std::size_t c_in = spec.in_channels;
    const std::size_t k = spec.kernel;
    const std::size_t l_in = input.dim(2);
    const std::size_t n_cols = batch * l_out;
    std::vector<double> col(c_in * k * n_cols, 0.0);
    for (std::size_t i = 0; i < c_in; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            double* row = col.data() + (i * k + kk) * n_cols;
            for (std::size_t j = 0; j < l_out; ++j) {
                const long pos = static_cast<long>(j * spec.stride + kk * spec.dilation) -
                                 static_cast<long>(spec.padding);
                if (pos < 0 || pos >= static_cast<long>(l_in)) {
                    continue;
                }
                for (std::size_t b = 0; b < batch; ++b) {
                    row[b * l_out + j] = input[(b * c_in + i) * l_in + static_cast<std::size_t>(pos)];
                }
            }
        }
    }
    return col;
}

std::vector<double> transpose(const double* a, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    return t;
}

using f64x4 = double __attribute__((vector_size(32)));

// c[m, n] = sum_q a[m, q] * b[q, n] for row-major a [M, K] and b [K, N].
// Every entry is a plain multiply-then-add chain over ascending q, so the
// vector and scalar paths (and both clones) produce identical bits.
__attribute__((target_clones("avx2", "default")))
void matmul(const double* a, const double* b, double* c, std::size_t m_rows, std::size_t n_cols, std::size_t k) {
    std::size_t m = 0;
    for (; m + 4 <= m_rows; m += 4) {
        const double* a0 = a + m * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        std::size_t n = 0;
        for (; n + 8 <= n_cols; n += 8) {
            f64x4 s00{}, s01{}, s10{}, s11{}, s20{}, s21{}, s30{}, s31{};
            for (std::size_t q = 0; q < k; ++q) {
                f64x4 b0;
                f64x4 b1;
                std::memcpy(&b0, b + q * n_cols + n, sizeof b0);
                std::memcpy(&b1, b + q * n_cols + n + 4, sizeof b1);
                const double x0 = a0[q], x1 = a1[q], x2 = a2[q], x3 = a3[q];
                s00 += x0 * b0;
                s01 += x0 * b1;
                s10 += x1 * b0;
                s11 += x1 * b1;
                s20 += x2 * b0;
                s21 += x2 * b1;
                s30 += x3 * b0;
                s31 += x3 * b1;
            }
            double* c0 = c + m * n_cols + n;
            const f64x4* sums[8] = {&s00, &s01, &s10, &s11, &s20, &s21, &s30, &s31};
            for (std::size_t i = 0; i < 8; ++i) {
                std::memcpy(c0 + (i / 2) * n_cols + (i % 2) * 4, sums[i], sizeof s00);
            }
        }
        for (; n < n_cols; ++n) {
            for (std::size_t i = 0; i < 4; ++i) {
                const double* ai = a + (m + i) * k;
                double s = 0.0;
                for (std::size_t q = 0; q < k; ++q) {
                    s += ai[q] * b[q * n_cols + n];
                }
                c[(m + i) * n_cols + n] = s;
            }
        }
    }
    for (; m < m_rows; ++m) {
        const double* am = a + m * k;
        for (std::size_t n = 0; n < n_cols; ++n) {
            double s = 0.0;
            for (std::size_t q = 0; q < k; ++q) {
                s += am[q] * b[q * n_cols + n];
            }
            c[m * n_cols + n] = s;
        }
    }
}

}  // namespace

std::size_t Conv1dSpec::output_length(std::size_t input_length, std::string_view layer_name) const {
    validate();
    const long numerator = static_cast<long>(input_length) + 2 * static_cast<long>(padding) -
                           static_cast<long>(extent());
    if (numerator < 0) {
        fail(ErrorKind::InvalidArgument, "window too short for layer " + layer_label(layer_name) + ": input length " +
                                             std::to_string(input_length) + " with padding " +
                                             std::to_string(padding) + " is shorter than the kernel extent " +
                                             std::to_string(extent()));
    }
    return static_cast<std::size_t>(numerator) / stride + 1;
}

void Conv1dSpec::validate() const {
    require(in_channels >= 1 && out_channels >= 1, ErrorKind::InvalidArgument, "conv1d channels must be positive");
    require(kernel >= 1 && stride >= 1 && dilation >= 1, ErrorKind::InvalidArgument,
            "conv1d kernel, stride and dilation must be at least 1");
}

Tensor conv1d_forward(const Tensor& input, const Conv1dSpec& spec, const Tensor& weight, const Tensor& bias,
                      std::string_view layer_name) {
    expect_rank3(input, "conv1d input of layer " + layer_label(layer_name));
    if (input.dim(1) != spec.in_channels) {
        fail(ErrorKind::InvalidArgument, "conv1d layer " + layer_label(layer_name) + ": input has " +
                                             std::to_string(input.dim(1)) + " channels, layer expects " +
                                             std::to_string(spec.in_channels));
    }
    expect_shape(weight, {spec.out_channels, spec.in_channels, spec.kernel}, "conv1d weight");
    if (!bias.empty()) {
        expect_shape(bias, {spec.out_channels}, "conv1d bias");
    }
    const std::size_t batch = input.dim(0);
    const std::size_t l_out = spec.output_length(input.dim(2), layer_name);
    const std::size_t r = spec.in_channels * spec.kernel;

    const std::size_t c_out = spec.out_channels;
    const std::size_t n_cols = batch * l_out;

    const std::vector<double> col = gather_columns(input, spec, l_out);
    std::vector<double> y(c_out * n_cols);
    matmul(weight.data(), col.data(), y.data(), c_out, n_cols, r);
    Tensor out({batch, c_out, l_out});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < c_out; ++o) {
            const double b0 = bias.empty() ? 0.0 : bias[o];
            const double* src = y.data() + o * n_cols + b * l_out;
            double* dst = &out.at(b, o, 0);
            for (std::size_t j = 0; j < l_out; ++j) {
                dst[j] = b0 + src[j];
            }
        }
    }
    return out;
}

Conv1dGrads conv1d_backward(const Tensor& input, const Conv1dSpec& spec, const Tensor& weight,
                            const Tensor& grad_out) {
    expect_rank3(input, "conv1d_backward input");
    expect_shape(weight, {spec.out_channels, spec.in_channels, spec.kernel}, "conv1d_backward weight");
    const std::size_t batch = input.dim(0);
    const std::size_t l_in = input.dim(2);
    const std::size_t l_out = spec.output_length(l_in);
    expect_shape(grad_out, {batch, spec.out_channels, l_out}, "conv1d_backward grad_out");
    const std::size_t k = spec.kernel;
    const std::size_t r = spec.in_channels * k;

    const std::size_t c_out = spec.out_channels;
    const std::size_t n_cols = batch * l_out;

    Conv1dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({c_out})};
    // g[o, n] with n = b * l_out + j, matching the column layout.
    std::vector<double> g(c_out * n_cols);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < c_out; ++o) {
            const double* src = &grad_out.at(b, o, 0);
            std::copy(src, src + l_out, g.data() + o * n_cols + b * l_out);
        }
    }
    for (std::size_t o = 0; o < c_out; ++o) {
        double acc = 0.0;
        for (std::size_t n = 0; n < n_cols; ++n) {
            acc += g[o * n_cols + n];
        }
        grads.bias[o] = acc;
    }

    const std::vector<double> col = gather_columns(input, spec, l_out);
    const std::vector<double> col_t = transpose(col.data(), r, n_cols);
    matmul(g.data(), col_t.data(), grads.weight.data(), c_out, r, n_cols);

    // grad_col[q, n] = sum_o w[o, q] * g[o, n]
    const std::vector<double> w_t = transpose(weight.data(), c_out, r);
    std::vector<double> grad_col(r * n_cols);
    matmul(w_t.data(), g.data(), grad_col.data(), r, n_cols, c_out);

    for (std::size_t b = 0; b < batch; ++b) {
        double* gx = grads.input.data() + b * spec.in_channels * l_in;
        for (std::size_t j = 0; j < l_out; ++j) {
            const std::size_t n = b * l_out + j;
            for (std::size_t i = 0; i < spec.in_channels; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const long pos = static_cast<long>(j * spec.stride + kk * spec.dilation) -
                                     static_cast<long>(spec.padding);
                    if (pos >= 0 && pos < static_cast<long>(l_in)) {
                        gx[i * l_in + static_cast<std::size_t>(pos)] += grad_col[(i * k + kk) * n_cols + n];
                    }
                }
            }
        }
    }
    return grads;
}

BatchNormState::BatchNormState(std::size_t channels)
    : gamma(Tensor({channels}, 1.0)),
      beta(Tensor({channels}, 0.0)),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0) {}

Tensor batchnorm1d_forward(const Tensor& input, BatchNormState& state, Mode mode, BatchNormCache* cache) {
    expect_rank3(input, "batchnorm1d input");
    const std::size_t batch = input.dim(0);
    const std::size_t channels = input.dim(1);
    const std::size_t length = input.dim(2);
    if (channels != state.channels()) {
        fail(ErrorKind::InvalidArgument, "batchnorm1d: input has " + std::to_string(channels) +
                                             " channels, state has " + std::to_string(state.channels()));
    }
    const std::size_t n = batch * length;
    if (mode == Mode::Train && n < 2) {
        fail(ErrorKind::InvalidArgument,
             "batchnorm1d in train mode needs batch*length >= 2 to estimate a variance, got " + std::to_string(n));
    }

    Tensor out(input.shape());
    Tensor normalized(input.shape());
    std::vector<double> inv_std(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        double mean = 0.0;
        double var = 0.0;
        if (mode == Mode::Train) {
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < length; ++t) {
                    mean += input.at(b, ch, t);
                }
            }
            mean /= static_cast<double>(n);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < length; ++t) {
                    const double dlt = input.at(b, ch, t) - mean;
                    var += dlt * dlt;
                }
            }
            var /= static_cast<double>(n);
            const double unbiased = var * static_cast<double>(n) / static_cast<double>(n - 1);
            state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mean;
            state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
        } else {
            mean = state.running_mean[ch];
            var = state.running_var[ch];
        }
        inv_std[ch] = 1.0 / std::sqrt(var + state.epsilon);
        const double g = state.gamma.value[ch];
        const double bt = state.beta.value[ch];
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < length; ++t) {
                const double xh = (input.at(b, ch, t) - mean) * inv_std[ch];
                normalized.at(b, ch, t) = xh;
                out.at(b, ch, t) = g * xh + bt;
            }
        }
    }
    if (cache) {
        cache->mode = mode;
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

BatchNormGrads batchnorm1d_backward(const BatchNormCache& cache, const BatchNormState& state, const Tensor& grad_out) {
    expect_shape(grad_out, cache.normalized.shape(), "batchnorm1d_backward grad_out");
    const std::size_t batch = grad_out.dim(0);
    const std::size_t channels = grad_out.dim(1);
    const std::size_t length = grad_out.dim(2);
    const double n = static_cast<double>(batch * length);

    BatchNormGrads grads{Tensor(grad_out.shape()), Tensor({channels}), Tensor({channels})};
    for (std::size_t ch = 0; ch < channels; ++ch) {
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < length; ++t) {
                const double dy = grad_out.at(b, ch, t);
                sum_dy += dy;
                sum_dy_xh += dy * cache.normalized.at(b, ch, t);
            }
        }
        grads.beta[ch] = sum_dy;
        grads.gamma[ch] = sum_dy_xh;
        const double scale = state.gamma.value[ch] * cache.inv_std[ch];
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < length; ++t) {
                const double dy = grad_out.at(b, ch, t);
                if (cache.mode == Mode::Train) {
                    const double xh = cache.normalized.at(b, ch, t);
                    grads.input.at(b, ch, t) = scale * (dy - sum_dy / n - xh * sum_dy_xh / n);
                } else {
                    grads.input.at(b, ch, t) = scale * dy;
                }
            }
        }
    }
    return grads;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.values()) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    expect_shape(grad_out, input.shape(), "relu_backward grad_out");
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    }
    return grad;
}

Tensor softmax(const Tensor& logits) {
    require(logits.rank() >= 1, ErrorKind::InvalidArgument, "softmax needs at least one axis");
    const std::size_t c = logits.shape().back();
    const std::size_t rows = logits.size() / c;
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* z = logits.data() + r * c;
        double* p = out.data() + r * c;
        const double zmax = *std::max_element(z, z + c);
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            p[i] = std::exp(z[i] - zmax);
            total += p[i];
        }
        for (std::size_t i = 0; i < c; ++i) {
            p[i] /= total;
        }
    }
    return out;
}

LossResult weighted_cross_entropy(const Tensor& logits, std::span<const int> targets,
                                  std::span<const double> class_weights, LossNormalization normalization) {
    require(logits.rank() >= 1, ErrorKind::InvalidArgument, "cross entropy logits need a class axis");
    const std::size_t c = logits.shape().back();
    const std::size_t rows = logits.size() / c;
    require(targets.size() == rows, ErrorKind::InvalidArgument,
            "cross entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                " logit rows");
    require(class_weights.size() == c, ErrorKind::InvalidArgument,
            "cross entropy: " + std::to_string(class_weights.size()) + " class weights for " + std::to_string(c) +
                " classes");

    LossResult result{0.0, Tensor(logits.shape()), 0.0};
    for (std::size_t r = 0; r < rows; ++r) {
        const int y = targets[r];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            fail(ErrorKind::InvalidArgument, "cross entropy: target " + std::to_string(y) + " outside [0, " +
                                                 std::to_string(c) + ")");
        }
        result.weight_sum += class_weights[static_cast<std::size_t>(y)];
    }
    const double denom = normalization == LossNormalization::WeightedMean ? result.weight_sum
                                                                          : static_cast<double>(rows);
    if (result.weight_sum == 0.0 || denom == 0.0) {
        return result;
    }

    double total = 0.0;
    std::vector<double> prob(c);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* z = logits.data() + r * c;
        const double zmax = *std::max_element(z, z + c);
        double sum = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            prob[i] = std::exp(z[i] - zmax);
            sum += prob[i];
        }
        const auto y = static_cast<std::size_t>(targets[r]);
        const double w = class_weights[y];
        const double log_p = (z[y] - zmax) - std::log(sum);
        total += -w * log_p;
        double* g = result.grad_logits.data() + r * c;
        for (std::size_t i = 0; i < c; ++i) {
            const double p = prob[i] / sum;
            g[i] = w * (p - (i == y ? 1.0 : 0.0)) / denom;
        }
    }
    result.loss = total / denom;
    return result;
}

}  // namespace mrtcn
