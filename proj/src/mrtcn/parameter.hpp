#pragma once

#include "mrtcn/tensor.hpp"

#include <cstdint>
#include <span>

namespace mrtcn {

/// Trainable tensor with its gradient and Adam moment estimates.
struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::uint64_t step_count = 0;

    Parameter() = default;
    explicit Parameter(Tensor initial)
        : value(std::move(initial)),
          grad(value.shape()),
          adam_m(value.shape()),
          adam_v(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update on every parameter, then zeroes the grads.
void adam_step(std::span<Parameter* const> params, const AdamConfig& config);

}  // namespace mrtcn
