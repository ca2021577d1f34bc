#include "mrtcn/parameter.hpp"

#include "mrtcn/error.hpp"

#include <cmath>

namespace mrtcn {

void adam_step(std::span<Parameter* const> params, const AdamConfig& config) {
    for (Parameter* p : params) {
        expect_shape(p->grad, p->value.shape(), "adam_step gradient");
        p->step_count += 1;
        const double t = static_cast<double>(p->step_count);
        const double bias1 = 1.0 - std::pow(config.beta1, t);
        const double bias2 = 1.0 - std::pow(config.beta2, t);
        double* value = p->value.data();
        double* grad = p->grad.data();
        double* m = p->adam_m.data();
        double* v = p->adam_v.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = grad[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
            grad[i] = 0.0;
        }
    }
}

}  // namespace mrtcn
