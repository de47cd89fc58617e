#pragma once

#include "facemotion/nn/layers.hpp"

namespace facemotion::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }

    void zero_grad(const ParamList& params) {
        for (Param* p : params) {
            p->grad.setZero();
        }
    }

    void step(const ParamList& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (Param* p : params) {
            p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
            p->adam_v = cfg_.beta2 * p->adam_v.array().matrix() +
                        (1.0 - cfg_.beta2) * p->grad.array().square().matrix();
            const Mat m_hat = p->adam_m / bc1;
            const Mat v_hat = p->adam_v / bc2;
            p->value.array() -= cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace facemotion::nn
