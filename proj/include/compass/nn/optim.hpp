#pragma once

#include <vector>

#include "compass/nn/autograd.hpp"
#include "compass/nn/transformer.hpp"

namespace compass::nn {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled weight decay Adam. The learning rate is supplied per step so
// the caller owns the schedule.
class AdamW {
public:
    AdamW(std::vector<NamedParameter>& params, AdamWConfig config);

    void step(double lr);
    void zero_grad();
    long steps() const { return t_; }

private:
    std::vector<NamedParameter>* params_;
    AdamWConfig config_;
    std::vector<Mat> m_;
    std::vector<Mat> v_;
    long t_ = 0;
};

// Scales gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm);

// Linear decay from initial_lr at step 0 to 0 at total_steps, with an
// optional linear warmup.
double linear_schedule(double initial_lr, long step, long total_steps, long warmup_steps = 0);

}  // namespace compass::nn
