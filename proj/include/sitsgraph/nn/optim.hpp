#pragma once

#include "sitsgraph/nn/layers.hpp"

namespace sitsgraph::nn {

template <class T>
class Adam {
public:
    Adam(ParamList<T> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // Bias-corrected update from the accumulated grads; a parameter without
    // a grad is treated as having a zero grad.
    void step();
    void zero_grad();

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    long steps() const { return t_; }
    const ParamList<T>& params() const { return params_; }

private:
    ParamList<T> params_;
    std::vector<Mat<T>> m_;
    std::vector<Mat<T>> v_;
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
};

// Multiplies the learning rate by `factor` once the monitored loss has not
// improved for `patience` consecutive epochs, then starts counting again.
class PlateauScheduler {
public:
    explicit PlateauScheduler(int patience = 5, double factor = 0.1) : patience_(patience), factor_(factor) {}

    // Returns the learning rate to use next.
    double step(double loss, double lr);
    int bad_epochs() const { return bad_; }

private:
    int patience_;
    double factor_;
    double best_ = 0.0;
    bool seen_ = false;
    int bad_ = 0;
};

}  // namespace sitsgraph::nn
