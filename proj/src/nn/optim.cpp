#include "sitsgraph/nn/optim.hpp"

#include <cmath>

namespace sitsgraph::nn {

template <class T>
Adam<T>::Adam(ParamList<T> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, p] : params_) {
        m_.push_back(Mat<T>::Zero(p->rows(), p->cols()));
        v_.push_back(Mat<T>::Zero(p->rows(), p->cols()));
    }
}

template <class T>
void Adam<T>::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i].second;
        auto& m = m_[i];
        auto& v = v_[i];
        m *= T(beta1_);
        v *= T(beta2_);
        if (p.grad.size() != 0) {
            m += T(1.0 - beta1_) * p.grad;
            v += T(1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        }
        if (lr_ == 0.0) continue;
        const T step = T(lr_ / bc1);
        const T sq = T(1.0 / std::sqrt(bc2));
        p.value.array() -= step * m.array() / ((v.array().sqrt() * sq) + T(eps_));
    }
}

template <class T>
void Adam<T>::zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
}

double PlateauScheduler::step(double loss, double lr) {
    if (!seen_ || loss < best_) {
        best_ = loss;
        seen_ = true;
        bad_ = 0;
        return lr;
    }
    if (++bad_ >= patience_) {
        bad_ = 0;
        return lr * factor_;
    }
    return lr;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sitsgraph::nn
