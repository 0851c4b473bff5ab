#include "sitsgraph/nn/tensor.hpp"

#include "sitsgraph/error.hpp"

#include <cmath>
#include <string>

namespace sitsgraph::nn {

namespace {

template <class T>
void require_shape(bool ok, const char* op, const Mat<T>& a, const Mat<T>& b) {
    if (!ok) {
        throw Error(Errc::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                             std::to_string(b.cols()));
    }
}

template <class T>
Var<T> result(Mat<T> value, std::initializer_list<const Var<T>*> inputs) {
    bool rg = false;
    for (const auto* v : inputs) rg = rg || (*v)->requires_grad;
    return make_var<T>(std::move(value), rg);
}

template <class T>
bool wants(const Tape<T>& tp, const Var<T>& out) {
    return tp.recording() && out->requires_grad;
}

}  // namespace

template <class T>
void Node<T>::accumulate(const Mat<T>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

template <class T>
void Tape<T>::backward(const Var<T>& loss) {
    if (loss->value.size() != 1) throw Error(Errc::ShapeMismatch, "backward needs a 1x1 loss");
    loss->accumulate(Mat<T>::Ones(1, 1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <class T>
Var<T> matmul(Tape<T>& tp, const Var<T>& a, const Var<T>& b) {
    require_shape(a->cols() == b->rows(), "matmul", a->value, b->value);
    Mat<T> v = a->value * b->value;
    auto out = result<T>(std::move(v), {&a, &b});
    if (wants(tp, out)) {
        tp.record([a, b, out] {
            if (out->grad.size() == 0) return;
            if (a->requires_grad) a->accumulate(out->grad * b->value.transpose());
            if (b->requires_grad) b->accumulate(a->value.transpose() * out->grad);
        });
    }
    return out;
}

template <class T>
Var<T> add(Tape<T>& tp, const Var<T>& a, const Var<T>& b) {
    require_shape(a->rows() == b->rows() && a->cols() == b->cols(), "add", a->value, b->value);
    auto out = result<T>(a->value + b->value, {&a, &b});
    if (wants(tp, out)) {
        tp.record([a, b, out] {
            if (out->grad.size() == 0) return;
            a->accumulate(out->grad);
            b->accumulate(out->grad);
        });
    }
    return out;
}

template <class T>
Var<T> add_row(Tape<T>& tp, const Var<T>& x, const Var<T>& b) {
    require_shape(b->rows() == 1 && b->cols() == x->cols(), "add_row", x->value, b->value);
    Mat<T> v = x->value;
    v.rowwise() += b->value.row(0);
    auto out = result<T>(std::move(v), {&x, &b});
    if (wants(tp, out)) {
        tp.record([x, b, out] {
            if (out->grad.size() == 0) return;
            x->accumulate(out->grad);
            if (b->requires_grad) b->accumulate(out->grad.colwise().sum());
        });
    }
    return out;
}

template <class T>
Var<T> scale(Tape<T>& tp, const Var<T>& x, T s) {
    auto out = result<T>(x->value * s, {&x});
    if (wants(tp, out)) {
        tp.record([x, out, s] {
            if (out->grad.size() == 0) return;
            x->accumulate(out->grad * s);
        });
    }
    return out;
}

template <class T>
Var<T> relu(Tape<T>& tp, const Var<T>& x) {
    auto out = result<T>(x->value.cwiseMax(T(0)), {&x});
    if (wants(tp, out)) {
        tp.record([x, out] {
            if (out->grad.size() == 0) return;
            x->accumulate((x->value.array() > T(0)).select(out->grad, T(0)));
        });
    }
    return out;
}

template <class T>
Var<T> clamp(Tape<T>& tp, const Var<T>& x, T lo, T hi) {
    auto out = result<T>(x->value.cwiseMax(lo).cwiseMin(hi), {&x});
    if (wants(tp, out)) {
        tp.record([x, out, lo, hi] {
            if (out->grad.size() == 0) return;
            x->accumulate(((x->value.array() >= lo) && (x->value.array() <= hi)).select(out->grad, T(0)));
        });
    }
    return out;
}

template <class T>
Var<T> concat_cols(Tape<T>& tp, const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols of nothing");
    const int rows = parts.front()->rows();
    int cols = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require_shape(p->rows() == rows, "concat_cols", parts.front()->value, p->value);
        cols += p->cols();
        rg = rg || p->requires_grad;
    }
    Mat<T> v(rows, cols);
    int off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p->cols()) = p->value;
        off += p->cols();
    }
    auto out = make_var<T>(std::move(v), rg);
    if (wants(tp, out)) {
        tp.record([parts, out] {
            if (out->grad.size() == 0) return;
            int o = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) p->accumulate(out->grad.middleCols(o, p->cols()));
                o += p->cols();
            }
        });
    }
    return out;
}

template <class T>
Var<T> gather_rows(Tape<T>& tp, const Var<T>& x, std::shared_ptr<const std::vector<int>> idx) {
    const auto& ix = *idx;
    Mat<T> v(static_cast<Eigen::Index>(ix.size()), x->cols());
    for (std::size_t k = 0; k < ix.size(); ++k) {
        if (ix[k] < 0 || ix[k] >= x->rows()) throw Error(Errc::ShapeMismatch, "gather_rows index out of range");
        v.row(static_cast<Eigen::Index>(k)) = x->value.row(ix[k]);
    }
    auto out = result<T>(std::move(v), {&x});
    if (wants(tp, out)) {
        tp.record([x, idx, out] {
            if (out->grad.size() == 0 || !x->requires_grad) return;
            Mat<T> g = Mat<T>::Zero(x->rows(), x->cols());
            const auto& ix2 = *idx;
            for (std::size_t k = 0; k < ix2.size(); ++k) g.row(ix2[k]) += out->grad.row(static_cast<Eigen::Index>(k));
            x->accumulate(g);
        });
    }
    return out;
}

template <class T>
Var<T> spmm(Tape<T>& tp, std::shared_ptr<const SpMat<T>> A, const Var<T>& x) {
    if (A->cols() != x->rows()) {
        throw Error(Errc::ShapeMismatch, "spmm: operator has " + std::to_string(A->cols()) + " columns, input has " +
                                             std::to_string(x->rows()) + " rows");
    }
    auto out = result<T>(Mat<T>(*A * x->value), {&x});
    if (wants(tp, out)) {
        tp.record([A, x, out] {
            if (out->grad.size() == 0) return;
            x->accumulate(Mat<T>(A->transpose() * out->grad));
        });
    }
    return out;
}

template <class T>
Var<T> batchnorm_train(Tape<T>& tp, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps,
                       Mat<T>& batch_mean, Mat<T>& batch_var) {
    const auto n = x->value.rows();
    const auto d = x->value.cols();
    if (gamma->cols() != d || beta->cols() != d || n == 0) {
        throw Error(Errc::ShapeMismatch, "batchnorm: parameter width differs from input");
    }
    batch_mean = x->value.colwise().mean();
    Mat<T> xc = x->value.rowwise() - batch_mean.row(0);
    batch_var = xc.array().square().colwise().mean();
    Mat<T> inv = (batch_var.array() + eps).rsqrt();
    Mat<T> xhat = xc.array().rowwise() * inv.row(0).array();
    Mat<T> v = xhat.array().rowwise() * gamma->value.row(0).array();
    v.rowwise() += beta->value.row(0);
    auto out = result<T>(std::move(v), {&x, &gamma, &beta});
    if (wants(tp, out)) {
        tp.record([x, gamma, beta, out, xhat = std::move(xhat), inv = std::move(inv)] {
            if (out->grad.size() == 0) return;
            const Mat<T>& g = out->grad;
            if (beta->requires_grad) beta->accumulate(g.colwise().sum());
            if (gamma->requires_grad) gamma->accumulate((g.array() * xhat.array()).colwise().sum());
            if (x->requires_grad) {
                Mat<T> gh = g.array().rowwise() * gamma->value.row(0).array();
                Mat<T> mean_gh = gh.colwise().mean();
                Mat<T> mean_ghx = (gh.array() * xhat.array()).colwise().mean();
                Mat<T> dx = gh;
                dx.rowwise() -= mean_gh.row(0);
                dx.array() -= xhat.array().rowwise() * mean_ghx.row(0).array();
                dx.array().rowwise() *= inv.row(0).array();
                x->accumulate(dx);
            }
        });
    }
    return out;
}

template <class T>
Var<T> batchnorm_eval(Tape<T>& tp, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Mat<T>& mean,
                      const Mat<T>& var, T eps) {
    const auto d = x->value.cols();
    if (gamma->cols() != d || beta->cols() != d || mean.cols() != d || var.cols() != d) {
        throw Error(Errc::ShapeMismatch, "batchnorm: parameter width differs from input");
    }
    Mat<T> inv = (var.array() + eps).rsqrt();
    Mat<T> xhat = (x->value.rowwise() - mean.row(0)).array().rowwise() * inv.row(0).array();
    Mat<T> v = xhat.array().rowwise() * gamma->value.row(0).array();
    v.rowwise() += beta->value.row(0);
    auto out = result<T>(std::move(v), {&x, &gamma, &beta});
    if (wants(tp, out)) {
        tp.record([x, gamma, beta, out, xhat = std::move(xhat), inv = std::move(inv)] {
            if (out->grad.size() == 0) return;
            const Mat<T>& g = out->grad;
            if (beta->requires_grad) beta->accumulate(g.colwise().sum());
            if (gamma->requires_grad) gamma->accumulate((g.array() * xhat.array()).colwise().sum());
            if (x->requires_grad) {
                Mat<T> dx = g.array().rowwise() * (gamma->value.row(0).array() * inv.row(0).array());
                x->accumulate(dx);
            }
        });
    }
    return out;
}

template <class T>
Mat<T> softmax_rows(const Mat<T>& logits) {
    Mat<T> p = logits.colwise() - logits.rowwise().maxCoeff();
    p = p.array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

template <class T>
Var<T> cross_entropy(Tape<T>& tp, const Var<T>& logits, std::span<const int> labels, int ignore_index,
                     std::span<const T> weights) {
    const int n = logits->rows();
    const int k = logits->cols();
    if (static_cast<int>(labels.size()) != n) throw Error(Errc::ShapeMismatch, "cross_entropy: one label per row");
    if (!weights.empty() && static_cast<int>(weights.size()) != n) {
        throw Error(Errc::ShapeMismatch, "cross_entropy: one weight per row");
    }
    Mat<T> p = softmax_rows<T>(logits->value);
    std::vector<T> w(static_cast<std::size_t>(n), T(0));
    T wsum = 0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y == ignore_index) continue;
        if (y < 0 || y >= k) throw Error(Errc::InvalidArgument, "cross_entropy: label out of range");
        w[static_cast<std::size_t>(i)] = weights.empty() ? T(1) : weights[static_cast<std::size_t>(i)];
        wsum += w[static_cast<std::size_t>(i)];
    }
    if (wsum <= T(0)) throw Error(Errc::AllIgnored, "cross_entropy: every row is ignored");
    T loss = 0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (w[static_cast<std::size_t>(i)] == T(0)) continue;
        // log softmax via max subtraction
        const T m = logits->value.row(i).maxCoeff();
        const T lse = m + std::log((logits->value.row(i).array() - m).exp().sum());
        loss += w[static_cast<std::size_t>(i)] * (lse - logits->value(i, y));
    }
    Mat<T> v(1, 1);
    v(0, 0) = loss / wsum;
    auto out = result<T>(std::move(v), {&logits});
    if (wants(tp, out)) {
        std::vector<int> ys(labels.begin(), labels.end());
        tp.record([logits, out, p = std::move(p), w = std::move(w), ys = std::move(ys), wsum] {
            if (out->grad.size() == 0) return;
            Mat<T> g = p;
            for (int i = 0; i < g.rows(); ++i) {
                const T wi = w[static_cast<std::size_t>(i)];
                if (wi == T(0)) {
                    g.row(i).setZero();
                    continue;
                }
                g(i, ys[static_cast<std::size_t>(i)]) -= T(1);
                g.row(i) *= wi / wsum;
            }
            logits->accumulate(g * out->grad(0, 0));
        });
    }
    return out;
}

template <class T>
Var<T> huber(Tape<T>& tp, const Var<T>& pred, const Mat<T>& target, T delta) {
    require_shape(pred->rows() == target.rows() && pred->cols() == target.cols(), "huber", pred->value, target);
    const Mat<T> r = pred->value - target;
    const T n = static_cast<T>(r.size());
    T loss = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const T a = std::abs(r.data()[i]);
        loss += a <= delta ? T(0.5) * a * a : delta * (a - T(0.5) * delta);
    }
    Mat<T> v(1, 1);
    v(0, 0) = loss / n;
    auto out = result<T>(std::move(v), {&pred});
    if (wants(tp, out)) {
        tp.record([pred, out, r, delta, n] {
            if (out->grad.size() == 0) return;
            Mat<T> g = r.cwiseMax(-delta).cwiseMin(delta) * (out->grad(0, 0) / n);
            pred->accumulate(g);
        });
    }
    return out;
}

template <class T>
Var<T> weighted_sum(Tape<T>& tp, const Var<T>& x, const Mat<T>& R) {
    require_shape(x->rows() == R.rows() && x->cols() == R.cols(), "weighted_sum", x->value, R);
    Mat<T> v(1, 1);
    v(0, 0) = (x->value.array() * R.array()).sum();
    auto out = result<T>(std::move(v), {&x});
    if (wants(tp, out)) {
        tp.record([x, out, R] {
            if (out->grad.size() == 0) return;
            x->accumulate(R * out->grad(0, 0));
        });
    }
    return out;
}

#define SITSGRAPH_NN_INSTANTIATE(T)                                                                              \
    template struct Node<T>;                                                                                     \
    template class Tape<T>;                                                                                      \
    template Var<T> matmul(Tape<T>&, const Var<T>&, const Var<T>&);                                              \
    template Var<T> add(Tape<T>&, const Var<T>&, const Var<T>&);                                                 \
    template Var<T> add_row(Tape<T>&, const Var<T>&, const Var<T>&);                                             \
    template Var<T> scale(Tape<T>&, const Var<T>&, T);                                                           \
    template Var<T> relu(Tape<T>&, const Var<T>&);                                                               \
    template Var<T> clamp(Tape<T>&, const Var<T>&, T, T);                                                        \
    template Var<T> concat_cols(Tape<T>&, const std::vector<Var<T>>&);                                           \
    template Var<T> gather_rows(Tape<T>&, const Var<T>&, std::shared_ptr<const std::vector<int>>);               \
    template Var<T> spmm(Tape<T>&, std::shared_ptr<const SpMat<T>>, const Var<T>&);                              \
    template Var<T> batchnorm_train(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, T, Mat<T>&, Mat<T>&); \
    template Var<T> batchnorm_eval(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const Mat<T>&,         \
                                   const Mat<T>&, T);                                                            \
    template Var<T> cross_entropy(Tape<T>&, const Var<T>&, std::span<const int>, int, std::span<const T>);       \
    template Var<T> huber(Tape<T>&, const Var<T>&, const Mat<T>&, T);                                            \
    template Var<T> weighted_sum(Tape<T>&, const Var<T>&, const Mat<T>&);                                        \
    template Mat<T> softmax_rows(const Mat<T>&);

SITSGRAPH_NN_INSTANTIATE(float)
SITSGRAPH_NN_INSTANTIATE(double)

}  // namespace sitsgraph::nn
