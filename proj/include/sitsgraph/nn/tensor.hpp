#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace sitsgraph::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using SpMat = Eigen::SparseMatrix<T, Eigen::RowMajor>;

// A value in the computation graph. `grad` stays empty until something
// flows into it, which reads as zero.
template <class T>
struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool requires_grad = false;

    int rows() const { return static_cast<int>(value.rows()); }
    int cols() const { return static_cast<int>(value.cols()); }
    void accumulate(const Mat<T>& g);
    void zero_grad() { grad.resize(0, 0); }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> make_var(Mat<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

// Records backward closures in execution order. With recording disabled the
// ops only compute values.
template <class T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void record(std::function<void()> fn) {
        if (recording_) ops_.push_back(std::move(fn));
    }
    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

    // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs the closures in
    // reverse. Parameter grads accumulate; call zero_grad between steps.
    void backward(const Var<T>& loss);

private:
    bool recording_;
    std::vector<std::function<void()>> ops_;
};

template <class T>
Var<T> matmul(Tape<T>& tp, const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> add(Tape<T>& tp, const Var<T>& a, const Var<T>& b);
// x + b with a 1 x cols row vector broadcast over rows.
template <class T>
Var<T> add_row(Tape<T>& tp, const Var<T>& x, const Var<T>& b);
template <class T>
Var<T> scale(Tape<T>& tp, const Var<T>& x, T s);
template <class T>
Var<T> relu(Tape<T>& tp, const Var<T>& x);
template <class T>
Var<T> clamp(Tape<T>& tp, const Var<T>& x, T lo, T hi);
template <class T>
Var<T> concat_cols(Tape<T>& tp, const std::vector<Var<T>>& parts);
// out[k] = x[idx[k]].
template <class T>
Var<T> gather_rows(Tape<T>& tp, const Var<T>& x, std::shared_ptr<const std::vector<int>> idx);
// out = A * x for a constant sparse operator.
template <class T>
Var<T> spmm(Tape<T>& tp, std::shared_ptr<const SpMat<T>> A, const Var<T>& x);

// Column-wise normalisation with the batch statistics (biased variance).
// The statistics used are written to batch_mean / batch_var.
template <class T>
Var<T> batchnorm_train(Tape<T>& tp, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps,
                       Mat<T>& batch_mean, Mat<T>& batch_var);
template <class T>
Var<T> batchnorm_eval(Tape<T>& tp, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Mat<T>& mean,
                      const Mat<T>& var, T eps);

// Mean over rows with label != ignore_index of -log softmax(logits)[label].
// Per-row weights, when given, turn it into a weighted mean.
template <class T>
Var<T> cross_entropy(Tape<T>& tp, const Var<T>& logits, std::span<const int> labels, int ignore_index = -1,
                     std::span<const T> weights = {});
// Mean Huber loss against a constant target of the same shape.
template <class T>
Var<T> huber(Tape<T>& tp, const Var<T>& pred, const Mat<T>& target, T delta = T(1));
// sum(x .* R) for a constant R; handy as a scalar probe in gradient checks.
template <class T>
Var<T> weighted_sum(Tape<T>& tp, const Var<T>& x, const Mat<T>& R);

// Row-wise softmax of a plain matrix.
template <class T>
Mat<T> softmax_rows(const Mat<T>& logits);

}  // namespace sitsgraph::nn
