#include "sitsgraph/nn/layers.hpp"

#include "sitsgraph/error.hpp"

#include <algorithm>
#include <cmath>

namespace sitsgraph::nn {

template <class T>
Mat<T> glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Mat<T> m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
    return m;
}

template <class T>
Linear<T>::Linear(int in, int out, Rng& rng, bool bias) {
    if (in < 1 || out < 1) throw Error(Errc::InvalidArgument, "linear layer dimensions must be >= 1");
    W = make_var<T>(glorot_uniform<T>(in, out, rng), true);
    if (bias) b = make_var<T>(Mat<T>::Zero(1, out), true);
}

template <class T>
Var<T> Linear<T>::forward(Tape<T>& tp, const Var<T>& x) const {
    auto y = matmul(tp, x, W);
    return b ? add_row(tp, y, b) : y;
}

template <class T>
void Linear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".W", W);
    if (b) out.emplace_back(prefix + ".b", b);
}

template <class T>
void Linear<T>::zero() {
    W->value.setZero();
    if (b) b->value.setZero();
}

template <class T>
Mlp<T>::Mlp(int in, int hidden, int out, Rng& rng) : l1(in, hidden, rng), l2(hidden, out, rng) {}

template <class T>
Var<T> Mlp<T>::forward(Tape<T>& tp, const Var<T>& x) const {
    return l2.forward(tp, relu(tp, l1.forward(tp, x)));
}

template <class T>
void Mlp<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    l1.collect(out, prefix + ".0");
    l2.collect(out, prefix + ".1");
}

template <class T>
void Mlp<T>::zero() {
    l1.zero();
    l2.zero();
}

template <class T>
BatchNorm<T>::BatchNorm(int dim)
    : gamma(make_var<T>(Mat<T>::Ones(1, dim), true)),
      beta(make_var<T>(Mat<T>::Zero(1, dim), true)),
      running_mean(Mat<T>::Zero(1, dim)),
      running_var(Mat<T>::Ones(1, dim)) {}

template <class T>
Var<T> BatchNorm<T>::forward(Tape<T>& tp, const Var<T>& x, bool train) {
    if (!train) return batchnorm_eval(tp, x, gamma, beta, running_mean, running_var, eps);
    Mat<T> mean, var;
    auto y = batchnorm_train(tp, x, gamma, beta, eps, mean, var);
    const T n = static_cast<T>(x->rows());
    const Mat<T> unbiased = n > T(1) ? Mat<T>(var * (n / (n - T(1)))) : var;
    running_mean = (T(1) - momentum) * running_mean + momentum * mean;
    running_var = (T(1) - momentum) * running_var + momentum * unbiased;
    return y;
}

template <class T>
void BatchNorm<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

template <class T>
void BatchNorm<T>::buffers(BufferList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
}

namespace {

std::vector<std::vector<int>> undirected_neighbours(int n, const EdgeList& edges) {
    std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n) throw Error(Errc::ShapeMismatch, "edge endpoint out of range");
        if (a == b) continue;
        nb[static_cast<std::size_t>(a)].push_back(b);
        nb[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& v : nb) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return nb;
}

}  // namespace

template <class T>
std::shared_ptr<const SpMat<T>> gcn_operator(int n, const EdgeList& edges) {
    const auto nb = undirected_neighbours(n, edges);
    std::vector<T> dinv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dinv[std::size_t(i)] = T(1) / std::sqrt(T(nb[std::size_t(i)].size() + 1));
    std::vector<Eigen::Triplet<T>> trip;
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, dinv[std::size_t(i)] * dinv[std::size_t(i)]);
        for (int j : nb[std::size_t(i)]) trip.emplace_back(i, j, dinv[std::size_t(i)] * dinv[std::size_t(j)]);
    }
    auto A = std::make_shared<SpMat<T>>(n, n);
    A->setFromTriplets(trip.begin(), trip.end());
    return A;
}

template <class T>
std::shared_ptr<const SpMat<T>> mean_operator(int n, const EdgeList& edges) {
    const auto nb = undirected_neighbours(n, edges);
    std::vector<Eigen::Triplet<T>> trip;
    for (int i = 0; i < n; ++i) {
        const auto& v = nb[std::size_t(i)];
        for (int j : v) trip.emplace_back(i, j, T(1) / T(v.size()));
    }
    auto A = std::make_shared<SpMat<T>>(n, n);
    A->setFromTriplets(trip.begin(), trip.end());
    return A;
}

template <class T>
std::shared_ptr<const SpMat<T>> incidence_operator(int n_dst, const std::vector<int>& dst, bool mean) {
    std::vector<int> indeg(static_cast<std::size_t>(n_dst), 0);
    for (int d : dst) {
        if (d < 0 || d >= n_dst) throw Error(Errc::ShapeMismatch, "edge destination out of range");
        ++indeg[std::size_t(d)];
    }
    std::vector<Eigen::Triplet<T>> trip;
    trip.reserve(dst.size());
    for (std::size_t k = 0; k < dst.size(); ++k) {
        const T w = mean ? T(1) / T(indeg[std::size_t(dst[k])]) : T(1);
        trip.emplace_back(dst[k], static_cast<int>(k), w);
    }
    auto A = std::make_shared<SpMat<T>>(n_dst, static_cast<Eigen::Index>(dst.size()));
    A->setFromTriplets(trip.begin(), trip.end());
    return A;
}

template <class T>
GcnConv<T>::GcnConv(int in, int out, Rng& rng)
    : lin(in, out, rng, false), bias(make_var<T>(Mat<T>::Zero(1, out), true)) {}

template <class T>
Var<T> GcnConv<T>::forward(Tape<T>& tp, const Var<T>& x, const std::shared_ptr<const SpMat<T>>& op) const {
    return add_row(tp, spmm(tp, op, lin.forward(tp, x)), bias);
}

template <class T>
void GcnConv<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    lin.collect(out, prefix + ".lin");
    out.emplace_back(prefix + ".bias", bias);
}

template <class T>
SageConv<T>::SageConv(int in, int out, Rng& rng) : self(in, out, rng, true), neigh(in, out, rng, false) {}

template <class T>
Var<T> SageConv<T>::forward(Tape<T>& tp, const Var<T>& x, const std::shared_ptr<const SpMat<T>>& mean_op) const {
    return add(tp, self.forward(tp, x), neigh.forward(tp, spmm(tp, mean_op, x)));
}

template <class T>
void SageConv<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    self.collect(out, prefix + ".self");
    neigh.collect(out, prefix + ".neigh");
}

template <class T>
EdgeIndex<T>::EdgeIndex(std::vector<int> s, std::vector<int> d, int n_dst, bool mean) {
    if (s.size() != d.size()) throw Error(Errc::ShapeMismatch, "edge index source/destination lengths differ");
    aggregate = incidence_operator<T>(n_dst, d, mean);
    src = std::make_shared<const std::vector<int>>(std::move(s));
    dst = std::make_shared<const std::vector<int>>(std::move(d));
}

template <class T>
GnBlock<T>::GnBlock(int node_dim, int edge_dim, int hidden, Rng& rng)
    : edge_mlp(edge_dim + 2 * node_dim, hidden, edge_dim, rng), node_mlp(node_dim + edge_dim, hidden, node_dim, rng) {}

template <class T>
std::pair<Var<T>, Var<T>> GnBlock<T>::forward(Tape<T>& tp, const Var<T>& x_src, const Var<T>& x_dst,
                                              const Var<T>& e, const EdgeIndex<T>& idx) const {
    if (static_cast<std::size_t>(e->rows()) != idx.size()) {
        throw Error(Errc::ShapeMismatch, "edge features do not match the edge index");
    }
    if (idx.aggregate->rows() != x_dst->rows()) {
        throw Error(Errc::ShapeMismatch, "destination features do not match the edge index");
    }
    auto msg_in = concat_cols<T>(tp, {e, gather_rows(tp, x_src, idx.src), gather_rows(tp, x_dst, idx.dst)});
    auto e_new = add(tp, e, edge_mlp.forward(tp, msg_in));
    auto agg = spmm(tp, idx.aggregate, e_new);
    auto x_new = add(tp, x_dst, node_mlp.forward(tp, concat_cols<T>(tp, {x_dst, agg})));
    return {x_new, e_new};
}

template <class T>
void GnBlock<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    edge_mlp.collect(out, prefix + ".edge");
    node_mlp.collect(out, prefix + ".node");
}

template <class T>
void GnBlock<T>::zero() {
    edge_mlp.zero();
    node_mlp.zero();
}

#define SITSGRAPH_LAYERS_INSTANTIATE(T)                                                                          \
    template Mat<T> glorot_uniform<T>(int, int, Rng&);                                                           \
    template struct Linear<T>;                                                                                   \
    template struct Mlp<T>;                                                                                      \
    template struct BatchNorm<T>;                                                                                \
    template std::shared_ptr<const SpMat<T>> gcn_operator<T>(int, const EdgeList&);                              \
    template std::shared_ptr<const SpMat<T>> mean_operator<T>(int, const EdgeList&);                             \
    template std::shared_ptr<const SpMat<T>> incidence_operator<T>(int, const std::vector<int>&, bool);          \
    template struct GcnConv<T>;                                                                                  \
    template struct SageConv<T>;                                                                                 \
    template struct EdgeIndex<T>;                                                                                \
    template struct GnBlock<T>;

SITSGRAPH_LAYERS_INSTANTIATE(float)
SITSGRAPH_LAYERS_INSTANTIATE(double)

}  // namespace sitsgraph::nn
