#pragma once

#include "sitsgraph/nn/tensor.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sitsgraph::nn {

template <class T>
using ParamList = std::vector<std::pair<std::string, Var<T>>>;

// Non-trainable state saved with a model (batch norm running statistics).
template <class T>
using BufferList = std::vector<std::pair<std::string, Mat<T>*>>;

using Rng = std::mt19937_64;

template <class T>
Mat<T> glorot_uniform(int fan_in, int fan_out, Rng& rng);

template <class T>
struct Linear {
    Var<T> W;  // in x out
    Var<T> b;  // 1 x out, null without bias

    Linear() = default;
    Linear(int in, int out, Rng& rng, bool bias = true);

    int in_dim() const { return W->rows(); }
    int out_dim() const { return W->cols(); }
    Var<T> forward(Tape<T>& tp, const Var<T>& x) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
    void zero();
};

// Two linear layers with a ReLU between.
template <class T>
struct Mlp {
    Linear<T> l1;
    Linear<T> l2;

    Mlp() = default;
    Mlp(int in, int hidden, int out, Rng& rng);

    Var<T> forward(Tape<T>& tp, const Var<T>& x) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
    void zero();
};

template <class T>
struct BatchNorm {
    Var<T> gamma;
    Var<T> beta;
    Mat<T> running_mean;
    Mat<T> running_var;
    T eps = T(1e-5);
    T momentum = T(0.1);

    BatchNorm() = default;
    explicit BatchNorm(int dim);

    // Training mode normalises with batch statistics and updates the running
    // ones (unbiased variance); eval mode uses the running statistics.
    Var<T> forward(Tape<T>& tp, const Var<T>& x, bool train);
    void collect(ParamList<T>& out, const std::string& prefix) const;
    void buffers(BufferList<T>& out, const std::string& prefix);
};

using EdgeList = std::vector<std::pair<int, int>>;

// D^-1/2 (A + I) D^-1/2 over n nodes; edges are read as undirected and
// repeated pairs count once.
template <class T>
std::shared_ptr<const SpMat<T>> gcn_operator(int n, const EdgeList& edges);

// Row i averages the (undirected, deduplicated) neighbours of i; isolated
// nodes get an empty row.
template <class T>
std::shared_ptr<const SpMat<T>> mean_operator(int n, const EdgeList& edges);

// Row d sums (or averages) the messages of the edges pointing at d:
// n_dst x n_edges, entry (dst[k], k).
template <class T>
std::shared_ptr<const SpMat<T>> incidence_operator(int n_dst, const std::vector<int>& dst, bool mean);

template <class T>
struct GcnConv {
    Linear<T> lin;  // no bias; bias applied after propagation
    Var<T> bias;

    GcnConv() = default;
    GcnConv(int in, int out, Rng& rng);

    Var<T> forward(Tape<T>& tp, const Var<T>& x, const std::shared_ptr<const SpMat<T>>& op) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <class T>
struct SageConv {
    Linear<T> self;   // W_self with the bias
    Linear<T> neigh;  // W_neigh

    SageConv() = default;
    SageConv(int in, int out, Rng& rng);

    Var<T> forward(Tape<T>& tp, const Var<T>& x, const std::shared_ptr<const SpMat<T>>& mean_op) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Edge index shared by a message-passing block: edge k runs src[k] -> dst[k].
template <class T>
struct EdgeIndex {
    std::shared_ptr<const std::vector<int>> src;
    std::shared_ptr<const std::vector<int>> dst;
    std::shared_ptr<const SpMat<T>> aggregate;  // n_dst x n_edges

    EdgeIndex() = default;
    EdgeIndex(std::vector<int> s, std::vector<int> d, int n_dst, bool mean = false);
    std::size_t size() const { return src->size(); }
};

// Graph-network block with residual updates:
//   e' = e + MLP_e([e, x_src[src], x_dst[dst]])
//   x' = x_dst + MLP_v([x_dst, agg(e')])
// Source and destination node sets may differ (bipartite encoders/decoders).
template <class T>
struct GnBlock {
    Mlp<T> edge_mlp;
    Mlp<T> node_mlp;

    GnBlock() = default;
    GnBlock(int node_dim, int edge_dim, int hidden, Rng& rng);

    std::pair<Var<T>, Var<T>> forward(Tape<T>& tp, const Var<T>& x_src, const Var<T>& x_dst, const Var<T>& e,
                                      const EdgeIndex<T>& idx) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
    void zero();
};

}  // namespace sitsgraph::nn
