#pragma once

// Central finite-difference gradient checks in double precision.

#include "sitsgraph/forecast.hpp"
#include "sitsgraph/nn/classifier.hpp"
#include "sitsgraph/nn/layers.hpp"
#include "sitsgraph/nn/tensor.hpp"

#include "oracles.hpp"

#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace gradcheck {

using namespace sitsgraph;
using namespace sitsgraph::nn;
using D = double;
using LossFn = std::function<Var<D>(Tape<D>&)>;

inline constexpr double kStep = 1e-4;
// Exactly-zero gradients (a bias ahead of train-mode batch norm) leave only
// round-off in both estimates; below this norm the error counts as absolute.
inline constexpr double kFloor = 1e-6;
// Step h and h/2 estimates further apart than this mean the stencil crosses
// a kink; the caller redraws the fixture.
inline constexpr double kKink = 1e-3;

// Worst per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, kFloor).
// NaN when the numeric reference is not smooth at this point.
inline double max_relative_error(const std::vector<Var<D>>& leaves, const LossFn& loss) {
    for (const auto& v : leaves) {
        v->requires_grad = true;
        v->zero_grad();
    }
    Tape<D> tp;
    tp.backward(loss(tp));
    double worst = 0.0;
    for (const auto& v : leaves) {
        const Mat<D> analytic = v->grad.size() ? v->grad : Mat<D>::Zero(v->rows(), v->cols());
        Mat<D> numeric(v->rows(), v->cols()), coarse(v->rows(), v->cols()), fine(v->rows(), v->cols());
        for (Eigen::Index i = 0; i < v->value.size(); ++i) {
            D& x = v->value.data()[i];
            const D saved = x;
            auto central = [&](D h) {
                Tape<D> off(false);
                x = saved + h;
                const D up = loss(off)->value(0, 0);
                x = saved - h;
                const D down = loss(off)->value(0, 0);
                x = saved;
                return (up - down) / (2 * h);
            };
            // Richardson step on the central difference: O(h^4) truncation.
            coarse.data()[i] = central(kStep);
            fine.data()[i] = central(kStep / 2);
            numeric.data()[i] = (4 * fine.data()[i] - coarse.data()[i]) / 3;
        }
        if ((coarse - fine).norm() > kKink * std::max(fine.norm(), kFloor)) return std::numeric_limits<double>::quiet_NaN();
        const double scale = std::max({analytic.norm(), numeric.norm(), kFloor});
        worst = std::max(worst, (analytic - numeric).norm() / scale);
    }
    return worst;
}

// Values kept away from the kinks of relu/clamp/huber so the difference
// quotient never straddles one.
inline Mat<D> random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat<D> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        double v = u(rng);
        if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
        m.data()[i] = v;
    }
    return m;
}

// Zero-initialised biases and BN shifts would park pre-activations exactly
// on a relu kink, where no derivative exists; draw every parameter instead.
inline void randomize(const ParamList<D>& params, Rng& rng) {
    for (const auto& [name, v] : params) v->value = random_mat(rng, v->rows(), v->cols(), -0.8, 0.8);
}

inline Var<D> leaf(Mat<D> m) { return make_var<D>(std::move(m), true); }

inline std::vector<Var<D>> vars_of(const ParamList<D>& p) {
    std::vector<Var<D>> out;
    for (const auto& [name, v] : p) out.push_back(v);
    return out;
}

inline EdgeList random_edges(Rng& rng, int n, double p) {
    EdgeList e;
    std::uniform_real_distribution<double> u(0, 1);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (u(rng) < p) e.push_back({a, b});
    return e;
}

inline ForecastSample random_sample(Rng& rng, int H, int W, int N) {
    ForecastSample s;
    s.H = H;
    s.W = W;
    s.N = N;
    std::uniform_real_distribution<float> u(-0.8f, 0.8f);
    s.window.resize(std::size_t(N) * H * W);
    for (auto& v : s.window) v = u(rng);
    s.target.resize(std::size_t(H) * W);
    for (auto& v : s.target) v = u(rng);
    s.geo = {40, 41, 2, 3};
    s.last_date = Date{2021, 1, 1}.plus_days(int(rng() % 365));
    s.site = "x";
    return s;
}

// One entry per checked component: worst relative error over `shapes` random shapes.
// Non-smooth points count as failures, except in whole models where hidden
// relus can land in the stencil; their parameters are redrawn (count in `redraws`).
inline std::map<std::string, double> run_suite(int shapes, std::uint64_t seed, int* redraws = nullptr) {
    std::map<std::string, double> worst;
    auto note = [&](const std::string& k, double e) {
        worst[k] = std::max(worst[k], std::isnan(e) ? std::numeric_limits<double>::infinity() : e);
    };
    Rng rng(seed);
    auto redrawn = [&](const std::string& k, const ParamList<D>& params, const std::vector<Var<D>>& leaves,
                       const LossFn& loss) {
        double e = std::numeric_limits<double>::quiet_NaN();
        for (int attempt = 0; attempt < 20 && std::isnan(e); ++attempt) {
            if (attempt > 0 && redraws) ++*redraws;
            randomize(params, rng);
            e = max_relative_error(leaves, loss);
        }
        note(k, e);
    };
    auto dim = [&](int lo, int hi) { return lo + int(rng() % std::uint64_t(hi - lo + 1)); };

    for (int s = 0; s < shapes; ++s) {
        const int n = dim(2, 7), in = dim(1, 5), out = dim(1, 5);

        {
            Linear<D> lin(in, out, rng);
            auto x = leaf(random_mat(rng, n, in));
            const Mat<D> R = random_mat(rng, n, out);
            auto leaves = vars_of([&] { ParamList<D> p; lin.collect(p, "l"); return p; }());
            leaves.push_back(x);
            note("linear", max_relative_error(leaves, [&](Tape<D>& tp) { return weighted_sum(tp, lin.forward(tp, x), R); }));
        }
        {
            auto x = leaf(random_mat(rng, n, in));
            for (Eigen::Index i = 0; i < x->value.size(); ++i) {
                D& v = x->value.data()[i];
                if (std::abs(std::abs(v) - 0.5) < 0.05) v += v < 0 ? -0.1 : 0.1;
            }
            const Mat<D> R = random_mat(rng, n, in);
            note("relu", max_relative_error({x}, [&](Tape<D>& tp) { return weighted_sum(tp, relu(tp, x), R); }));
            note("clamp", max_relative_error({x}, [&](Tape<D>& tp) { return weighted_sum(tp, clamp(tp, x, -0.5, 0.5), R); }));
        }
        {
            BatchNorm<D> bn(in);
            bn.gamma->value = random_mat(rng, 1, in, 0.5, 1.5);
            bn.beta->value = random_mat(rng, 1, in);
            auto x = leaf(random_mat(rng, n, in));
            const Mat<D> R = random_mat(rng, n, in);
            std::vector<Var<D>> leaves{x, bn.gamma, bn.beta};
            note("batchnorm_train",
                 max_relative_error(leaves, [&](Tape<D>& tp) { return weighted_sum(tp, bn.forward(tp, x, true), R); }));
            bn.running_var = random_mat(rng, 1, in, 0.5, 2.0);
            bn.running_mean = random_mat(rng, 1, in);
            note("batchnorm_eval",
                 max_relative_error(leaves, [&](Tape<D>& tp) { return weighted_sum(tp, bn.forward(tp, x, false), R); }));
        }
        {
            const auto edges = random_edges(rng, n, 0.4);
            auto x = leaf(random_mat(rng, n, in));
            const Mat<D> R = random_mat(rng, n, out);
            GcnConv<D> gcn(in, out, rng);
            gcn.bias->value = random_mat(rng, 1, out);
            const auto op = gcn_operator<D>(n, edges);
            ParamList<D> p;
            gcn.collect(p, "g");
            auto leaves = vars_of(p);
            leaves.push_back(x);
            note("gcn_conv", max_relative_error(leaves, [&](Tape<D>& tp) { return weighted_sum(tp, gcn.forward(tp, x, op), R); }));

            SageConv<D> sage(in, out, rng);
            const auto mop = mean_operator<D>(n, edges);
            ParamList<D> q;
            sage.collect(q, "s");
            auto sl = vars_of(q);
            sl.push_back(x);
            note("sage_conv", max_relative_error(sl, [&](Tape<D>& tp) { return weighted_sum(tp, sage.forward(tp, x, mop), R); }));
        }
        {
            const int n_src = dim(1, 5), n_dst = dim(1, 5), hid = dim(2, 5), nd = dim(1, 4), ed = dim(1, 4);
            std::vector<int> src, dst;
            const int m = dim(1, 10);
            for (int k = 0; k < m; ++k) {
                src.push_back(int(rng() % std::uint64_t(n_src)));
                dst.push_back(int(rng() % std::uint64_t(n_dst)));
            }
            const bool mean = s % 2 == 1;
            const EdgeIndex<D> idx(src, dst, n_dst, mean);
            GnBlock<D> block(nd, ed, hid, rng);
            auto xs = leaf(random_mat(rng, n_src, nd));
            auto xd = leaf(random_mat(rng, n_dst, nd));
            auto e = leaf(random_mat(rng, m, ed));
            const Mat<D> Rx = random_mat(rng, n_dst, nd), Re = random_mat(rng, m, ed);
            ParamList<D> p;
            block.collect(p, "b");
            auto leaves = vars_of(p);
            leaves.insert(leaves.end(), {xs, xd, e});
            redrawn("gn_block", p, leaves, [&](Tape<D>& tp) {
                auto [x2, e2] = block.forward(tp, xs, xd, e, idx);
                return add(tp, weighted_sum(tp, x2, Rx), weighted_sum(tp, e2, Re));
            });
        }
        {
            ForecastConfig cfg;
            cfg.hidden = 2 * dim(1, 3);
            cfg.input_len = dim(1, 4);
            cfg.processor_rounds = dim(1, 2);
            cfg.n_segments = dim(1, 4);
            cfg.mean_aggregation = s % 2 == 0;
            ForecastModel<D> model(cfg, false);
            const int H = dim(2, 4), W = dim(2, 4);
            const auto sample = random_sample(rng, H, W, cfg.input_len);
            const auto mesh = sample_mesh(sample, cfg);
            const auto fin = prepare_forecast<D>(sample, mesh, cfg);
            auto series = leaf(fin.series);
            auto pos = leaf(fin.pos);
            const Mat<D> R = random_mat(rng, H * W, cfg.hidden);
            auto leaves = vars_of(model.params());
            leaves.insert(leaves.end(), {series, pos});
            redrawn("pixel_embedding", model.params(), leaves, [&](Tape<D>& tp) {
                return weighted_sum(tp, model.pixel_embedding(tp, series, pos), R);
            });
            Mat<D> target(H * W, 1);
            for (int i = 0; i < H * W; ++i) target(i, 0) = sample.target[std::size_t(i)];
            redrawn("forecast_head", model.params(), vars_of(model.params()), [&](Tape<D>& tp) {
                return huber(tp, model.forward(tp, fin), target, 1.0);
            });
        }
        {
            auto g = oracle::random_st_graph(rng, 10, 0.4);
            std::vector<sitsgraph::Node> nodes = g.nodes();
            for (auto& v : nodes) v.label = int(rng() % 3);
            FeatureMatrix fm(int(nodes.size()), in);
            std::uniform_real_distribution<double> u(-1, 1);
            for (auto& v : fm.data) v = u(rng);
            std::vector<Edge> edges = g.spatial_edges();
            edges.insert(edges.end(), g.st_edges().begin(), g.st_edges().end());
            const StGraph lg(nodes, edges, fm);
            for (auto kind : {ConvKind::Gcn, ConvKind::Sage, ConvKind::Mlp}) {
                ClassifierConfig cfg;
                cfg.conv = kind;
                cfg.hidden = dim(2, 4);
                cfg.n_layers = 2 * dim(1, 2);
                cfg.n_classes = 3;
                cfg.in_dim = in;
                cfg.seed = rng();
                StClassifier<D> model(cfg);
                const auto gin = prepare_graph<D>(lg, fit_standardization(fm), kind);
                redrawn("classifier_" + conv_kind_name(kind), model.params(), vars_of(model.params()), [&](Tape<D>& tp) {
                    return cross_entropy<D>(tp, model.forward(tp, gin, true), gin.labels, -1, gin.weights);
                });
            }
        }
        {
            const int k = dim(2, 5);
            auto logits = leaf(random_mat(rng, n, k, -3, 3));
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (auto& l : labels) l = int(rng() % std::uint64_t(k));
            labels[0] = -1;
            if (n > 2) labels[1] = 0;
            std::vector<D> w(static_cast<std::size_t>(n));
            for (auto& x : w) x = 0.5 + double(rng() % 10);
            note("cross_entropy", max_relative_error({logits}, [&](Tape<D>& tp) {
                     return cross_entropy<D>(tp, logits, labels, -1, {});
                 }));
            note("cross_entropy_weighted", max_relative_error({logits}, [&](Tape<D>& tp) {
                     return cross_entropy<D>(tp, logits, labels, -1, w);
                 }));
        }
        {
            auto pred = leaf(random_mat(rng, n, out));
            Mat<D> target = pred->value;
            std::uniform_real_distribution<double> u(0.1, 0.4);
            // residuals on both sides of delta, clear of the switch point
            for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] += (i % 2 ? 1.0 : -1.0) * (i % 3 ? u(rng) : 1.0 + u(rng));
            note("huber", max_relative_error({pred}, [&](Tape<D>& tp) { return huber(tp, pred, target, 1.0); }));
        }
    }
    return worst;
}

}  // namespace gradcheck
