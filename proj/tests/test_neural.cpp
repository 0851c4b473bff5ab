#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/nn/checkpoint.hpp"
#include "sitsgraph/nn/classifier.hpp"
#include "sitsgraph/nn/optim.hpp"

#include <doctest.h>

#include <cmath>

using namespace sitsgraph;
using namespace sitsgraph::nn;
using D = double;

namespace {

Mat<D> mat(int r, int c, std::initializer_list<D> v) {
    Mat<D> m(r, c);
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

// Labelled graph with node features drawn from `feature`, plus adjacency
// between consecutive ids on a date and ST edges between equal positions.
StGraph toy_graph(int per_date, int T, const std::function<std::vector<double>(int, int)>& feature,
                  const std::function<int(int, int)>& label) {
    std::vector<sitsgraph::Node> nodes;
    std::vector<Edge> edges;
    int dim = int(feature(0, 0).size());
    FeatureMatrix fm(per_date * T, dim);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < per_date; ++i) {
            sitsgraph::Node n;
            n.id = t * per_date + i;
            n.t = t;
            n.feature_row = n.id;
            n.pixel_count = 1 + i % 3;
            n.label = label(t, i);
            nodes.push_back(n);
            const auto f = feature(t, i);
            for (int c = 0; c < dim; ++c) fm.at(n.id, c) = f[std::size_t(c)];
            if (i > 0) edges.push_back({n.id - 1, n.id, EdgeKind::Spatial, 1});
            if (t > 0) edges.push_back({n.id - per_date, n.id, EdgeKind::SpatioTemporal, 1});
        }
    }
    return StGraph(nodes, edges, fm);
}

}  // namespace

TEST_CASE("gradient suite (reduced)") {
    const auto worst = gradcheck::run_suite(4, 99);
    for (const auto& [name, err] : worst) {
        INFO(name);
        CHECK(err < 1e-4);
    }
    CHECK(worst.size() >= 14);
}

TEST_CASE("linear, relu and batchnorm examples") {
    Rng rng(1);
    Linear<D> lin(3, 3, rng);
    lin.W->value = Mat<D>::Identity(3, 3);
    lin.b->value.setZero();
    Tape<D> tp(false);
    auto x = make_var<D>(mat(2, 3, {1, -2, 3, 4, 5, -6}));
    CHECK(lin.forward(tp, x)->value == x->value);
    const auto r = relu(tp, make_var<D>(mat(1, 2, {-3, 2})));
    CHECK(r->value(0, 0) == 0);
    CHECK(r->value(0, 1) == 2);

    BatchNorm<D> bn(1);
    bn.gamma->value(0, 0) = 2;
    bn.beta->value(0, 0) = 0.5;
    const auto y = bn.forward(tp, make_var<D>(mat(2, 1, {1, 3})), true);
    CHECK(y->value(0, 0) == doctest::Approx(-2 + 0.5).epsilon(1e-5));
    CHECK(y->value(1, 0) == doctest::Approx(2 + 0.5).epsilon(1e-5));
    // running stats: momentum 0.1, unbiased variance 2
    CHECK(bn.running_mean(0, 0) == doctest::Approx(0.2));
    CHECK(bn.running_var(0, 0) == doctest::Approx(0.9 + 0.1 * 2.0));
    CHECK_THROWS_AS(matmul(tp, x, x), Error);
}

TEST_CASE("gcn_conv examples") {
    Rng rng(2);
    GcnConv<D> g(1, 1, rng);
    g.lin.W->value(0, 0) = 1;
    g.bias->value.setZero();
    Tape<D> tp(false);
    const auto x = make_var<D>(mat(2, 1, {1, 0}));
    CHECK(g.forward(tp, x, gcn_operator<D>(2, {}))->value == x->value);
    const auto y = g.forward(tp, x, gcn_operator<D>(2, {{0, 1}}))->value;
    CHECK(y(0, 0) == doctest::Approx(0.5));
    CHECK(y(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("sage_conv matches a per-node loop") {
    Rng rng(3);
    SageConv<D> s(2, 3, rng);
    const EdgeList edges{{0, 1}, {1, 2}, {0, 2}};  // node 3 isolated
    const auto x = make_var<D>(gradcheck::random_mat(rng, 4, 2));
    Tape<D> tp(false);
    const auto y = s.forward(tp, x, mean_operator<D>(4, edges))->value;
    const std::vector<std::vector<int>> nb{{1, 2}, {0, 2}, {0, 1}, {}};
    for (int i = 0; i < 4; ++i) {
        Mat<D> mean = Mat<D>::Zero(1, 2);
        for (int j : nb[std::size_t(i)]) mean += x->value.row(j);
        if (!nb[std::size_t(i)].empty()) mean /= double(nb[std::size_t(i)].size());
        const Mat<D> expect = x->value.row(i) * s.self.W->value + s.self.b->value + mean * s.neigh.W->value;
        CHECK((y.row(i) - expect).norm() < 1e-12);
    }
    // identical neighbour features f give W_neigh f
    const auto same = make_var<D>(mat(3, 2, {0, 0, 1, 2, 1, 2}));
    const auto z = s.forward(tp, same, mean_operator<D>(3, {{0, 1}, {0, 2}}))->value;
    const Mat<D> f = mat(1, 2, {1, 2});
    CHECK((z.row(0) - (s.self.b->value + f * s.neigh.W->value)).norm() < 1e-12);
}

TEST_CASE("convolutions are permutation equivariant") {
    Rng rng(4);
    const int n = 6;
    const auto edges = gradcheck::random_edges(rng, n, 0.5);
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    EdgeList pe;
    for (auto [a, b] : edges) pe.push_back({perm[std::size_t(a)], perm[std::size_t(b)]});
    const Mat<D> x = gradcheck::random_mat(rng, n, 3);
    Mat<D> px(n, 3);
    for (int i = 0; i < n; ++i) px.row(perm[std::size_t(i)]) = x.row(i);
    GcnConv<D> g(3, 2, rng);
    SageConv<D> s(3, 2, rng);
    Tape<D> tp(false);
    const auto a = g.forward(tp, make_var<D>(x), gcn_operator<D>(n, edges))->value;
    const auto b = g.forward(tp, make_var<D>(px), gcn_operator<D>(n, pe))->value;
    const auto c = s.forward(tp, make_var<D>(x), mean_operator<D>(n, edges))->value;
    const auto d = s.forward(tp, make_var<D>(px), mean_operator<D>(n, pe))->value;
    for (int i = 0; i < n; ++i) {
        CHECK((a.row(i) - b.row(perm[std::size_t(i)])).norm() < 1e-12);
        CHECK((c.row(i) - d.row(perm[std::size_t(i)])).norm() < 1e-12);
    }
}

TEST_CASE("cross_entropy examples") {
    Tape<D> tp(false);
    const std::vector<int> l3{0, 1, 2};
    CHECK(cross_entropy<D>(tp, make_var<D>(Mat<D>::Zero(3, 4)), l3)->value(0, 0) == doctest::Approx(std::log(4.0)));
    const std::vector<int> l1{0};
    CHECK(cross_entropy<D>(tp, make_var<D>(mat(1, 2, {100, 0})), l1)->value(0, 0) < 1e-40);
    const auto logits = mat(3, 2, {1, 0, 0, 2, 5, 5});
    const std::vector<int> mixed{0, -1, 1};
    const double expect = (std::log(1 + std::exp(-1.0)) + std::log(2.0)) / 2;
    CHECK(cross_entropy<D>(tp, make_var<D>(logits), mixed)->value(0, 0) == doctest::Approx(expect));
    const std::vector<int> none{-1, -1, -1};
    CHECK_THROWS_AS(cross_entropy<D>(tp, make_var<D>(logits), none), Error);
}

TEST_CASE("Adam examples") {
    auto w = make_var<D>(mat(1, 3, {1, -2, 0.5}), true);
    Adam<D> opt({{"w", w}}, 1e-3);
    w->grad = mat(1, 3, {0.3, -7, 1e-3});
    opt.step();
    CHECK(w->value(0, 0) == doctest::Approx(1 - 1e-3).epsilon(1e-6));
    CHECK(w->value(0, 1) == doctest::Approx(-2 + 1e-3).epsilon(1e-6));
    CHECK(w->value(0, 2) == doctest::Approx(0.5 - 1e-3).epsilon(1e-4));

    auto z = make_var<D>(mat(1, 2, {1, 2}), true);
    Adam<D> o2({{"z", z}}, 0.1);
    z->grad = Mat<D>::Zero(1, 2);
    o2.step();
    CHECK(z->value == mat(1, 2, {1, 2}));
    CHECK(o2.steps() == 1);

    auto x = make_var<D>(mat(1, 1, {1}), true);
    Adam<D> o3({{"x", x}}, 0.1);
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
        o3.zero_grad();
        x->grad = 2 * x->value;
        o3.step();
        CHECK(std::abs(x->value(0, 0)) < prev);
        prev = std::abs(x->value(0, 0));
    }
}

TEST_CASE("plateau scheduler cuts after five bad epochs") {
    PlateauScheduler s(5, 0.1);
    double lr = 1e-4;
    lr = s.step(1.0, lr);
    for (int i = 0; i < 4; ++i) {
        lr = s.step(1.0, lr);
        CHECK(lr == 1e-4);
    }
    lr = s.step(1.5, lr);
    CHECK(lr == doctest::Approx(1e-5));
    CHECK(s.bad_epochs() == 0);
    lr = s.step(0.5, lr);
    CHECK(lr == doctest::Approx(1e-5));
}

TEST_CASE("classifier config validation") {
    CHECK(parse_conv_kind("sage") == ConvKind::Sage);
    for (const char* k : {"gatv2", "resgatedgcn", "nope"}) {
        try {
            parse_conv_kind(k);
            FAIL("accepted " << k);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ConfigMismatch);
        }
    }
    ClassifierConfig c;
    c.n_classes = 2;
    c.in_dim = 3;
    c.n_layers = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c.n_layers = 4;
    c.hidden = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.hidden = 8;
    CHECK(ClassifierConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("classifier forward properties") {
    std::mt19937_64 rng(5);
    auto g = toy_graph(
        5, 3, [&](int, int) { return std::vector<double>{double(rng() % 100) / 50, double(rng() % 7)}; },
        [](int t, int i) { return (t + i) % 3; });
    ClassifierConfig cfg;
    cfg.n_classes = 3;
    cfg.in_dim = 2;
    cfg.hidden = 8;
    cfg.seed = 17;
    const auto stats = fit_standardization(g.features());
    for (auto kind : {ConvKind::Gcn, ConvKind::Sage, ConvKind::Mlp}) {
        cfg.conv = kind;
        StClassifier<float> a(cfg), b(cfg);
        const auto in = prepare_graph<float>(g, stats, kind);
        Tape<float> tp(false);
        const auto la = a.forward(tp, in, false)->value;
        CHECK(la == b.forward(tp, in, false)->value);
        const auto p = softmax_rows<float>(la);
        for (int i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1.0f) < 1e-6f);
    }
    // the MLP ignores edges
    cfg.conv = ConvKind::Mlp;
    StClassifier<float> m(cfg);
    const StGraph bare(g.nodes(), {}, g.features());
    Tape<float> tp(false);
    CHECK(m.forward(tp, prepare_graph<float>(g, stats, ConvKind::Mlp), false)->value ==
          m.forward(tp, prepare_graph<float>(bare, stats, ConvKind::Mlp), false)->value);
}

TEST_CASE("training: lr 0 leaves weights, separable fixture is learned, runs repeat") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0, 0.3);
    auto g = toy_graph(
        20, 2,
        [&](int t, int i) {
            const double c = (t + i) % 2 ? 1.0 : -1.0;
            return std::vector<double>{c + noise(rng), noise(rng)};
        },
        [](int t, int i) { return (t + i) % 2; });
    ClassifierConfig cfg;
    cfg.conv = ConvKind::Mlp;
    cfg.hidden = 16;
    cfg.epochs = 3;
    cfg.lr = 0.0;
    cfg.seed = 4;
    const auto frozen = train_classifier({&g}, {}, cfg);
    auto loaded = classifier_from_checkpoint(frozen.checkpoint);
    ClassifierConfig init = cfg;
    init.in_dim = 2;
    init.n_classes = 2;
    StClassifier<float> fresh(init);
    const auto pa = loaded.model.params(), pb = fresh.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->value == pb[i].second->value);

    cfg.lr = 1e-2;
    cfg.epochs = 100;
    const auto res = train_classifier({&g}, {}, cfg);
    auto model = classifier_from_checkpoint(res.checkpoint);
    const auto in = prepare_graph<float>(g, model.stats, ConvKind::Mlp);
    const auto pred = predict_nodes(model.model, in);
    int ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == *g.nodes()[i].label;
    CHECK(double(ok) / double(pred.size()) >= 0.95);

    const auto again = train_classifier({&g}, {}, cfg);
    REQUIRE(again.log.size() == res.log.size());
    for (std::size_t e = 0; e < res.log.size(); ++e) CHECK(again.log[e].train_loss == res.log[e].train_loss);

    StGraph unlabeled(std::vector<sitsgraph::Node>{}, {}, {});
    CHECK_THROWS_AS(train_classifier({&unlabeled}, {}, cfg), Error);
}

TEST_CASE("checkpoint round trip") {
    Checkpoint ck;
    ck.header = {{"kind", "test"}, {"x", 3}};
    Mat<float> a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    ck.put<float>("a", a);
    ck.put<float>("b", Mat<float>::Constant(1, 1, -0.5f));
    testsupport::TempDir d("ck");
    save_checkpoint(ck, d / "m.ckpt");
    const auto back = load_checkpoint(d / "m.ckpt");
    CHECK(back.header == ck.header);
    CHECK(back.order == ck.order);
    Mat<float> got(2, 3);
    back.get<float>("a", got);
    CHECK(got == a);
    Mat<float> wrong(3, 2);
    CHECK_THROWS_AS(back.get<float>("a", wrong), Error);
    CHECK_THROWS_AS(back.get<float>("zzz", got), Error);
    CHECK(std::filesystem::file_size(d / "m.ckpt") > 7 * 4);
}
