#include "sitsgraph/nn/classifier.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sitsgraph::nn {

using nlohmann::json;

ConvKind parse_conv_kind(std::string_view name) {
    if (name == "gcn") return ConvKind::Gcn;
    if (name == "sage") return ConvKind::Sage;
    if (name == "mlp") return ConvKind::Mlp;
    if (name == "gatv2" || name == "resgatedgcn") {
        throw Error(Errc::ConfigMismatch, "conv kind '" + std::string(name) +
                                              "' is out of scope: attention and gated layers are not implemented "
                                              "(use gcn, sage or mlp)");
    }
    throw Error(Errc::ConfigMismatch, "unknown conv kind '" + std::string(name) + "' (use gcn, sage or mlp)");
}

std::string conv_kind_name(ConvKind k) {
    switch (k) {
        case ConvKind::Gcn: return "gcn";
        case ConvKind::Sage: return "sage";
        case ConvKind::Mlp: return "mlp";
    }
    return "unknown";
}

void ClassifierConfig::validate() const {
    if (hidden < 1) throw Error(Errc::ConfigMismatch, "hidden must be >= 1");
    if (n_layers < 1) throw Error(Errc::ConfigMismatch, "n_layers must be >= 1");
    if (conv != ConvKind::Mlp && n_layers % 2 != 0) {
        throw Error(Errc::ConfigMismatch, "n_layers must be even for edge-typed convolutions");
    }
    if (n_classes < 1) throw Error(Errc::ConfigMismatch, "n_classes must be >= 1");
    if (in_dim < 1) throw Error(Errc::ConfigMismatch, "in_dim must be >= 1");
    if (epochs < 0) throw Error(Errc::ConfigMismatch, "epochs must be >= 0");
    if (lr < 0) throw Error(Errc::ConfigMismatch, "lr must be >= 0");
}

json ClassifierConfig::to_json() const {
    return {{"conv", conv_kind_name(conv)}, {"hidden", hidden}, {"n_layers", n_layers}, {"n_classes", n_classes},
            {"in_dim", in_dim},           {"lr", lr},         {"epochs", epochs},     {"seed", seed}};
}

ClassifierConfig ClassifierConfig::from_json(const json& j) {
    ClassifierConfig c;
    c.conv = parse_conv_kind(j.at("conv").get<std::string>());
    c.hidden = j.at("hidden").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    c.in_dim = j.at("in_dim").get<int>();
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

template <class T>
GraphInput<T> prepare_graph(const StGraph& g, const Standardization& stats, ConvKind kind) {
    GraphInput<T> in;
    const int n = static_cast<int>(g.nodes().size());
    const int d = g.features().dim;
    if (d == 0) throw Error(Errc::DimMismatch, "graph has no node features");
    if (stats.mean.size() != std::size_t(d) || stats.std.size() != std::size_t(d)) {
        throw Error(Errc::DimMismatch, "feature standardization has " + std::to_string(stats.mean.size()) +
                                           " columns, graph features have " + std::to_string(d));
    }
    in.x.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const auto& node = g.nodes()[std::size_t(i)];
        const auto f = g.features_of(node.id);
        for (int c = 0; c < d; ++c) {
            in.x(i, c) = static_cast<T>((f[std::size_t(c)] - stats.mean[std::size_t(c)]) /
                                        std::max(stats.std[std::size_t(c)], 1e-8));
        }
        in.labels.push_back(node.label.value_or(-1));
        in.weights.push_back(static_cast<T>(node.pixel_count));
        in.node_ids.push_back(node.id);
    }
    if (kind != ConvKind::Mlp) {
        EdgeList sp, st;
        for (const auto& e : g.spatial_edges()) sp.emplace_back(int(g.index_of(e.src)), int(g.index_of(e.dst)));
        for (const auto& e : g.st_edges()) st.emplace_back(int(g.index_of(e.src)), int(g.index_of(e.dst)));
        if (kind == ConvKind::Gcn) {
            in.spatial_op = gcn_operator<T>(n, sp);
            in.temporal_op = gcn_operator<T>(n, st);
        } else {
            in.spatial_op = mean_operator<T>(n, sp);
            in.temporal_op = mean_operator<T>(n, st);
        }
    }
    return in;
}

template <class T>
StClassifier<T>::StClassifier(const ClassifierConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const int in = l == 0 ? cfg_.in_dim : cfg_.hidden;
        switch (cfg_.conv) {
            case ConvKind::Gcn: gcn_.emplace_back(in, cfg_.hidden, rng); break;
            case ConvKind::Sage: sage_.emplace_back(in, cfg_.hidden, rng); break;
            case ConvKind::Mlp: lin_.emplace_back(in, cfg_.hidden, rng); break;
        }
        bn_.emplace_back(cfg_.hidden);
    }
    head_ = Linear<T>(cfg_.hidden, cfg_.n_classes, rng);
}

template <class T>
Var<T> StClassifier<T>::forward(Tape<T>& tp, const GraphInput<T>& g, bool train) {
    if (g.x.cols() != cfg_.in_dim) {
        throw Error(Errc::ConfigMismatch, "model expects " + std::to_string(cfg_.in_dim) + " features, graph has " +
                                              std::to_string(g.x.cols()));
    }
    if (cfg_.conv != ConvKind::Mlp && (!g.spatial_op || !g.temporal_op)) {
        throw Error(Errc::ConfigMismatch, "graph input was prepared without propagation operators");
    }
    Var<T> h = make_var<T>(g.x);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const auto& op = l < cfg_.n_layers / 2 ? g.spatial_op : g.temporal_op;
        switch (cfg_.conv) {
            case ConvKind::Gcn: h = gcn_[std::size_t(l)].forward(tp, h, op); break;
            case ConvKind::Sage: h = sage_[std::size_t(l)].forward(tp, h, op); break;
            case ConvKind::Mlp: h = lin_[std::size_t(l)].forward(tp, h); break;
        }
        h = relu(tp, bn_[std::size_t(l)].forward(tp, h, train));
    }
    return head_.forward(tp, h);
}

template <class T>
ParamList<T> StClassifier<T>::params() const {
    ParamList<T> out;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l);
        switch (cfg_.conv) {
            case ConvKind::Gcn: gcn_[std::size_t(l)].collect(out, p); break;
            case ConvKind::Sage: sage_[std::size_t(l)].collect(out, p); break;
            case ConvKind::Mlp: lin_[std::size_t(l)].collect(out, p); break;
        }
        bn_[std::size_t(l)].collect(out, p + ".bn");
    }
    head_.collect(out, "head");
    return out;
}

template <class T>
BufferList<T> StClassifier<T>::buffers() {
    BufferList<T> out;
    for (int l = 0; l < cfg_.n_layers; ++l) bn_[std::size_t(l)].buffers(out, "layer" + std::to_string(l) + ".bn");
    return out;
}

template <class T>
std::vector<int> predict_nodes(StClassifier<T>& model, const GraphInput<T>& g) {
    Tape<T> tp(false);
    const auto logits = model.forward(tp, g, false);
    std::vector<int> out(std::size_t(g.n()));
    for (int i = 0; i < g.n(); ++i) {
        Eigen::Index arg = 0;
        logits->value.row(i).maxCoeff(&arg);
        out[std::size_t(i)] = static_cast<int>(arg);
    }
    return out;
}

template <class T>
ConfusionMatrix node_confusion(StClassifier<T>& model, const GraphInput<T>& g) {
    ConfusionMatrix cm(model.config().n_classes);
    const auto pred = predict_nodes(model, g);
    for (int i = 0; i < g.n(); ++i) {
        const int y = g.labels[std::size_t(i)];
        if (y < 0 || y >= model.config().n_classes) continue;
        cm.add(y, pred[std::size_t(i)], static_cast<long>(g.weights[std::size_t(i)]));
    }
    return cm;
}

json ClassifierTrainResult::log_json() const {
    json out = json::array();
    for (const auto& e : log) {
        out.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"train_miou", e.train_miou},
                       {"val_miou", e.val_miou},
                       {"lr", e.lr}});
    }
    return out;
}

namespace {

double mean_miou(StClassifier<float>& model, const std::vector<GraphInput<float>>& graphs) {
    ConfusionMatrix cm(model.config().n_classes);
    for (const auto& g : graphs) cm += node_confusion(model, g);
    if (cm.total() == 0) return 0.0;
    return iou_oa(cm).miou;
}

json stats_json(const Standardization& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

ClassifierTrainResult train_classifier(const std::vector<const StGraph*>& train,
                                       const std::vector<const StGraph*>& val, ClassifierConfig cfg) {
    if (train.empty()) throw Error(Errc::NoLabels, "no training graphs");
    const int d = train.front()->features().dim;
    int max_label = -1;
    std::vector<std::vector<double>> rows;
    for (const auto* g : train) {
        if (g->features().dim != d) throw Error(Errc::DimMismatch, "training graphs differ in feature width");
        for (const auto& n : g->nodes()) {
            const auto f = g->features_of(n.id);
            rows.emplace_back(f.begin(), f.end());
            if (n.label) max_label = std::max(max_label, *n.label);
        }
    }
    if (max_label < 0) throw Error(Errc::NoLabels, "training graphs carry no node labels");
    if (cfg.in_dim == 0) cfg.in_dim = d;
    if (cfg.n_classes == 0) cfg.n_classes = max_label + 1;
    cfg.validate();

    FeatureMatrix all(static_cast<int>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].begin(), rows[r].end(), all.data.begin() + static_cast<long>(r * std::size_t(d)));
    }
    const Standardization stats = fit_standardization(all);

    std::vector<GraphInput<float>> tr, va;
    for (const auto* g : train) tr.push_back(prepare_graph<float>(*g, stats, cfg.conv));
    for (const auto* g : val) va.push_back(prepare_graph<float>(*g, stats, cfg.conv));

    StClassifier<float> model(cfg);
    Adam<float> opt(model.params(), cfg.lr);
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    ClassifierTrainResult res;
    auto snapshot = [&](int epoch, double train_miou, double val_miou) {
        Checkpoint ck;
        ck.header = {{"kind", "classifier"},
                     {"config", cfg.to_json()},
                     {"epoch", epoch},
                     {"metrics", {{"train_miou", train_miou}, {"val_miou", val_miou}}},
                     {"standardization", stats_json(stats)},
                     {"feature_names", train.front()->features().names}};
        store_model(ck, model.params(), model.buffers());
        return ck;
    };

    bool have_best = false;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        int steps = 0;
        for (std::size_t gi : order) {
            const auto& g = tr[gi];
            if (std::none_of(g.labels.begin(), g.labels.end(), [](int y) { return y >= 0; })) continue;
            Tape<float> tp;
            opt.zero_grad();
            const auto logits = model.forward(tp, g, true);
            const auto loss = cross_entropy<float>(tp, logits, g.labels, -1, g.weights);
            tp.backward(loss);
            opt.step();
            loss_sum += loss->value(0, 0);
            ++steps;
        }
        ClassifierEpoch e;
        e.epoch = epoch;
        e.train_loss = steps ? loss_sum / steps : 0.0;
        e.train_miou = mean_miou(model, tr);
        e.val_miou = va.empty() ? e.train_miou : mean_miou(model, va);
        e.lr = opt.lr();
        res.log.push_back(e);
        if (!have_best || e.val_miou > res.best_val_miou) {
            have_best = true;
            res.best_val_miou = e.val_miou;
            res.best_epoch = epoch;
            res.checkpoint = snapshot(epoch, e.train_miou, e.val_miou);
        }
    }
    if (!have_best) res.checkpoint = snapshot(0, 0.0, 0.0);
    return res;
}

LoadedClassifier classifier_from_checkpoint(const Checkpoint& ck) {
    if (ck.header.value("kind", "") != "classifier") {
        throw Error(Errc::ConfigMismatch, "checkpoint does not hold a node classifier");
    }
    LoadedClassifier out{StClassifier<float>(ClassifierConfig::from_json(ck.header.at("config"))), {}};
    load_model(ck, out.model.params(), out.model.buffers());
    const auto& s = ck.header.at("standardization");
    out.stats.mean = s.at("mean").get<std::vector<double>>();
    out.stats.std = s.at("std").get<std::vector<double>>();
    return out;
}

template GraphInput<float> prepare_graph<float>(const StGraph&, const Standardization&, ConvKind);
template GraphInput<double> prepare_graph<double>(const StGraph&, const Standardization&, ConvKind);
template class StClassifier<float>;
template class StClassifier<double>;
template std::vector<int> predict_nodes<float>(StClassifier<float>&, const GraphInput<float>&);
template std::vector<int> predict_nodes<double>(StClassifier<double>&, const GraphInput<double>&);
template ConfusionMatrix node_confusion<float>(StClassifier<float>&, const GraphInput<float>&);
template ConfusionMatrix node_confusion<double>(StClassifier<double>&, const GraphInput<double>&);

}  // namespace sitsgraph::nn
