#pragma once

#include "sitsgraph/features.hpp"
#include "sitsgraph/metrics.hpp"
#include "sitsgraph/nn/checkpoint.hpp"
#include "sitsgraph/nn/layers.hpp"
#include "sitsgraph/stgraph.hpp"

#include <json.hpp>

#include <cstdint>
#include <string_view>

namespace sitsgraph::nn {

enum class ConvKind { Gcn, Sage, Mlp };

// Accepts gcn, sage and mlp. Attention and gated variants are rejected with
// ConfigMismatch.
ConvKind parse_conv_kind(std::string_view name);
std::string conv_kind_name(ConvKind k);

struct ClassifierConfig {
    ConvKind conv = ConvKind::Sage;
    int hidden = 64;
    int n_layers = 4;  // first half on spatial edges, second half on ST edges
    int n_classes = 0;
    int in_dim = 0;
    double lr = 1e-4;
    int epochs = 100;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ClassifierConfig from_json(const nlohmann::json& j);
};

// Model-ready view of one graph, rows in node index order.
template <class T>
struct GraphInput {
    Mat<T> x;
    std::vector<int> labels;  // -1 = unlabelled
    std::vector<T> weights;   // pixel counts
    std::vector<int> node_ids;
    std::shared_ptr<const SpMat<T>> spatial_op;
    std::shared_ptr<const SpMat<T>> temporal_op;

    int n() const { return static_cast<int>(x.rows()); }
};

// Standardises node features with `stats` and builds the propagation
// operators for `kind` (ST edges are used in both directions).
template <class T>
GraphInput<T> prepare_graph(const StGraph& g, const Standardization& stats, ConvKind kind);

template <class T>
class StClassifier {
public:
    explicit StClassifier(const ClassifierConfig& cfg);

    Var<T> forward(Tape<T>& tp, const GraphInput<T>& g, bool train);
    ParamList<T> params() const;
    BufferList<T> buffers();
    const ClassifierConfig& config() const { return cfg_; }

private:
    ClassifierConfig cfg_;
    std::vector<GcnConv<T>> gcn_;
    std::vector<SageConv<T>> sage_;
    std::vector<Linear<T>> lin_;
    std::vector<BatchNorm<T>> bn_;
    Linear<T> head_;
};

template <class T>
std::vector<int> predict_nodes(StClassifier<T>& model, const GraphInput<T>& g);

// Pixel-weighted node-level confusion over labelled nodes.
template <class T>
ConfusionMatrix node_confusion(StClassifier<T>& model, const GraphInput<T>& g);

struct ClassifierEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double train_miou = 0.0;
    double val_miou = 0.0;
    double lr = 0.0;
};

struct ClassifierTrainResult {
    Checkpoint checkpoint;  // weights of the best validation epoch
    int best_epoch = 0;
    double best_val_miou = 0.0;
    std::vector<ClassifierEpoch> log;
    nlohmann::json log_json() const;
};

// One full-graph step per training graph per epoch, Adam on pixel-weighted
// cross-entropy. Feature statistics come from the training graphs only and
// are stored in the checkpoint. Without validation graphs the training mIoU
// drives model selection.
ClassifierTrainResult train_classifier(const std::vector<const StGraph*>& train,
                                       const std::vector<const StGraph*>& val, ClassifierConfig cfg);

struct LoadedClassifier {
    StClassifier<float> model;
    Standardization stats;
};
LoadedClassifier classifier_from_checkpoint(const Checkpoint& ck);

}  // namespace sitsgraph::nn
