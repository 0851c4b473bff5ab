#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/metrics.hpp"
#include "sitsgraph/nn/checkpoint.hpp"
#include "sitsgraph/nn/layers.hpp"
#include "sitsgraph/segmentation.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sitsgraph {

enum class MeshSource { Last, Stack };

struct ForecastConfig {
    int n_segments = 256;
    double compactness = 0.1;
    int slic_iters = 10;
    MeshSource mesh_from = MeshSource::Last;
    int hidden = 64;
    int processor_rounds = 4;
    int input_len = 6;
    bool mean_aggregation = false;
    double lr = 1e-4;
    int epochs = 50;
    int batch_size = 1;
    double huber_delta = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ForecastConfig from_json(const nlohmann::json& j);
};

// Encoder/processor/decoder graphs over a superpixel mesh. Pixels are
// indexed row-major; every edge carries (d_row, d_col) / max(H, W) from its
// source to its destination.
struct MeshGraph {
    int H = 0;
    int W = 0;
    LabelMap regions;
    int n_mesh = 0;
    std::vector<std::array<double, 2>> centroids;  // (row, col)
    std::vector<int> proc_src, proc_dst;           // adjacency, both directions
    std::vector<int> g2m_src, g2m_dst;             // pixel -> own region
    std::vector<int> m2g_src, m2g_dst;             // 3 nearest regions -> pixel
    std::vector<std::array<float, 2>> proc_feat, g2m_feat, m2g_feat;
};

// SLIC on `image`, region adjacency processor edges (4-connectivity), and
// the encoder/decoder edge sets. Nearest-centroid ties go to the lower id.
MeshGraph build_mesh(const ImageView& image, const ForecastConfig& cfg);

// One forecasting example: N NDWI frames and the frame that follows.
struct ForecastSample {
    int H = 0;
    int W = 0;
    int N = 0;
    std::vector<float> window;  // N x H x W
    std::vector<float> target;  // H x W, empty when unknown
    std::string site;
    GeoBounds geo;
    Date last_date;

    std::span<const float> frame(int k) const {
        return {window.data() + std::size_t(k) * H * W, std::size_t(H) * W};
    }
    std::span<const float> last() const { return frame(N - 1); }
};

// The mesh of a sample under cfg.mesh_from.
MeshGraph sample_mesh(const ForecastSample& s, const ForecastConfig& cfg);

// NDWI of a cube: its "NDWI" band when present, else computed from B03/B08.
SitsCube ndwi_of(const SitsCube& cube);

// Windows of `input_len` frames with their next frame, tiled into
// patch x patch crops (patch <= 0 uses whole frames). Examples touching
// nodata are skipped.
std::vector<ForecastSample> make_samples(const SitsCube& ndwi, const std::string& site, int input_len, int patch);

struct SiteSplit {
    std::vector<int> train;
    std::vector<int> val;
};

// Whole sites go to one side; roughly `train_fraction` of the sites train.
SiteSplit site_disjoint_split(const std::vector<ForecastSample>& samples, double train_fraction,
                              std::uint64_t seed);
// Throws SiteLeakage when a site appears on both sides.
void check_site_disjoint(const std::vector<ForecastSample>& a, const std::vector<ForecastSample>& b);

std::vector<float> baseline_persistence(const ForecastSample& s);
std::vector<float> baseline_average(const ForecastSample& s);

// Mean Huber loss on plain arrays.
double huber_loss(std::span<const float> pred, std::span<const float> target, double delta = 1.0);

namespace nn {

template <class T>
struct ForecastInput {
    int H = 0;
    int W = 0;
    int n_mesh = 0;
    Mat<T> series;  // pixels x N
    Mat<T> pos;     // pixels x 4
    Mat<T> last;    // pixels x 1
    EdgeIndex<T> g2m, proc, m2g;
    Mat<T> g2m_feat, proc_feat, m2g_feat;
};

template <class T>
ForecastInput<T> prepare_forecast(const ForecastSample& s, const MeshGraph& mesh, const ForecastConfig& cfg);

template <class T>
class ForecastModel {
public:
    // The output head starts at zero so an untrained model predicts the last
    // frame; pass zero_head = false for random head weights.
    explicit ForecastModel(const ForecastConfig& cfg, bool zero_head = true);

    // [MLP_ts(series), MLP_pos(pos)] -> MLP_mix, one row per pixel.
    Var<T> pixel_embedding(Tape<T>& tp, const Var<T>& series, const Var<T>& pos) const;
    // Residual prediction clamped to [-1, 1], pixels x 1.
    Var<T> forward(Tape<T>& tp, const ForecastInput<T>& in) const;

    ParamList<T> params() const;
    void zero();
    const ForecastConfig& config() const { return cfg_; }

private:
    ForecastConfig cfg_;
    Mlp<T> mlp_ts_, mlp_pos_, mlp_mix_;
    Linear<T> embed_g2m_, embed_proc_, embed_m2g_;
    GnBlock<T> g2m_;
    std::vector<GnBlock<T>> proc_;
    GnBlock<T> m2g_;
    Linear<T> head_;
};

}  // namespace nn

std::vector<float> forecast_predict(const nn::ForecastModel<float>& model, const ForecastSample& s);
std::vector<float> forecast_predict(const nn::ForecastModel<float>& model, const ForecastSample& s,
                                    const MeshGraph& mesh);

struct ForecastEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_rmse = 0.0;
    double lr = 0.0;
};

struct ForecastTrainResult {
    nn::Checkpoint checkpoint;  // weights of the lowest validation loss
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<ForecastEpoch> log;
    nlohmann::json log_json() const;
};

// Adam on the Huber loss with a plateau scheduler on the validation loss.
ForecastTrainResult train_forecaster(const std::vector<ForecastSample>& train,
                                     const std::vector<ForecastSample>& val, const ForecastConfig& cfg);

nn::ForecastModel<float> forecaster_from_checkpoint(const nn::Checkpoint& ck);

// Mean per-sample RMSE of the model and the two baselines on `samples`.
struct ForecastScores {
    ImageScores model;
    ImageScores persistence;
    ImageScores average;
    nlohmann::json to_json() const;
};
ForecastScores evaluate_forecaster(const nn::ForecastModel<float>& model, const std::vector<ForecastSample>& samples);

}  // namespace sitsgraph
