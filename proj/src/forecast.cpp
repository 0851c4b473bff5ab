#include "sitsgraph/forecast.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/features.hpp"
#include "sitsgraph/nn/optim.hpp"
#include "sitsgraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace sitsgraph {

using nlohmann::json;

void ForecastConfig::validate() const {
    if (input_len < 1) throw Error(Errc::ConfigMismatch, "input_len must be >= 1");
    if (processor_rounds < 1) throw Error(Errc::ConfigMismatch, "processor_rounds must be >= 1");
    if (hidden < 2 || hidden % 2 != 0) throw Error(Errc::ConfigMismatch, "hidden must be even and >= 2");
    if (n_segments < 1) throw Error(Errc::ConfigMismatch, "n_segments must be >= 1");
    if (!(compactness > 0)) throw Error(Errc::ConfigMismatch, "compactness must be > 0");
    if (epochs < 0 || lr < 0) throw Error(Errc::ConfigMismatch, "epochs and lr must be >= 0");
    if (batch_size < 1) throw Error(Errc::ConfigMismatch, "batch_size must be >= 1");
    if (!(huber_delta > 0)) throw Error(Errc::ConfigMismatch, "huber_delta must be > 0");
}

json ForecastConfig::to_json() const {
    return {{"n_segments", n_segments},
            {"compactness", compactness},
            {"slic_iters", slic_iters},
            {"mesh_from", mesh_from == MeshSource::Last ? "last" : "stack"},
            {"hidden", hidden},
            {"processor_rounds", processor_rounds},
            {"input_len", input_len},
            {"aggregation", mean_aggregation ? "mean" : "sum"},
            {"lr", lr},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"huber_delta", huber_delta},
            {"seed", seed}};
}

ForecastConfig ForecastConfig::from_json(const json& j) {
    ForecastConfig c;
    c.n_segments = j.at("n_segments").get<int>();
    c.compactness = j.at("compactness").get<double>();
    c.slic_iters = j.at("slic_iters").get<int>();
    const auto mesh = j.at("mesh_from").get<std::string>();
    if (mesh != "last" && mesh != "stack") throw Error(Errc::ConfigMismatch, "mesh_from must be last or stack");
    c.mesh_from = mesh == "last" ? MeshSource::Last : MeshSource::Stack;
    c.hidden = j.at("hidden").get<int>();
    c.processor_rounds = j.at("processor_rounds").get<int>();
    c.input_len = j.at("input_len").get<int>();
    const auto agg = j.at("aggregation").get<std::string>();
    if (agg != "sum" && agg != "mean") throw Error(Errc::ConfigMismatch, "aggregation must be sum or mean");
    c.mean_aggregation = agg == "mean";
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.huber_delta = j.at("huber_delta").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Mesh

MeshGraph build_mesh(const ImageView& image, const ForecastConfig& cfg) {
    MeshGraph m;
    m.H = image.H;
    m.W = image.W;
    const int P = m.H * m.W;
    // Small frames cannot hold more segments than pixels.
    m.regions = slic(image, std::min(cfg.n_segments, P), cfg.compactness, cfg.slic_iters);
    m.n_mesh = m.regions.count();
    const float scale = 1.0f / static_cast<float>(std::max(m.H, m.W));

    std::vector<double> sr(std::size_t(m.n_mesh), 0.0), sc(std::size_t(m.n_mesh), 0.0);
    std::vector<int> cnt(std::size_t(m.n_mesh), 0);
    for (int r = 0; r < m.H; ++r) {
        for (int c = 0; c < m.W; ++c) {
            const auto k = std::size_t(m.regions.at(r, c));
            sr[k] += r;
            sc[k] += c;
            ++cnt[k];
        }
    }
    m.centroids.resize(std::size_t(m.n_mesh));
    for (std::size_t k = 0; k < m.centroids.size(); ++k) m.centroids[k] = {sr[k] / cnt[k], sc[k] / cnt[k]};

    auto disp = [&](double r0, double c0, double r1, double c1) {
        return std::array<float, 2>{static_cast<float>(r1 - r0) * scale, static_cast<float>(c1 - c0) * scale};
    };

    std::set<std::pair<int, int>> adj;
    for (int r = 0; r < m.H; ++r) {
        for (int c = 0; c < m.W; ++c) {
            const int a = m.regions.at(r, c);
            if (c + 1 < m.W && m.regions.at(r, c + 1) != a) {
                const int b = m.regions.at(r, c + 1);
                adj.insert({std::min(a, b), std::max(a, b)});
            }
            if (r + 1 < m.H && m.regions.at(r + 1, c) != a) {
                const int b = m.regions.at(r + 1, c);
                adj.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    for (auto [a, b] : adj) {
        for (auto [s, d] : {std::pair{a, b}, std::pair{b, a}}) {
            m.proc_src.push_back(s);
            m.proc_dst.push_back(d);
            const auto& cs = m.centroids[std::size_t(s)];
            const auto& cd = m.centroids[std::size_t(d)];
            m.proc_feat.push_back(disp(cs[0], cs[1], cd[0], cd[1]));
        }
    }

    const int k_dec = std::min(3, m.n_mesh);
    std::vector<std::pair<double, int>> dist(std::size_t(m.n_mesh));
    for (int r = 0; r < m.H; ++r) {
        for (int c = 0; c < m.W; ++c) {
            const int p = r * m.W + c;
            const int own = m.regions.at(r, c);
            const auto& co = m.centroids[std::size_t(own)];
            m.g2m_src.push_back(p);
            m.g2m_dst.push_back(own);
            m.g2m_feat.push_back(disp(r, c, co[0], co[1]));

            for (int k = 0; k < m.n_mesh; ++k) {
                const auto& ck = m.centroids[std::size_t(k)];
                const double dr = ck[0] - r, dc = ck[1] - c;
                dist[std::size_t(k)] = {dr * dr + dc * dc, k};
            }
            std::partial_sort(dist.begin(), dist.begin() + k_dec, dist.end());
            for (int j = 0; j < k_dec; ++j) {
                const int k = dist[std::size_t(j)].second;
                const auto& ck = m.centroids[std::size_t(k)];
                m.m2g_src.push_back(k);
                m.m2g_dst.push_back(p);
                m.m2g_feat.push_back(disp(ck[0], ck[1], r, c));
            }
        }
    }
    return m;
}

MeshGraph sample_mesh(const ForecastSample& s, const ForecastConfig& cfg) {
    if (cfg.mesh_from == MeshSource::Last) return build_mesh(ImageView{s.last(), 1, s.H, s.W}, cfg);
    return build_mesh(ImageView{s.window, s.N, s.H, s.W}, cfg);
}

// ---------------------------------------------------------------------------
// Data

SitsCube ndwi_of(const SitsCube& cube) {
    const auto& b = cube.bands();
    if (std::find(b.begin(), b.end(), "NDWI") != b.end()) {
        const int k = cube.band_index("NDWI");
        if (cube.C() == 1) return cube;
        std::vector<float> v;
        for (int t = 0; t < cube.T(); ++t) {
            auto p = cube.plane(t, k);
            v.insert(v.end(), p.begin(), p.end());
        }
        return SitsCube({cube.T(), 1, cube.H(), cube.W()}, std::move(v), cube.timestamps(), {"NDWI"}, cube.geo(),
                        cube.nodata());
    }
    return ndwi(cube, "B03", "B08");
}

std::vector<ForecastSample> make_samples(const SitsCube& nd, const std::string& site, int input_len, int patch) {
    if (nd.C() != 1) throw Error(Errc::ShapeMismatch, "forecast samples need a single-band NDWI cube");
    if (input_len < 1) throw Error(Errc::InvalidArgument, "input_len must be >= 1");
    const int ph = patch > 0 ? patch : nd.H();
    const int pw = patch > 0 ? patch : nd.W();
    if (ph > nd.H() || pw > nd.W()) throw Error(Errc::ShapeMismatch, "patch larger than the frame");
    const auto& g = nd.geo();
    std::vector<ForecastSample> out;
    for (int r0 = 0; r0 + ph <= nd.H(); r0 += ph) {
        for (int c0 = 0; c0 + pw <= nd.W(); c0 += pw) {
            GeoBounds pg;
            pg.lat0 = g.lat0 + (g.lat1 - g.lat0) * r0 / nd.H();
            pg.lat1 = g.lat0 + (g.lat1 - g.lat0) * (r0 + ph) / nd.H();
            pg.lon0 = g.lon0 + (g.lon1 - g.lon0) * c0 / nd.W();
            pg.lon1 = g.lon0 + (g.lon1 - g.lon0) * (c0 + pw) / nd.W();
            for (int t = input_len; t < nd.T(); ++t) {
                ForecastSample s;
                s.H = ph;
                s.W = pw;
                s.N = input_len;
                s.site = site;
                s.geo = pg;
                s.last_date = nd.timestamps()[std::size_t(t - 1)];
                bool ok = true;
                auto crop = [&](int tt, std::vector<float>& dst) {
                    auto plane = nd.plane(tt, 0);
                    for (int r = 0; r < ph; ++r) {
                        for (int c = 0; c < pw; ++c) {
                            const float v = plane[std::size_t(r0 + r) * nd.W() + (c0 + c)];
                            if (nd.is_nodata(v)) ok = false;
                            dst.push_back(v);
                        }
                    }
                };
                for (int k = t - input_len; k < t; ++k) crop(k, s.window);
                crop(t, s.target);
                if (ok) out.push_back(std::move(s));
            }
        }
    }
    return out;
}

SiteSplit site_disjoint_split(const std::vector<ForecastSample>& samples, double train_fraction,
                              std::uint64_t seed) {
    if (samples.empty()) throw Error(Errc::NoData, "no forecast samples to split");
    if (!(train_fraction > 0 && train_fraction < 1)) {
        throw Error(Errc::InvalidArgument, "train fraction must lie in (0, 1)");
    }
    std::vector<std::string> sites;
    for (const auto& s : samples) sites.push_back(s.site);
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    if (sites.size() < 2) throw Error(Errc::NoData, "a site-disjoint split needs at least two sites");
    nn::Rng rng(seed);
    std::shuffle(sites.begin(), sites.end(), rng);
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround((1.0 - train_fraction) * double(sites.size()))), 1, sites.size() - 1);
    const std::set<std::string> val_sites(sites.begin(), sites.begin() + static_cast<long>(n_val));
    SiteSplit split;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (val_sites.count(samples[i].site) ? split.val : split.train).push_back(static_cast<int>(i));
    }
    return split;
}

void check_site_disjoint(const std::vector<ForecastSample>& a, const std::vector<ForecastSample>& b) {
    std::set<std::string> sa;
    for (const auto& s : a) sa.insert(s.site);
    for (const auto& s : b) {
        if (sa.count(s.site)) throw Error(Errc::SiteLeakage, "site '" + s.site + "' appears on both sides of the split");
    }
}

std::vector<float> baseline_persistence(const ForecastSample& s) {
    if (s.N < 1) throw Error(Errc::NoData, "empty window");
    auto l = s.last();
    return {l.begin(), l.end()};
}

std::vector<float> baseline_average(const ForecastSample& s) {
    if (s.N < 1) throw Error(Errc::NoData, "empty window");
    const std::size_t hw = std::size_t(s.H) * s.W;
    std::vector<double> acc(hw, 0.0);
    for (int k = 0; k < s.N; ++k) {
        auto f = s.frame(k);
        for (std::size_t i = 0; i < hw; ++i) acc[i] += f[i];
    }
    std::vector<float> out(hw);
    for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<float>(acc[i] / s.N);
    return out;
}

double huber_loss(std::span<const float> pred, std::span<const float> target, double delta) {
    if (pred.size() != target.size() || pred.empty()) throw Error(Errc::ShapeMismatch, "huber inputs differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double a = std::abs(double(pred[i]) - double(target[i]));
        s += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
    }
    return s / double(pred.size());
}

// ---------------------------------------------------------------------------
// Model

namespace nn {

namespace {

template <class T>
Mat<T> feat_matrix(const std::vector<std::array<float, 2>>& f) {
    Mat<T> m(static_cast<Eigen::Index>(f.size()), 2);
    for (std::size_t k = 0; k < f.size(); ++k) {
        m(static_cast<Eigen::Index>(k), 0) = f[k][0];
        m(static_cast<Eigen::Index>(k), 1) = f[k][1];
    }
    return m;
}

}  // namespace

template <class T>
ForecastInput<T> prepare_forecast(const ForecastSample& s, const MeshGraph& mesh, const ForecastConfig& cfg) {
    if (s.N != cfg.input_len) {
        throw Error(Errc::LengthMismatch, "sample window has " + std::to_string(s.N) + " frames, model expects " +
                                              std::to_string(cfg.input_len));
    }
    if (mesh.H != s.H || mesh.W != s.W) {
        throw Error(Errc::MeshMismatch, "mesh is " + std::to_string(mesh.H) + "x" + std::to_string(mesh.W) +
                                            ", frame is " + std::to_string(s.H) + "x" + std::to_string(s.W));
    }
    const int P = s.H * s.W;
    ForecastInput<T> in;
    in.H = s.H;
    in.W = s.W;
    in.n_mesh = mesh.n_mesh;
    in.series.resize(P, s.N);
    in.last.resize(P, 1);
    in.pos.resize(P, 4);
    for (int p = 0; p < P; ++p) {
        for (int k = 0; k < s.N; ++k) in.series(p, k) = static_cast<T>(s.window[std::size_t(k) * P + p]);
        in.last(p, 0) = in.series(p, s.N - 1);
        const auto pe = pos_encoding(pixel_geo(s.geo, s.H, s.W, p / s.W, p % s.W, s.last_date));
        for (int j = 0; j < 4; ++j) in.pos(p, j) = static_cast<T>(pe[std::size_t(j)]);
    }
    in.g2m = EdgeIndex<T>(mesh.g2m_src, mesh.g2m_dst, mesh.n_mesh, cfg.mean_aggregation);
    in.proc = EdgeIndex<T>(mesh.proc_src, mesh.proc_dst, mesh.n_mesh, cfg.mean_aggregation);
    in.m2g = EdgeIndex<T>(mesh.m2g_src, mesh.m2g_dst, P, cfg.mean_aggregation);
    in.g2m_feat = feat_matrix<T>(mesh.g2m_feat);
    in.proc_feat = feat_matrix<T>(mesh.proc_feat);
    in.m2g_feat = feat_matrix<T>(mesh.m2g_feat);
    return in;
}

template <class T>
ForecastModel<T>::ForecastModel(const ForecastConfig& cfg, bool zero_head) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const int h = cfg_.hidden;
    mlp_ts_ = Mlp<T>(cfg_.input_len, h / 2, h / 2, rng);
    mlp_pos_ = Mlp<T>(4, h / 2, h / 2, rng);
    mlp_mix_ = Mlp<T>(h, h, h, rng);
    embed_g2m_ = Linear<T>(2, h, rng);
    embed_proc_ = Linear<T>(2, h, rng);
    embed_m2g_ = Linear<T>(2, h, rng);
    g2m_ = GnBlock<T>(h, h, h, rng);
    for (int r = 0; r < cfg_.processor_rounds; ++r) proc_.emplace_back(h, h, h, rng);
    m2g_ = GnBlock<T>(h, h, h, rng);
    head_ = Linear<T>(h, 1, rng);
    if (zero_head) head_.zero();
}

template <class T>
Var<T> ForecastModel<T>::pixel_embedding(Tape<T>& tp, const Var<T>& series, const Var<T>& pos) const {
    if (series->cols() != cfg_.input_len) {
        throw Error(Errc::LengthMismatch, "series has " + std::to_string(series->cols()) + " steps, model expects " +
                                              std::to_string(cfg_.input_len));
    }
    auto a = mlp_ts_.forward(tp, series);
    auto b = mlp_pos_.forward(tp, pos);
    return mlp_mix_.forward(tp, concat_cols<T>(tp, {a, b}));
}

template <class T>
Var<T> ForecastModel<T>::forward(Tape<T>& tp, const ForecastInput<T>& in) const {
    const int P = in.H * in.W;
    if (in.series.rows() != P || static_cast<int>(in.m2g.aggregate->rows()) != P ||
        static_cast<int>(in.g2m.aggregate->rows()) != in.n_mesh) {
        throw Error(Errc::MeshMismatch, "forecast input and mesh disagree on sizes");
    }
    auto x_pix = pixel_embedding(tp, make_var<T>(in.series), make_var<T>(in.pos));
    auto x_mesh = make_var<T>(Mat<T>::Zero(in.n_mesh, cfg_.hidden));

    auto e = embed_g2m_.forward(tp, make_var<T>(in.g2m_feat));
    x_mesh = g2m_.forward(tp, x_pix, x_mesh, e, in.g2m).first;

    auto ep = embed_proc_.forward(tp, make_var<T>(in.proc_feat));
    for (const auto& block : proc_) {
        auto [x_new, e_new] = block.forward(tp, x_mesh, x_mesh, ep, in.proc);
        x_mesh = x_new;
        ep = e_new;
    }

    auto ed = embed_m2g_.forward(tp, make_var<T>(in.m2g_feat));
    x_pix = m2g_.forward(tp, x_mesh, x_pix, ed, in.m2g).first;

    auto delta = head_.forward(tp, x_pix);
    return clamp(tp, add(tp, make_var<T>(in.last), delta), T(-1), T(1));
}

template <class T>
ParamList<T> ForecastModel<T>::params() const {
    ParamList<T> out;
    mlp_ts_.collect(out, "mlp_ts");
    mlp_pos_.collect(out, "mlp_pos");
    mlp_mix_.collect(out, "mlp_mix");
    embed_g2m_.collect(out, "embed_g2m");
    embed_proc_.collect(out, "embed_proc");
    embed_m2g_.collect(out, "embed_m2g");
    g2m_.collect(out, "g2m");
    for (std::size_t r = 0; r < proc_.size(); ++r) proc_[r].collect(out, "proc" + std::to_string(r));
    m2g_.collect(out, "m2g");
    head_.collect(out, "head");
    return out;
}

template <class T>
void ForecastModel<T>::zero() {
    for (auto& [name, p] : params()) p->value.setZero();
}

template ForecastInput<float> prepare_forecast<float>(const ForecastSample&, const MeshGraph&, const ForecastConfig&);
template ForecastInput<double> prepare_forecast<double>(const ForecastSample&, const MeshGraph&,
                                                        const ForecastConfig&);
template class ForecastModel<float>;
template class ForecastModel<double>;

}  // namespace nn

std::vector<float> forecast_predict(const nn::ForecastModel<float>& model, const ForecastSample& s,
                                    const MeshGraph& mesh) {
    const auto in = nn::prepare_forecast<float>(s, mesh, model.config());
    nn::Tape<float> tp(false);
    const auto out = model.forward(tp, in);
    return {out->value.data(), out->value.data() + out->value.size()};
}

std::vector<float> forecast_predict(const nn::ForecastModel<float>& model, const ForecastSample& s) {
    return forecast_predict(model, s, sample_mesh(s, model.config()));
}

json ForecastTrainResult::log_json() const {
    json out = json::array();
    for (const auto& e : log) {
        out.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"val_rmse", e.val_rmse},
                       {"lr", e.lr}});
    }
    return out;
}

namespace {

using Inputs = std::vector<nn::ForecastInput<float>>;

Inputs prepare_all(const std::vector<ForecastSample>& samples, const ForecastConfig& cfg) {
    Inputs out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        out[i] = nn::prepare_forecast<float>(samples[i], sample_mesh(samples[i], cfg), cfg);
    });
    return out;
}

nn::Mat<float> target_of(const ForecastSample& s) {
    if (s.target.size() != std::size_t(s.H) * s.W) throw Error(Errc::NoData, "sample has no target frame");
    return Eigen::Map<const nn::Mat<float>>(s.target.data(), static_cast<Eigen::Index>(s.target.size()), 1);
}

}  // namespace

ForecastTrainResult train_forecaster(const std::vector<ForecastSample>& train, const std::vector<ForecastSample>& val,
                                     const ForecastConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw Error(Errc::NoData, "no training samples");
    if (val.empty()) throw Error(Errc::NoData, "no validation samples");
    check_site_disjoint(train, val);

    const Inputs tr = prepare_all(train, cfg);
    const Inputs va = prepare_all(val, cfg);
    std::vector<nn::Mat<float>> tr_y, va_y;
    for (const auto& s : train) tr_y.push_back(target_of(s));
    for (const auto& s : val) va_y.push_back(target_of(s));

    nn::ForecastModel<float> model(cfg);
    nn::Adam<float> opt(model.params(), cfg.lr);
    nn::PlateauScheduler sched;
    nn::Rng order_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto delta = static_cast<float>(cfg.huber_delta);

    auto validate = [&](double& loss, double& rmse_mean) {
        loss = 0.0;
        rmse_mean = 0.0;
        for (std::size_t i = 0; i < va.size(); ++i) {
            nn::Tape<float> tp(false);
            const auto pred = model.forward(tp, va[i]);
            const std::span<const float> p(pred->value.data(), std::size_t(pred->value.size()));
            loss += huber_loss(p, val[i].target, cfg.huber_delta);
            rmse_mean += rmse(p, val[i].target);
        }
        loss /= double(va.size());
        rmse_mean /= double(va.size());
    };

    ForecastTrainResult res;
    auto snapshot = [&](int epoch, double val_loss, double val_rmse) {
        nn::Checkpoint ck;
        ck.header = {{"kind", "forecaster"},
                     {"config", cfg.to_json()},
                     {"epoch", epoch},
                     {"metrics", {{"val_loss", val_loss}, {"val_rmse", val_rmse}}}};
        nn::store_model<float>(ck, model.params(), {});
        return ck;
    };

    double v_loss = 0.0, v_rmse = 0.0;
    validate(v_loss, v_rmse);
    res.best_val_loss = v_loss;
    res.best_epoch = 0;
    res.checkpoint = snapshot(0, v_loss, v_rmse);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += std::size_t(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + std::size_t(cfg.batch_size));
            opt.zero_grad();
            for (std::size_t b = b0; b < b1; ++b) {
                const std::size_t i = order[b];
                nn::Tape<float> tp;
                const auto pred = model.forward(tp, tr[i]);
                auto loss = nn::huber<float>(tp, pred, tr_y[i], delta);
                loss_sum += loss->value(0, 0);
                if (b1 - b0 > 1) loss = nn::scale<float>(tp, loss, 1.0f / float(b1 - b0));
                tp.backward(loss);
            }
            opt.step();
        }
        validate(v_loss, v_rmse);
        ForecastEpoch e{epoch, loss_sum / double(order.size()), v_loss, v_rmse, opt.lr()};
        res.log.push_back(e);
        if (v_loss < res.best_val_loss) {
            res.best_val_loss = v_loss;
            res.best_epoch = epoch;
            res.checkpoint = snapshot(epoch, v_loss, v_rmse);
        }
        opt.set_lr(sched.step(v_loss, opt.lr()));
    }
    return res;
}

nn::ForecastModel<float> forecaster_from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.header.value("kind", "") != "forecaster") {
        throw Error(Errc::ConfigMismatch, "checkpoint does not hold a forecaster");
    }
    nn::ForecastModel<float> model(ForecastConfig::from_json(ck.header.at("config")));
    nn::load_model<float>(ck, model.params(), {});
    return model;
}

json ForecastScores::to_json() const {
    return {{"model", model.to_json()}, {"persistence", persistence.to_json()}, {"average", average.to_json()}};
}

ForecastScores evaluate_forecaster(const nn::ForecastModel<float>& model, const std::vector<ForecastSample>& samples) {
    if (samples.empty()) throw Error(Errc::NoData, "no samples to evaluate");
    std::vector<ImageScores> m(samples.size()), p(samples.size()), a(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        if (s.target.empty()) throw Error(Errc::NoData, "sample has no target frame");
        m[i] = rmse_psnr_ssim(forecast_predict(model, s), s.target, s.H, s.W);
        p[i] = rmse_psnr_ssim(baseline_persistence(s), s.target, s.H, s.W);
        a[i] = rmse_psnr_ssim(baseline_average(s), s.target, s.H, s.W);
    });
    auto mean = [](const std::vector<ImageScores>& v) {
        ImageScores r;
        for (const auto& x : v) {
            r.rmse += x.rmse;
            r.psnr += x.psnr;
            r.ssim += x.ssim;
        }
        r.rmse /= double(v.size());
        r.psnr /= double(v.size());
        r.ssim /= double(v.size());
        return r;
    };
    return {mean(m), mean(p), mean(a)};
}

}  // namespace sitsgraph
