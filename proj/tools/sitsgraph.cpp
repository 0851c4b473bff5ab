// sitsgraph command-line front end.
//
// Exit codes: 0 success, 2 usage error, 1 data error. Every run writes
// run_config.json next to its outputs; `sitsgraph replay FILE` re-executes it.

#include "sitsgraph/analysis.hpp"
#include "sitsgraph/datacube.hpp"
#include "sitsgraph/error.hpp"
#include "sitsgraph/features.hpp"
#include "sitsgraph/forecast.hpp"
#include "sitsgraph/metrics.hpp"
#include "sitsgraph/nn/classifier.hpp"
#include "sitsgraph/parallel.hpp"
#include "sitsgraph/segmentation.hpp"
#include "sitsgraph/stgraph.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace sitsgraph;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
    out << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::MissingFile, "cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, file.string() + ": " + e.what());
    }
}

// "name" or "name:arg" edge-builder specs.
struct EdgeSpec {
    std::string kind;
    std::optional<double> arg;
    std::string text;
};

EdgeSpec parse_edge_spec(const std::string& text, const std::string& flag) {
    EdgeSpec s;
    const auto colon = text.find(':');
    s.kind = text.substr(0, colon);
    if (colon != std::string::npos) {
        const std::string a = text.substr(colon + 1);
        s.text = a;
        double v = 0;
        const auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), v);
        if (ec != std::errc() || ptr != a.data() + a.size()) {
            throw UsageError(flag + " " + text + ": argument '" + a + "' is not a number");
        }
        s.arg = v;
    }
    return s;
}

int int_arg(const EdgeSpec& s, const std::string& flag, int min_value) {
    if (!s.arg) throw UsageError(flag + " " + s.kind + " needs an argument, e.g. " + s.kind + ":" +
                                 std::to_string(min_value));
    const double v = *s.arg;
    if (v != static_cast<double>(static_cast<long>(v)) || v < min_value) {
        throw UsageError(flag + " " + s.kind + ":" + s.text + " must be an integer >= " +
                         std::to_string(min_value));
    }
    return static_cast<int>(v);
}

// Records every option of the subcommand with its effective value.
json collect_options(const CLI::App* sub) {
    json args = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty()) continue;
        if (opt->get_type_size() == 0) {
            args[name] = opt->count() > 0;
            continue;
        }
        if (opt->count() > 0) {
            const auto r = opt->results();
            args[name] = opt->get_expected_max() > 1 ? json(r) : json(r.back());
        } else if (opt->get_expected_max() > 1) {
            args[name] = json::array();
        } else if (!opt->get_default_str().empty()) {
            args[name] = opt->get_default_str();
        }
    }
    return args;
}

struct Context {
    std::vector<std::string> command;
    const CLI::App* sub = nullptr;
    std::optional<unsigned> threads;
};

void write_run_config(const Context& ctx, const fs::path& dir) {
    json cfg = {{"tool", "sitsgraph"},
                {"version", kVersion},
                {"command", ctx.command},
                {"args", collect_options(ctx.sub)}};
    if (ctx.threads) cfg["threads"] = *ctx.threads;
    write_json(dir / "run_config.json", cfg);
}

fs::path ensure_dir(const std::string& d) {
    fs::path p(d);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------
// Options

struct SynthOpts {
    std::string kind = "seasonal";
    std::uint64_t seed = 0;
    std::string out;
    int T = -1, H = 32, W = 32, blobs = 6, period = 6, cells = 8, cell_px = 4;
    double noise = 0.02;
};

struct SegmentOpts {
    std::string cube, out, algo = "felzenszwalb";
    double scale = 100.0, compactness = 0.1;
    int min_size = 5, segments = 256, iters = 10;
    std::vector<std::string> bands;
};

struct FeaturesOpts {
    std::string cube, seg, out;
    bool geom = false;
};

struct BuildGraphOpts {
    std::string cube, seg, features, out;
    std::string spatial = "adjacency";
    std::vector<std::string> st{"overlap"};
};

struct GraphOpts {
    std::string graph, out;
};

struct StatsOpts {
    std::string graph, out;
    int fv = -1, fe = 0;
    bool no_map = false;
    std::string seg;
};

struct MineOpts {
    std::string graph, out;
    int feature = 0, bins = 4, minsup = 2, maxlen = 0;
};

struct ExportOpts {
    std::string graph, out, format = "json";
};

struct TrainOpts {
    std::string task = "classify", conv = "sage", out;
    std::vector<std::string> graphs, val_graphs;
    int hidden = 64, layers = 4, epochs = 100;
    double lr = 1e-4;
    std::uint64_t seed = 0;
};

struct PredictOpts {
    std::string model, graph, seg, out;
};

struct EvalOpts {
    std::string model, graph, seg, cube, out;
};

struct ForecastTrainOpts {
    std::vector<std::string> cubes;
    std::string out, mesh_from = "last", aggregation = "sum";
    int input_len = 6, segments = 256, hidden = 64, rounds = 4, epochs = 50, patch = 0, batch = 1;
    double compactness = 0.1, lr = 1e-4, train_fraction = 0.85;
    std::uint64_t seed = 0;
};

struct ForecastPredictOpts {
    std::string checkpoint, cube, out;
    int target_index = -1;
};

// ---------------------------------------------------------------------------
// Commands

void run_synth(const SynthOpts& o, const Context& ctx) {
    const auto dir = ensure_dir(o.out);
    SyntheticScene scene;
    if (o.kind == "seasonal") {
        SeasonalSpec s;
        if (o.T > 0) s.T = o.T;
        s.H = o.H;
        s.W = o.W;
        s.n_blobs = o.blobs;
        s.period_dates = o.period;
        s.noise_sigma = o.noise;
        scene = synth_seasonal(o.seed, s);
    } else if (o.kind == "context") {
        ContextSpec s;
        if (o.T > 0) s.T = o.T;
        s.cells = o.cells;
        s.cell_px = o.cell_px;
        scene = synth_context(o.seed, s);
    } else {
        throw UsageError("--kind must be seasonal or context");
    }
    save_cube(scene.cube, dir);
    save_labels(scene.labels, dir);
    write_run_config(ctx, dir);
}

void run_segment(const SegmentOpts& o, const Context& ctx) {
    SegParams p;
    if (o.algo == "felzenszwalb") {
        p.algorithm = SegAlgorithm::Felzenszwalb;
    } else if (o.algo == "slic") {
        p.algorithm = SegAlgorithm::Slic;
    } else {
        throw UsageError("--algo must be felzenszwalb or slic");
    }
    p.scale = o.scale;
    p.min_size = o.min_size;
    p.n_segments = o.segments;
    p.compactness = o.compactness;
    p.iters = o.iters;
    const auto cube = load_cube(o.cube);
    for (const auto& b : o.bands) p.bands.push_back(cube.band_index(b));
    const auto seg = segment_cube(cube, p);
    const auto dir = ensure_dir(o.out);
    save_seg(seg, dir);
    write_run_config(ctx, dir);
}

void run_features(const FeaturesOpts& o, const Context& ctx) {
    const auto cube = load_cube(o.cube);
    const auto seg = load_seg(o.seg);
    auto fm = band_stats(cube, seg);
    if (o.geom) fm = hconcat(fm, geom_features(seg));
    for (int r : fm.all_nodata_rows) std::cerr << "warning: object " << r << " has only nodata pixels\n";
    const auto dir = ensure_dir(o.out);
    write_features_csv(fm, dir / "features.csv");
    write_run_config(ctx, dir);
}

void run_build_graph(const BuildGraphOpts& o, const Context& ctx) {
    // Validate the edge specs before touching any data.
    const auto sp = parse_edge_spec(o.spatial, "--spatial");
    int sp_arg = 0;
    double eps = 0.0;
    if (sp.kind == "adjacency") {
        if (sp.arg) throw UsageError("--spatial adjacency takes no argument");
    } else if (sp.kind == "eps") {
        if (!sp.arg || !(*sp.arg > 0)) throw UsageError("--spatial eps:R needs R > 0");
        eps = *sp.arg;
    } else if (sp.kind == "knn" || sp.kind == "sim") {
        sp_arg = int_arg(sp, "--spatial", 1);
    } else {
        throw UsageError("--spatial must be adjacency, eps:R, knn:K or sim:K");
    }
    std::vector<std::pair<EdgeSpec, int>> st;
    for (const auto& s : o.st) {
        const auto e = parse_edge_spec(s, "--st");
        int arg = 1;
        if (e.kind == "overlap") {
            if (e.arg) arg = int_arg(e, "--st", 1);
        } else if (e.kind == "sim") {
            arg = int_arg(e, "--st", 1);
        } else if (e.kind == "periodic") {
            arg = int_arg(e, "--st", 2);
        } else {
            throw UsageError("--st must be overlap[:MIN], sim:K or periodic:LAG");
        }
        st.emplace_back(e, arg);
    }

    const auto cube = load_cube(o.cube);
    const auto seg = load_seg(o.seg);
    if (seg.T() != cube.T() || seg.H() != cube.H() || seg.W() != cube.W()) {
        throw Error(Errc::ShapeMismatch, "segmentation does not match the cube");
    }
    const auto fm = read_features_csv(o.features);
    if (fm.rows != seg.total()) {
        throw Error(Errc::DimMismatch, "features have " + std::to_string(fm.rows) + " rows, segmentation has " +
                                           std::to_string(seg.total()) + " objects");
    }
    std::optional<LabelStack> labels;
    if (has_labels(o.cube)) labels = load_labels(o.cube, cube.T(), cube.H(), cube.W());
    auto nodes = nodes_from_seg(seg, labels ? &*labels : nullptr);

    std::vector<Edge> edges;
    auto append = [&](std::vector<Edge> e) { edges.insert(edges.end(), e.begin(), e.end()); };
    const auto by_date = nodes_by_date(nodes);
    if (sp.kind == "adjacency") {
        for (int t = 0; t < seg.T(); ++t) append(adjacency_edges(seg, t));
    } else if (sp.kind == "eps") {
        for (const auto& d : by_date) append(eps_ball_edges(d, eps));
    } else if (sp.kind == "knn") {
        for (const auto& d : by_date) append(knn_edges(d, sp_arg));
    } else {
        append(similarity_edges(fm, nodes, SimilarityScope::WithinDate, sp_arg));
    }
    for (const auto& [e, arg] : st) {
        if (e.kind == "overlap") {
            append(overlap_edges(seg, arg));
        } else if (e.kind == "sim") {
            append(similarity_edges(fm, nodes, SimilarityScope::CrossDate, arg));
        } else {
            append(periodic_edges(seg, arg));
        }
    }
    json meta = {{"cube_shape", {{"T", cube.T()}, {"C", cube.C()}, {"H", cube.H()}, {"W", cube.W()}}},
                 {"spatial", o.spatial},
                 {"st", o.st}};
    const StGraph g(std::move(nodes), std::move(edges), fm, meta);
    const auto dir = ensure_dir(o.out);
    save_graph(g, dir / "graph.json");
    write_run_config(ctx, dir);
}

CubeShape shape_from_meta(const StGraph& g) {
    if (!g.meta().contains("cube_shape")) throw Error(Errc::InvalidSpec, "graph lacks cube_shape metadata");
    const auto& s = g.meta()["cube_shape"];
    return {s.at("T").get<int>(), s.at("C").get<int>(), s.at("H").get<int>(), s.at("W").get<int>()};
}

void run_stats(const StatsOpts& o, const Context& ctx) {
    const auto g = load_graph(o.graph);
    const auto shape = shape_from_meta(g);
    const int fv = o.fv >= 0 ? o.fv : g.features().dim;
    const auto st = graph_stats(g, shape, fv, o.fe, !o.no_map);
    json j = st.to_json();
    if (!o.seg.empty()) {
        const auto seg = load_seg(o.seg);
        const auto bytes = serialize_compact(g, o.no_map ? nullptr : &seg, o.fe);
        j["serialized_bytes"] = bytes.size();
        j["raw_bytes"] = shape.size() * sizeof(float);
        j["measured_ratio"] = double(shape.size() * sizeof(float)) / double(bytes.size());
    }
    std::map<std::string, int> counts;
    for (auto k : {EventKind::Appearance, EventKind::Disappearance, EventKind::Split, EventKind::Merge,
                   EventKind::Continuation}) {
        counts[std::string(event_name(k))] = 0;
    }
    for (const auto& e : detect_events(g)) ++counts[std::string(event_name(e.event))];
    j["events"] = counts;

    std::printf("%-20s %14zu\n", "nodes", st.n_nodes);
    std::printf("%-20s %14zu\n", "spatial edges", st.n_spatial);
    std::printf("%-20s %14zu\n", "st edges", st.n_st);
    for (std::size_t t = 0; t < st.nodes_per_date.size(); ++t) {
        std::printf("%-20s %14d\n", ("nodes at date " + std::to_string(t)).c_str(), st.nodes_per_date[t]);
    }
    std::printf("%-20s %14.0f\n", "raw units", st.raw_units);
    std::printf("%-20s %14.0f\n", "graph units", st.graph_units);
    std::printf("%-20s %14.3f\n", "compression ratio", st.compression_ratio);
    if (j.contains("measured_ratio")) std::printf("%-20s %14.3f\n", "measured ratio", j["measured_ratio"].get<double>());
    for (const auto& [name, n] : counts) std::printf("%-20s %14d\n", ("events " + name).c_str(), n);

    const auto dir = ensure_dir(o.out);
    write_json(dir / "stats.json", j);
    write_run_config(ctx, dir);
}

void run_events(const GraphOpts& o, const Context& ctx) {
    const auto g = load_graph(o.graph);
    const auto ev = detect_events(g);
    const auto dir = ensure_dir(o.out);
    write_text(dir / "events.csv", events_to_csv(ev));
    write_json(dir / "events.json", events_to_json(ev));
    write_run_config(ctx, dir);
}

void run_mine(const MineOpts& o, const Context& ctx) {
    if (o.bins < 2) throw UsageError("--bins must be >= 2");
    if (o.minsup < 1) throw UsageError("--minsup must be >= 1");
    const auto g = load_graph(o.graph);
    const auto sym = symbolize(g.features(), o.feature, o.bins);
    if (sym.degenerate) std::cerr << "warning: feature " << o.feature << " is constant; every symbol is 0\n";
    const auto patterns = mine_frequent(g, node_symbols(g, sym), o.minsup, o.maxlen);
    const auto dir = ensure_dir(o.out);
    write_text(dir / "patterns.csv", patterns_to_csv(patterns));
    write_json(dir / "patterns.json", {{"bin_edges", sym.bin_edges}, {"patterns", patterns_to_json(patterns)}});
    write_run_config(ctx, dir);
}

void run_export(const ExportOpts& o, const Context& ctx) {
    GraphFormat f;
    std::string ext;
    if (o.format == "json") {
        f = GraphFormat::Json;
        ext = "json";
    } else if (o.format == "graphml") {
        f = GraphFormat::GraphMl;
        ext = "graphml";
    } else if (o.format == "dot") {
        f = GraphFormat::Dot;
        ext = "dot";
    } else {
        throw UsageError("--format must be json, graphml or dot");
    }
    const auto g = load_graph(o.graph);
    const auto dir = ensure_dir(o.out);
    write_text(dir / ("graph." + ext), export_graph(g, f));
    write_run_config(ctx, dir);
}

void run_train(const TrainOpts& o, const Context& ctx) {
    if (o.task != "classify") throw UsageError("--task must be classify (use `forecast train` for forecasting)");
    nn::ClassifierConfig cfg;
    try {
        cfg.conv = nn::parse_conv_kind(o.conv);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    cfg.hidden = o.hidden;
    cfg.n_layers = o.layers;
    cfg.lr = o.lr;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    std::vector<StGraph> tr, va;
    for (const auto& p : o.graphs) tr.push_back(load_graph(p));
    for (const auto& p : o.val_graphs) va.push_back(load_graph(p));
    std::vector<const StGraph*> trp, vap;
    for (const auto& g : tr) trp.push_back(&g);
    for (const auto& g : va) vap.push_back(&g);
    const auto res = nn::train_classifier(trp, vap, cfg);
    const auto dir = ensure_dir(o.out);
    nn::save_checkpoint(res.checkpoint, dir / "model.ckpt");
    write_json(dir / "train_log.json",
               {{"best_epoch", res.best_epoch}, {"best_val_miou", res.best_val_miou}, {"epochs", res.log_json()}});
    write_run_config(ctx, dir);
}

// Per-pixel predicted class from node predictions.
LabelStack pixel_predictions(const StGraph& g, const SegStack& seg, const std::vector<int>& node_pred) {
    std::vector<int> by_id(std::size_t(seg.total()), -1);
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
        const int id = g.nodes()[i].id;
        if (id < 0 || id >= seg.total()) throw Error(Errc::UnknownNode, "graph node " + std::to_string(id) + " not in segmentation");
        by_id[std::size_t(id)] = node_pred[i];
    }
    LabelStack out(seg.T(), seg.H(), seg.W(), -1);
    for (std::size_t p = 0; p < out.data.size(); ++p) out.data[p] = by_id[std::size_t(seg.labels.data[p])];
    return out;
}

std::vector<int> classify_graph(const fs::path& model, const StGraph& g) {
    auto loaded = nn::classifier_from_checkpoint(nn::load_checkpoint(model));
    const auto in = nn::prepare_graph<float>(g, loaded.stats, loaded.model.config().conv);
    return nn::predict_nodes(loaded.model, in);
}

void run_predict(const PredictOpts& o, const Context& ctx) {
    const auto g = load_graph(o.graph);
    const auto pred = classify_graph(o.model, g);
    const auto dir = ensure_dir(o.out);
    std::ostringstream csv;
    csv << "node,t,class\n";
    for (std::size_t i = 0; i < pred.size(); ++i) csv << g.nodes()[i].id << ',' << g.nodes()[i].t << ',' << pred[i] << '\n';
    write_text(dir / "predictions.csv", csv.str());
    if (!o.seg.empty()) {
        const auto seg = load_seg(o.seg);
        const auto px = pixel_predictions(g, seg, pred);
        for (int t = 0; t < px.T; ++t) write_i32(dir / ("pred_t" + std::to_string(t) + ".bin"), px.plane(t));
    }
    write_run_config(ctx, dir);
}

void run_eval(const EvalOpts& o, const Context& ctx) {
    const auto g = load_graph(o.graph);
    const auto seg = load_seg(o.seg);
    const auto cube = load_cube(o.cube);
    if (!has_labels(o.cube)) throw Error(Errc::NoLabels, o.cube + " has no label maps");
    const auto labels = load_labels(o.cube, cube.T(), cube.H(), cube.W());
    auto loaded = nn::classifier_from_checkpoint(nn::load_checkpoint(o.model));
    const int K = loaded.model.config().n_classes;
    const auto in = nn::prepare_graph<float>(g, loaded.stats, loaded.model.config().conv);
    const auto pred = nn::predict_nodes(loaded.model, in);
    const auto px = pixel_predictions(g, seg, pred);
    ConfusionMatrix cm(K);
    for (std::size_t p = 0; p < px.data.size(); ++p) {
        const int y = labels.data[p];
        if (y >= K) throw Error(Errc::DimMismatch, "label " + std::to_string(y) + " exceeds the model's classes");
        cm.add(y, px.data[p]);
    }
    const auto scores = iou_oa(cm);
    std::vector<std::string> names;
    for (int c = 0; c < K; ++c) names.push_back("class_" + std::to_string(c));
    json report = scores.to_json();
    report["majority_upper_bound"] = majority_upper_bound(seg, labels);
    report["evaluated_pixels"] = cm.total();
    report["ignored_pixels"] = cm.ignored();
    const auto dir = ensure_dir(o.out);
    write_json(dir / "eval.json", report);
    write_text(dir / "iou.csv", iou_table_csv(scores, names));
    write_run_config(ctx, dir);
}

ForecastConfig forecast_config(const ForecastTrainOpts& o) {
    ForecastConfig c;
    c.input_len = o.input_len;
    c.n_segments = o.segments;
    c.compactness = o.compactness;
    c.hidden = o.hidden;
    c.processor_rounds = o.rounds;
    c.lr = o.lr;
    c.epochs = o.epochs;
    c.batch_size = o.batch;
    c.seed = o.seed;
    if (o.mesh_from != "last" && o.mesh_from != "stack") throw UsageError("--mesh-from must be last or stack");
    c.mesh_from = o.mesh_from == "last" ? MeshSource::Last : MeshSource::Stack;
    if (o.aggregation != "sum" && o.aggregation != "mean") throw UsageError("--aggregation must be sum or mean");
    c.mean_aggregation = o.aggregation == "mean";
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

void run_forecast_train(const ForecastTrainOpts& o, const Context& ctx) {
    const auto cfg = forecast_config(o);
    std::vector<ForecastSample> all;
    for (const auto& c : o.cubes) {
        const auto nd = ndwi_of(load_cube(c));
        auto s = make_samples(nd, fs::path(c).lexically_normal().filename().string(), cfg.input_len, o.patch);
        all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    const auto split = site_disjoint_split(all, o.train_fraction, cfg.seed);
    std::vector<ForecastSample> tr, va;
    for (int i : split.train) tr.push_back(all[std::size_t(i)]);
    for (int i : split.val) va.push_back(all[std::size_t(i)]);
    const auto res = train_forecaster(tr, va, cfg);
    const auto dir = ensure_dir(o.out);
    nn::save_checkpoint(res.checkpoint, dir / "model.ckpt");
    std::vector<std::string> tr_sites, va_sites;
    for (const auto& s : tr) tr_sites.push_back(s.site);
    for (const auto& s : va) va_sites.push_back(s.site);
    for (auto* v : {&tr_sites, &va_sites}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    write_json(dir / "train_log.json", {{"best_epoch", res.best_epoch},
                                        {"best_val_loss", res.best_val_loss},
                                        {"train_sites", tr_sites},
                                        {"val_sites", va_sites},
                                        {"epochs", res.log_json()}});
    write_run_config(ctx, dir);
}

void run_forecast_predict(const ForecastPredictOpts& o, const Context& ctx) {
    const auto model = forecaster_from_checkpoint(nn::load_checkpoint(o.checkpoint));
    const auto& cfg = model.config();
    const auto nd = ndwi_of(load_cube(o.cube));
    const int N = cfg.input_len;
    const int end = o.target_index >= 0 ? o.target_index : nd.T();
    if (end < N || end > nd.T() || (o.target_index >= 0 && o.target_index >= nd.T())) {
        throw Error(Errc::LengthMismatch, "need " + std::to_string(N) + " input frames before index " +
                                              std::to_string(end) + " in a cube of " + std::to_string(nd.T()));
    }
    ForecastSample s;
    s.H = nd.H();
    s.W = nd.W();
    s.N = N;
    s.geo = nd.geo();
    s.last_date = nd.timestamps()[std::size_t(end - 1)];
    for (int t = end - N; t < end; ++t) {
        auto p = nd.plane(t, 0);
        s.window.insert(s.window.end(), p.begin(), p.end());
    }
    for (float v : s.window) {
        if (nd.is_nodata(v)) throw Error(Errc::NoData, "input window contains nodata");
    }
    const auto pred = forecast_predict(model, s);
    const fs::path out(o.out);
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    fs::create_directories(dir);
    write_f32(out, pred);
    json metrics = {{"H", s.H}, {"W", s.W}, {"input_end", end}};
    if (o.target_index >= 0) {
        auto tgt = nd.plane(end, 0);
        metrics["model"] = rmse_psnr_ssim(pred, tgt, s.H, s.W).to_json();
        metrics["persistence"] = rmse_psnr_ssim(baseline_persistence(s), tgt, s.H, s.W).to_json();
        metrics["average"] = rmse_psnr_ssim(baseline_average(s), tgt, s.H, s.W).to_json();
    }
    write_json(fs::path(out).replace_extension(".json"), metrics);
    write_run_config(ctx, dir);
}

// ---------------------------------------------------------------------------

int dispatch(std::vector<std::string> args);

int run_replay(const std::string& file) {
    const json cfg = read_json(file);
    if (!cfg.contains("command") || !cfg.contains("args")) {
        throw UsageError(file + " is not a run_config.json (needs command and args)");
    }
    for (const auto& [k, v] : cfg.items()) {
        if (k != "tool" && k != "version" && k != "command" && k != "args" && k != "threads") {
            throw UsageError("unknown key '" + k + "' in " + file);
        }
    }
    std::vector<std::string> argv{"sitsgraph"};
    if (cfg.contains("threads")) {
        argv.push_back("--threads");
        argv.push_back(std::to_string(cfg["threads"].get<unsigned>()));
    }
    for (const auto& c : cfg["command"]) argv.push_back(c.get<std::string>());
    for (const auto& [k, v] : cfg["args"].items()) {
        if (v.is_boolean()) {
            if (v.get<bool>()) argv.push_back("--" + k);
        } else if (v.is_array()) {
            for (const auto& x : v) argv.push_back("--" + k + "=" + x.get<std::string>());
        } else {
            argv.push_back("--" + k + "=" + v.get<std::string>());
        }
    }
    return dispatch(argv);
}

int dispatch(std::vector<std::string> args) {
    CLI::App app{"Spatio-temporal graphs from satellite image time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.option_defaults()->always_capture_default();
    unsigned threads = 0;
    auto* threads_opt = app.add_option("--threads", threads, "Worker cap for per-date/per-patch stages (0 = default)");

    SynthOpts synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic cube with labels");
    c_synth->add_option("--kind", synth.kind, "seasonal | context");
    c_synth->add_option("--seed", synth.seed);
    c_synth->add_option("--out", synth.out, "Output cube directory")->required();
    c_synth->add_option("--T", synth.T, "Dates (default 12 seasonal, 2 context)");
    c_synth->add_option("--H", synth.H, "Rows (seasonal)");
    c_synth->add_option("--W", synth.W, "Columns (seasonal)");
    c_synth->add_option("--blobs", synth.blobs, "Land-cover blobs (seasonal)");
    c_synth->add_option("--period", synth.period, "Season length in dates (seasonal)");
    c_synth->add_option("--noise", synth.noise, "Reflectance noise sigma (seasonal)");
    c_synth->add_option("--cells", synth.cells, "Cells per side (context)");
    c_synth->add_option("--cell-px", synth.cell_px, "Pixels per cell side (context)");

    SegmentOpts seg;
    auto* c_seg = app.add_subcommand("segment", "Segment every date of a cube");
    c_seg->add_option("--cube", seg.cube)->required();
    c_seg->add_option("--algo", seg.algo, "felzenszwalb | slic");
    c_seg->add_option("--scale", seg.scale, "Felzenszwalb scale");
    c_seg->add_option("--min-size", seg.min_size, "Felzenszwalb minimum component size");
    c_seg->add_option("--segments", seg.segments, "SLIC target segment count");
    c_seg->add_option("--compactness", seg.compactness, "SLIC compactness");
    c_seg->add_option("--iters", seg.iters, "SLIC iterations");
    c_seg->add_option("--bands", seg.bands, "Band names to segment on (default all)");
    c_seg->add_option("--out", seg.out)->required();

    FeaturesOpts feat;
    auto* c_feat = app.add_subcommand("features", "Per-object band statistics");
    c_feat->add_option("--cube", feat.cube)->required();
    c_feat->add_option("--seg", feat.seg)->required();
    c_feat->add_flag("--geom", feat.geom, "Append area, centroid and date columns");
    c_feat->add_option("--out", feat.out)->required();

    BuildGraphOpts bg;
    auto* c_bg = app.add_subcommand("build-graph", "Assemble the spatio-temporal graph");
    c_bg->add_option("--cube", bg.cube)->required();
    c_bg->add_option("--seg", bg.seg)->required();
    c_bg->add_option("--features", bg.features, "features.csv")->required();
    c_bg->add_option("--spatial", bg.spatial, "adjacency | eps:R | knn:K | sim:K");
    c_bg->add_option("--st", bg.st, "overlap[:MIN] | sim:K | periodic:LAG (repeatable)");
    c_bg->add_option("--out", bg.out)->required();

    StatsOpts stats;
    auto* c_stats = app.add_subcommand("stats", "Degree histograms and compression ratio");
    c_stats->add_option("--graph", stats.graph)->required();
    c_stats->add_option("--fv", stats.fv, "Attributes per node (default: feature width)");
    c_stats->add_option("--fe", stats.fe, "Attributes per edge");
    c_stats->add_flag("--no-map", stats.no_map, "Do not count the object map");
    c_stats->add_option("--seg", stats.seg, "Segmentation, to measure the compact serialized size");
    c_stats->add_option("--out", stats.out)->required();

    GraphOpts events;
    auto* c_events = app.add_subcommand("events", "Appearance/disappearance/split/merge/continuation");
    c_events->add_option("--graph", events.graph)->required();
    c_events->add_option("--out", events.out)->required();

    MineOpts mine;
    auto* c_mine = app.add_subcommand("mine", "Frequent symbol sequences along ST paths");
    c_mine->add_option("--graph", mine.graph)->required();
    c_mine->add_option("--feature", mine.feature, "Feature column to symbolize");
    c_mine->add_option("--bins", mine.bins, "Equal-frequency bins");
    c_mine->add_option("--minsup", mine.minsup, "Minimum support");
    c_mine->add_option("--maxlen", mine.maxlen, "Maximum pattern length (0 = number of dates)");
    c_mine->add_option("--out", mine.out)->required();

    ExportOpts exp;
    auto* c_exp = app.add_subcommand("export", "Write the graph as JSON, GraphML or DOT");
    c_exp->add_option("--graph", exp.graph)->required();
    c_exp->add_option("--format", exp.format, "json | graphml | dot");
    c_exp->add_option("--out", exp.out)->required();

    TrainOpts train;
    auto* c_train = app.add_subcommand("train", "Train the node classifier");
    c_train->add_option("--task", train.task, "classify");
    c_train->add_option("--graph", train.graphs, "Training graph (repeatable)")->required();
    c_train->add_option("--val-graph", train.val_graphs, "Validation graph (repeatable)");
    c_train->add_option("--conv", train.conv, "gcn | sage | mlp");
    c_train->add_option("--hidden", train.hidden);
    c_train->add_option("--layers", train.layers);
    c_train->add_option("--lr", train.lr);
    c_train->add_option("--epochs", train.epochs);
    c_train->add_option("--seed", train.seed);
    c_train->add_option("--out", train.out)->required();

    PredictOpts pred;
    auto* c_pred = app.add_subcommand("predict", "Classify the nodes of a graph");
    c_pred->add_option("--model", pred.model)->required();
    c_pred->add_option("--graph", pred.graph)->required();
    c_pred->add_option("--seg", pred.seg, "Segmentation, to also write per-pixel maps");
    c_pred->add_option("--out", pred.out)->required();

    EvalOpts ev;
    auto* c_eval = app.add_subcommand("eval", "Pixel-level IoU/OA of a classifier");
    c_eval->add_option("--model", ev.model)->required();
    c_eval->add_option("--graph", ev.graph)->required();
    c_eval->add_option("--seg", ev.seg)->required();
    c_eval->add_option("--cube", ev.cube, "Cube directory holding the label maps")->required();
    c_eval->add_option("--out", ev.out)->required();

    auto* c_fc = app.add_subcommand("forecast", "Next-frame NDWI forecasting");
    c_fc->require_subcommand(1);
    ForecastTrainOpts ft;
    auto* c_ft = c_fc->add_subcommand("train", "Train the mesh forecaster");
    c_ft->add_option("--cube", ft.cubes, "Cube directory, one per site (repeatable)")->required();
    c_ft->add_option("--input-len", ft.input_len);
    c_ft->add_option("--segments", ft.segments);
    c_ft->add_option("--compactness", ft.compactness);
    c_ft->add_option("--hidden", ft.hidden);
    c_ft->add_option("--rounds", ft.rounds);
    c_ft->add_option("--lr", ft.lr);
    c_ft->add_option("--epochs", ft.epochs);
    c_ft->add_option("--batch", ft.batch);
    c_ft->add_option("--seed", ft.seed);
    c_ft->add_option("--patch", ft.patch, "Patch side (0 = whole frames)");
    c_ft->add_option("--mesh-from", ft.mesh_from, "last | stack");
    c_ft->add_option("--aggregation", ft.aggregation, "sum | mean");
    c_ft->add_option("--train-fraction", ft.train_fraction, "Share of sites used for training");
    c_ft->add_option("--out", ft.out)->required();
    ForecastPredictOpts fp;
    auto* c_fp = c_fc->add_subcommand("predict", "Predict the frame after a window");
    c_fp->add_option("--checkpoint", fp.checkpoint)->required();
    c_fp->add_option("--cube", fp.cube)->required();
    c_fp->add_option("--target-index", fp.target_index, "Predict this date and score against it (default: after the last date)");
    c_fp->add_option("--out", fp.out, "Output float32 H*W blob")->required();

    std::string replay_file;
    auto* c_replay = app.add_subcommand("replay", "Re-run a recorded run_config.json");
    c_replay->add_option("config", replay_file)->required();

    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Context ctx;
    if (threads_opt->count() > 0) {
        ctx.threads = threads;
        set_thread_limit(threads);
    }
    auto run = [&](CLI::App* sub, std::vector<std::string> cmd, auto fn) {
        if (!sub->parsed()) return false;
        ctx.sub = sub;
        ctx.command = std::move(cmd);
        fn();
        return true;
    };
    if (c_replay->parsed()) return run_replay(replay_file);
    run(c_synth, {"synth"}, [&] { run_synth(synth, ctx); }) ||
        run(c_seg, {"segment"}, [&] { run_segment(seg, ctx); }) ||
        run(c_feat, {"features"}, [&] { run_features(feat, ctx); }) ||
        run(c_bg, {"build-graph"}, [&] { run_build_graph(bg, ctx); }) ||
        run(c_stats, {"stats"}, [&] { run_stats(stats, ctx); }) ||
        run(c_events, {"events"}, [&] { run_events(events, ctx); }) ||
        run(c_mine, {"mine"}, [&] { run_mine(mine, ctx); }) ||
        run(c_exp, {"export"}, [&] { run_export(exp, ctx); }) ||
        run(c_train, {"train"}, [&] { run_train(train, ctx); }) ||
        run(c_pred, {"predict"}, [&] { run_predict(pred, ctx); }) ||
        run(c_eval, {"eval"}, [&] { run_eval(ev, ctx); }) ||
        run(c_ft, {"forecast", "train"}, [&] { run_forecast_train(ft, ctx); }) ||
        run(c_fp, {"forecast", "predict"}, [&] { run_forecast_predict(fp, ctx); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(std::vector<std::string>(argv, argv + argc));
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const sitsgraph::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
