#include "sitsgraph/segmentation.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

namespace sitsgraph {

using nlohmann::json;

namespace {

float finite_or_zero(float v) { return std::isfinite(v) ? v : 0.0f; }

// Disjoint-set forest with component size and internal difference.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    int join(int a, int b, double weight) {
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        internal_[a] = weight;
        return a;
    }

    int size(int root) const { return size_[root]; }
    double internal(int root) const { return internal_[root]; }

private:
    std::vector<int> parent_;
    std::vector<int> size_;
    std::vector<double> internal_;
};

// Dense ids in raster order of first appearance.
void relabel_dense(std::vector<std::int32_t>& labels) {
    std::vector<std::int32_t> remap;
    std::int32_t max_id = 0;
    for (auto v : labels) max_id = std::max(max_id, v);
    remap.assign(std::size_t(max_id) + 1, -1);
    std::int32_t next = 0;
    for (auto& v : labels) {
        auto& r = remap[std::size_t(v)];
        if (r < 0) r = next++;
        v = r;
    }
}

void check_image(const ImageView& image) {
    if (image.C < 1 || image.H < 1 || image.W < 1 ||
        image.data.size() != std::size_t(image.C) * image.H * image.W) {
        throw Error(Errc::EmptyImage, "segmentation input must have C, H, W >= 1");
    }
}

}  // namespace

int LabelMap::count() const {
    if (data.empty()) return 0;
    return *std::max_element(data.begin(), data.end()) + 1;
}

// ---------------------------------------------------------------------------
// Felzenszwalb

LabelMap felzenszwalb(const ImageView& image, double scale, int min_size) {
    check_image(image);
    if (!(scale > 0)) throw Error(Errc::InvalidArgument, "scale must be > 0");
    if (min_size < 1) throw Error(Errc::InvalidArgument, "min_size must be >= 1");
    const int H = image.H, W = image.W, C = image.C;
    const std::size_t hw = std::size_t(H) * W;

    auto dist = [&](int a, int b) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = double(finite_or_zero(image.data[std::size_t(c) * hw + a])) -
                             double(finite_or_zero(image.data[std::size_t(c) * hw + b]));
            s += d * d;
        }
        return std::sqrt(s);
    };

    struct GridEdge {
        double w;
        int a;
        int b;
    };
    std::vector<GridEdge> edges;
    edges.reserve(hw * 4);
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const int p = h * W + w;
            if (w + 1 < W) edges.push_back({dist(p, p + 1), p, p + 1});
            if (h + 1 < H) {
                edges.push_back({dist(p, p + W), p, p + W});
                if (w + 1 < W) edges.push_back({dist(p, p + W + 1), p, p + W + 1});
                if (w > 0) edges.push_back({dist(p, p + W - 1), p, p + W - 1});
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const GridEdge& x, const GridEdge& y) {
        return std::tie(x.w, x.a, x.b) < std::tie(y.w, y.a, y.b);
    });

    DisjointSets sets(hw);
    for (const auto& e : edges) {
        const int ra = sets.find(e.a), rb = sets.find(e.b);
        if (ra == rb) continue;
        const double ta = sets.internal(ra) + scale / sets.size(ra);
        const double tb = sets.internal(rb) + scale / sets.size(rb);
        if (e.w <= std::min(ta, tb)) sets.join(ra, rb, e.w);
    }
    for (const auto& e : edges) {
        const int ra = sets.find(e.a), rb = sets.find(e.b);
        if (ra != rb && (sets.size(ra) < min_size || sets.size(rb) < min_size)) {
            sets.join(ra, rb, std::max(sets.internal(ra), sets.internal(rb)));
        }
    }

    LabelMap out{H, W, std::vector<std::int32_t>(hw)};
    for (std::size_t p = 0; p < hw; ++p) out.data[p] = sets.find(static_cast<int>(p));
    relabel_dense(out.data);
    return out;
}

// ---------------------------------------------------------------------------
// SLIC

namespace {

struct Center {
    std::vector<double> color;
    double row = 0.0;
    double col = 0.0;
};

// Keeps the largest 4-connected piece of every label and folds the remaining
// fragments into the adjacent segment whose centre is closest to them.
void enforce_connectivity(std::vector<std::int32_t>& labels, const ImageView& image,
                          const std::vector<Center>& centers, double spatial_scale) {
    const int H = image.H, W = image.W, C = image.C;
    const std::size_t hw = std::size_t(H) * W;

    std::vector<int> comp(hw, -1);
    std::vector<int> comp_label;
    std::vector<int> comp_size;
    std::vector<std::vector<double>> comp_sum;  // C colours, row, col
    std::vector<int> stack;
    for (std::size_t start = 0; start < hw; ++start) {
        if (comp[start] >= 0) continue;
        const int id = static_cast<int>(comp_label.size());
        const int lab = labels[start];
        comp_label.push_back(lab);
        comp_size.push_back(0);
        comp_sum.emplace_back(std::size_t(C) + 2, 0.0);
        comp[start] = id;
        stack.assign(1, static_cast<int>(start));
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            ++comp_size[id];
            auto& sum = comp_sum[id];
            for (int c = 0; c < C; ++c) sum[c] += finite_or_zero(image.data[std::size_t(c) * hw + p]);
            sum[C] += p / W;
            sum[C + 1] += p % W;
            const int h = p / W, w = p % W;
            const int nbr[4][2] = {{h - 1, w}, {h + 1, w}, {h, w - 1}, {h, w + 1}};
            for (auto& nb : nbr) {
                if (nb[0] < 0 || nb[0] >= H || nb[1] < 0 || nb[1] >= W) continue;
                const int q = nb[0] * W + nb[1];
                if (comp[q] < 0 && labels[q] == lab) {
                    comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    const int n_comp = static_cast<int>(comp_label.size());

    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n_comp));
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const int a = comp[std::size_t(h) * W + w];
            if (w + 1 < W) {
                const int b = comp[std::size_t(h) * W + w + 1];
                if (a != b) {
                    nbrs[a].push_back(b);
                    nbrs[b].push_back(a);
                }
            }
            if (h + 1 < H) {
                const int b = comp[std::size_t(h + 1) * W + w];
                if (a != b) {
                    nbrs[a].push_back(b);
                    nbrs[b].push_back(a);
                }
            }
        }
    }
    for (auto& v : nbrs) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    const int n_labels = static_cast<int>(centers.size());
    std::vector<int> main_comp(std::size_t(n_labels), -1);
    for (int k = 0; k < n_comp; ++k) {
        auto& m = main_comp[std::size_t(comp_label[k])];
        if (m < 0 || comp_size[k] > comp_size[m]) m = k;
    }

    std::vector<int> parent(static_cast<std::size_t>(n_comp));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::vector<char> is_main(std::size_t(n_comp), 0);
    for (int m : main_comp) {
        if (m >= 0) is_main[m] = 1;
    }

    std::deque<int> work;
    for (int k = 0; k < n_comp; ++k) {
        if (!is_main[k]) work.push_back(k);
    }
    while (!work.empty()) {
        const int r = find(work.front());
        work.pop_front();
        if (is_main[r]) continue;
        const auto& sum = comp_sum[r];
        const double inv = 1.0 / comp_size[r];
        int best = -1;
        std::tuple<double, int, int, int> best_key{std::numeric_limits<double>::infinity(), 0, 0, 0};
        for (int nb : nbrs[r]) {
            const int g = find(nb);
            if (g == r) continue;
            const auto& ctr = centers[std::size_t(comp_label[g])];
            double dc = 0.0;
            for (int c = 0; c < C; ++c) {
                const double d = sum[c] * inv - ctr.color[c];
                dc += d * d;
            }
            const double dr = sum[C] * inv - ctr.row, dw = sum[C + 1] * inv - ctr.col;
            const double d = dc + spatial_scale * spatial_scale * (dr * dr + dw * dw);
            const std::tuple<double, int, int, int> key{d, comp_label[g], is_main[g] ? 0 : 1, g};
            if (best < 0 || key < best_key) {
                best = g;
                best_key = key;
            }
        }
        if (best < 0) continue;
        parent[r] = best;
        comp_size[best] += comp_size[r];
        for (std::size_t i = 0; i < sum.size(); ++i) comp_sum[best][i] += sum[i];
        auto& merged = nbrs[best];
        merged.insert(merged.end(), nbrs[r].begin(), nbrs[r].end());
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        if (!is_main[best]) work.push_back(best);
    }

    for (std::size_t p = 0; p < hw; ++p) labels[p] = comp_label[find(comp[p])];
}

}  // namespace

LabelMap slic(const ImageView& image, int n_segments, double compactness, int iters) {
    check_image(image);
    const int H = image.H, W = image.W, C = image.C;
    const std::size_t hw = std::size_t(H) * W;
    if (n_segments < 1 || std::size_t(n_segments) > hw) {
        throw Error(Errc::InvalidSegmentCount,
                    "n_segments must lie in [1, H*W], got " + std::to_string(n_segments));
    }
    if (!(compactness > 0)) throw Error(Errc::InvalidArgument, "compactness must be > 0");
    if (iters < 1) throw Error(Errc::InvalidArgument, "iters must be >= 1");

    auto px = [&](int c, std::size_t p) { return double(finite_or_zero(image.data[std::size_t(c) * hw + p])); };

    const double S = std::sqrt(double(hw) / n_segments);
    int ny = std::clamp(static_cast<int>(std::lround(H / S)), 1, H);
    int nx = std::clamp(static_cast<int>(std::lround(W / S)), 1, W);
    while (nx * ny > n_segments) {
        if (nx > 1 && (ny == 1 || double(W) / nx < double(H) / ny)) {
            --nx;
        } else {
            --ny;
        }
    }
    const double step_y = double(H) / ny, step_x = double(W) / nx;

    auto gradient = [&](int h, int w) {
        const int hu = std::max(h - 1, 0), hd = std::min(h + 1, H - 1);
        const int wl = std::max(w - 1, 0), wr = std::min(w + 1, W - 1);
        double g = 0.0;
        for (int c = 0; c < C; ++c) {
            const double dx = px(c, std::size_t(h) * W + wr) - px(c, std::size_t(h) * W + wl);
            const double dy = px(c, std::size_t(hd) * W + w) - px(c, std::size_t(hu) * W + w);
            g += dx * dx + dy * dy;
        }
        return g;
    };

    std::vector<Center> centers;
    centers.reserve(std::size_t(nx) * ny);
    const bool perturb = std::min(step_x, step_y) >= 3.0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            Center ctr;
            ctr.row = (j + 0.5) * step_y - 0.5;
            ctr.col = (i + 0.5) * step_x - 0.5;
            int h = std::clamp(static_cast<int>(std::lround(ctr.row)), 0, H - 1);
            int w = std::clamp(static_cast<int>(std::lround(ctr.col)), 0, W - 1);
            if (perturb) {
                double best = gradient(h, w);
                int bh = h, bw = w;
                for (int dh = -1; dh <= 1; ++dh) {
                    for (int dw = -1; dw <= 1; ++dw) {
                        const int hh = h + dh, ww = w + dw;
                        if (hh < 0 || hh >= H || ww < 0 || ww >= W) continue;
                        const double g = gradient(hh, ww);
                        if (g < best) {
                            best = g;
                            bh = hh;
                            bw = ww;
                        }
                    }
                }
                if (bh != h || bw != w) {
                    h = bh;
                    w = bw;
                    ctr.row = h;
                    ctr.col = w;
                }
            }
            ctr.color.resize(std::size_t(C));
            for (int c = 0; c < C; ++c) ctr.color[c] = px(c, std::size_t(h) * W + w);
            centers.push_back(std::move(ctr));
        }
    }

    const int K = static_cast<int>(centers.size());
    const double half = std::ceil(std::max({S, step_y, step_x}));
    const double spatial = compactness / S;
    const double spatial2 = spatial * spatial;
    std::vector<std::int32_t> labels(hw, 0);
    std::vector<double> best(hw);
    std::vector<double> acc(std::size_t(K) * (C + 2));
    std::vector<int> members(static_cast<std::size_t>(K));

    for (int it = 0; it < iters; ++it) {
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
        for (int k = 0; k < K; ++k) {
            const auto& ctr = centers[std::size_t(k)];
            const int h0 = std::max(0, static_cast<int>(std::floor(ctr.row - half)));
            const int h1 = std::min(H - 1, static_cast<int>(std::ceil(ctr.row + half)));
            const int w0 = std::max(0, static_cast<int>(std::floor(ctr.col - half)));
            const int w1 = std::min(W - 1, static_cast<int>(std::ceil(ctr.col + half)));
            for (int h = h0; h <= h1; ++h) {
                for (int w = w0; w <= w1; ++w) {
                    const std::size_t p = std::size_t(h) * W + w;
                    double dc = 0.0;
                    for (int c = 0; c < C; ++c) {
                        const double d = px(c, p) - ctr.color[std::size_t(c)];
                        dc += d * d;
                    }
                    const double dr = h - ctr.row, dw = w - ctr.col;
                    const double d = dc + spatial2 * (dr * dr + dw * dw);
                    if (d < best[p]) {
                        best[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        std::fill(members.begin(), members.end(), 0);
        for (std::size_t p = 0; p < hw; ++p) {
            const int k = labels[p];
            double* a = acc.data() + std::size_t(k) * (C + 2);
            for (int c = 0; c < C; ++c) a[c] += px(c, p);
            a[C] += double(p / W);
            a[C + 1] += double(p % W);
            ++members[std::size_t(k)];
        }
        for (int k = 0; k < K; ++k) {
            if (members[std::size_t(k)] == 0) continue;
            const double inv = 1.0 / members[std::size_t(k)];
            const double* a = acc.data() + std::size_t(k) * (C + 2);
            auto& ctr = centers[std::size_t(k)];
            for (int c = 0; c < C; ++c) ctr.color[std::size_t(c)] = a[c] * inv;
            ctr.row = a[C] * inv;
            ctr.col = a[C + 1] * inv;
        }
    }

    enforce_connectivity(labels, image, centers, spatial);
    relabel_dense(labels);
    return {H, W, std::move(labels)};
}

// ---------------------------------------------------------------------------
// Stacks

std::string algorithm_name(SegAlgorithm a) {
    return a == SegAlgorithm::Felzenszwalb ? "felzenszwalb" : "slic";
}

json SegParams::to_json() const {
    json j;
    j["algorithm"] = algorithm_name(algorithm);
    if (algorithm == SegAlgorithm::Felzenszwalb) {
        j["scale"] = scale;
        j["min_size"] = min_size;
    } else {
        j["n_segments"] = n_segments;
        j["compactness"] = compactness;
        j["iters"] = iters;
    }
    j["bands"] = bands;
    return j;
}

SegParams SegParams::from_json(const json& j) {
    SegParams p;
    const auto algo = j.at("algorithm").get<std::string>();
    if (algo == "felzenszwalb") {
        p.algorithm = SegAlgorithm::Felzenszwalb;
        p.scale = j.value("scale", p.scale);
        p.min_size = j.value("min_size", p.min_size);
    } else if (algo == "slic") {
        p.algorithm = SegAlgorithm::Slic;
        p.n_segments = j.value("n_segments", p.n_segments);
        p.compactness = j.value("compactness", p.compactness);
        p.iters = j.value("iters", p.iters);
    } else {
        throw Error(Errc::ParseError, "unknown segmentation algorithm '" + algo + "'");
    }
    p.bands = j.value("bands", std::vector<int>{});
    return p;
}

int SegStack::date_of(int id) const {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), id);
    if (id < 0 || id >= total() || it == offsets.begin()) {
        throw Error(Errc::UnknownNode, "object id " + std::to_string(id) + " out of range");
    }
    return static_cast<int>(it - offsets.begin()) - 1;
}

SegStack stack_segmentations(const std::vector<LabelMap>& per_date, SegParams params) {
    if (per_date.empty()) throw Error(Errc::EmptyImage, "no dates to stack");
    const int H = per_date.front().H, W = per_date.front().W;
    SegStack seg;
    seg.params = std::move(params);
    seg.labels = LabelStack(static_cast<int>(per_date.size()), H, W);
    int offset = 0;
    for (std::size_t t = 0; t < per_date.size(); ++t) {
        const auto& m = per_date[t];
        if (m.H != H || m.W != W) throw Error(Errc::ShapeMismatch, "per-date maps differ in shape");
        const int n = m.count();
        seg.offsets.push_back(offset);
        seg.counts.push_back(n);
        auto plane = seg.labels.plane(static_cast<int>(t));
        for (std::size_t p = 0; p < m.data.size(); ++p) plane[p] = m.data[p] + offset;
        offset += n;
    }
    return seg;
}

SegStack segment_cube(const SitsCube& cube, const SegParams& params) {
    std::vector<LabelMap> maps(static_cast<std::size_t>(cube.T()));
    parallel_for(maps.size(), [&](std::size_t t) {
        const Image img = cube.image(static_cast<int>(t), params.bands);
        maps[t] = params.algorithm == SegAlgorithm::Felzenszwalb
                      ? felzenszwalb(img.view(), params.scale, params.min_size)
                      : slic(img.view(), params.n_segments, params.compactness, params.iters);
    });
    return stack_segmentations(maps, params);
}

void save_seg(const SegStack& seg, const fs::path& dir) {
    fs::create_directories(dir);
    json meta;
    meta["T"] = seg.T();
    meta["H"] = seg.H();
    meta["W"] = seg.W();
    meta["params"] = seg.params.to_json();
    meta["counts"] = seg.counts;
    std::ofstream(dir / "seg_meta.json") << meta.dump(2) << '\n';
    for (int t = 0; t < seg.T(); ++t) {
        write_i32(dir / ("seg_t" + std::to_string(t) + ".bin"), seg.labels.plane(t));
    }
}

SegStack load_seg(const fs::path& dir) {
    std::ifstream in(dir / "seg_meta.json");
    if (!in) throw Error(Errc::MissingFile, (dir / "seg_meta.json").string());
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("seg_meta.json: ") + e.what());
    }
    const int T = meta.at("T").get<int>(), H = meta.at("H").get<int>(), W = meta.at("W").get<int>();
    const auto params = SegParams::from_json(meta.at("params"));
    std::vector<LabelMap> maps;
    for (int t = 0; t < T; ++t) {
        const auto file = dir / ("seg_t" + std::to_string(t) + ".bin");
        auto raw = read_i32(file);
        if (raw.size() != std::size_t(H) * W) throw Error(Errc::ShapeMismatch, file.string());
        maps.push_back({H, W, std::move(raw)});
    }
    // Files store global ids; rebase each date to 0 before restacking.
    for (auto& m : maps) {
        const auto lo = *std::min_element(m.data.begin(), m.data.end());
        for (auto& v : m.data) v -= lo;
    }
    return stack_segmentations(maps, params);
}

}  // namespace sitsgraph
