#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/error.hpp"
#include "sitsgraph/segmentation.hpp"

#include <doctest.h>

#include <atomic>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testsupport {

namespace fs = std::filesystem;

// Code of the sitsgraph::Error thrown by fn; fails the test when none is.
inline sitsgraph::Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const sitsgraph::Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return sitsgraph::Errc::InvalidArgument;
}

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("sitsgraph_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::vector<sitsgraph::Date> monthly(int T, sitsgraph::Date start = {2020, 1, 1}) {
    std::vector<sitsgraph::Date> d;
    for (int t = 0; t < T; ++t) d.push_back(start.plus_days(30 * t));
    return d;
}

inline sitsgraph::SitsCube make_cube(int T, int C, int H, int W, std::vector<float> values) {
    std::vector<std::string> bands;
    for (int c = 0; c < C; ++c) bands.push_back("B" + std::to_string(c));
    return sitsgraph::SitsCube({T, C, H, W}, std::move(values), monthly(T), bands);
}

// Piecewise-constant random cube: a few random rectangles per date on noise.
inline sitsgraph::SitsCube random_cube(std::mt19937_64& rng, int T, int C, int H, int W) {
    std::uniform_real_distribution<float> u(0.f, 1.f);
    std::vector<float> v(std::size_t(T) * C * H * W);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c) {
            float* p = v.data() + (std::size_t(t) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) p[i] = 0.05f * u(rng);
        }
        const int rects = 1 + int(rng() % 4);
        for (int r = 0; r < rects; ++r) {
            const int h0 = int(rng() % H), w0 = int(rng() % W);
            const int h1 = h0 + 1 + int(rng() % (H - h0)), w1 = w0 + 1 + int(rng() % (W - w0));
            for (int c = 0; c < C; ++c) {
                const float val = u(rng);
                float* p = v.data() + (std::size_t(t) * C + c) * H * W;
                for (int h = h0; h < h1; ++h)
                    for (int w = w0; w < w1; ++w) p[h * W + w] += val;
            }
        }
    }
    return make_cube(T, C, H, W, std::move(v));
}

// Segmentation stack from explicit per-date maps.
inline sitsgraph::SegStack seg_from_maps(int H, int W, const std::vector<std::vector<int>>& maps) {
    std::vector<sitsgraph::LabelMap> per;
    for (const auto& m : maps) {
        sitsgraph::LabelMap lm;
        lm.H = H;
        lm.W = W;
        lm.data.assign(m.begin(), m.end());
        per.push_back(std::move(lm));
    }
    return sitsgraph::stack_segmentations(per, {});
}

// Independent connected component count of one label map (4- or 8-neighbourhood).
inline int components(const sitsgraph::LabelMap& m, bool eight) {
    std::vector<int> seen(m.data.size(), 0);
    int n = 0;
    for (int s = 0; s < m.H * m.W; ++s) {
        if (seen[s]) continue;
        ++n;
        std::vector<int> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int h = p / m.W, w = p % m.W;
            const int nb[8][2] = {{h - 1, w},     {h + 1, w},     {h, w - 1},     {h, w + 1},
                                  {h - 1, w - 1}, {h - 1, w + 1}, {h + 1, w - 1}, {h + 1, w + 1}};
            for (int k = 0; k < (eight ? 8 : 4); ++k) {
                const auto& q = nb[k];
                if (q[0] < 0 || q[1] < 0 || q[0] >= m.H || q[1] >= m.W) continue;
                const int qi = q[0] * m.W + q[1];
                if (!seen[qi] && m.data[qi] == m.data[p]) {
                    seen[qi] = 1;
                    stack.push_back(qi);
                }
            }
        }
    }
    return n;
}

inline int components4(const sitsgraph::LabelMap& m) { return components(m, false); }
inline int components8(const sitsgraph::LabelMap& m) { return components(m, true); }

}  // namespace testsupport
