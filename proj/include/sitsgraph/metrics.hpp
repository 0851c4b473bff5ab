#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/segmentation.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sitsgraph {

// Rows are truth, columns are prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes = 0);

    int n_classes() const { return n_; }
    void add(int truth, int pred, long count = 1);  // negative truth counts as ignored
    long at(int truth, int pred) const { return counts_[std::size_t(truth) * n_ + pred]; }
    long total() const { return total_; }
    long ignored() const { return ignored_; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);

private:
    int n_ = 0;
    std::vector<long> counts_;
    long total_ = 0;
    long ignored_ = 0;
};

struct SegmentationScores {
    std::vector<double> per_class_iou;  // NaN where the class has no union
    double miou = 0.0;                  // mean over classes with a non-empty union
    double oa = 0.0;

    nlohmann::json to_json() const;
};

SegmentationScores iou_oa(const ConfusionMatrix& cm);

// Per-class IoU table: one header row of class names, then IoU/mIoU/OA in %.
std::string iou_table_csv(const SegmentationScores& s, const std::vector<std::string>& class_names);

// Overall accuracy achieved by giving every object its modal label; pixels
// labelled -1 are ignored.
double majority_upper_bound(const SegStack& seg, const LabelStack& labels);

struct ImageScores {
    double rmse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;

    nlohmann::json to_json() const { return {{"rmse", rmse}, {"psnr", psnr}, {"ssim", ssim}}; }
};

inline constexpr double kNdwiRange = 2.0;

double rmse(std::span<const float> pred, std::span<const float> target);
// 20 log10(range / rmse), capped at 100 dB once rmse < range * 1e-5.
double psnr(double rmse_value, double data_range = kNdwiRange);
// Mean SSIM over valid positions of a uniform 7x7 window (smaller frames use
// the largest odd window that fits), K1 = 0.01, K2 = 0.03, sample covariances.
double ssim(std::span<const float> pred, std::span<const float> target, int H, int W,
            double data_range = kNdwiRange);
ImageScores rmse_psnr_ssim(std::span<const float> pred, std::span<const float> target, int H, int W);

}  // namespace sitsgraph
