#include "sitsgraph/metrics.hpp"

#include "sitsgraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace sitsgraph {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_(n_classes), counts_(std::size_t(n_classes) * n_classes, 0) {
    if (n_classes < 0) throw Error(Errc::InvalidArgument, "class count must be >= 0");
}

void ConfusionMatrix::add(int truth, int pred, long count) {
    if (truth < 0) {
        ignored_ += count;
        return;
    }
    if (truth >= n_ || pred < 0 || pred >= n_) {
        throw Error(Errc::InvalidArgument, "class index out of range in confusion matrix");
    }
    counts_[std::size_t(truth) * n_ + pred] += count;
    total_ += count;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    if (o.n_ != n_) throw Error(Errc::DimMismatch, "confusion matrices differ in class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    total_ += o.total_;
    ignored_ += o.ignored_;
    return *this;
}

json SegmentationScores::to_json() const {
    json iou = json::array();
    for (double v : per_class_iou) iou.push_back(std::isnan(v) ? json(nullptr) : json(v));
    return {{"per_class_iou", iou}, {"miou", miou}, {"oa", oa}};
}

SegmentationScores iou_oa(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(Errc::EmptyMatrix, "no evaluated pixels");
    const int n = cm.n_classes();
    SegmentationScores s;
    long trace = 0;
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < n; ++c) {
        long row = 0, col = 0;
        for (int k = 0; k < n; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        const long tp = cm.at(c, c);
        trace += tp;
        const long uni = row + col - tp;
        if (uni == 0) {
            s.per_class_iou.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double iou = double(tp) / double(uni);
        s.per_class_iou.push_back(iou);
        iou_sum += iou;
        ++present;
    }
    s.miou = present ? iou_sum / present : 0.0;
    s.oa = double(trace) / double(cm.total());
    return s;
}

std::string iou_table_csv(const SegmentationScores& s, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed;
    for (std::size_t c = 0; c < s.per_class_iou.size(); ++c) {
        os << (c < class_names.size() ? class_names[c] : "class_" + std::to_string(c)) << ',';
    }
    os << "mIoU,OA\n";
    for (double v : s.per_class_iou) {
        if (std::isnan(v)) {
            os << ',';
        } else {
            os << 100.0 * v << ',';
        }
    }
    os << 100.0 * s.miou << ',' << 100.0 * s.oa << '\n';
    return os.str();
}

double majority_upper_bound(const SegStack& seg, const LabelStack& labels) {
    if (labels.T != seg.T() || labels.H != seg.H() || labels.W != seg.W()) {
        throw Error(Errc::ShapeMismatch, "labels do not match segmentation");
    }
    std::vector<std::map<int, long>> votes(static_cast<std::size_t>(seg.total()));
    long evaluated = 0;
    for (std::size_t p = 0; p < labels.data.size(); ++p) {
        const int lab = labels.data[p];
        if (lab < 0) continue;
        ++votes[std::size_t(seg.labels.data[p])][lab];
        ++evaluated;
    }
    if (evaluated == 0) throw Error(Errc::NoLabels, "no labelled pixels");
    long correct = 0;
    for (const auto& v : votes) {
        long best = 0;
        for (auto [lab, n] : v) best = std::max(best, n);
        correct += best;
    }
    return double(correct) / double(evaluated);
}

double rmse(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size() || pred.empty()) throw Error(Errc::ShapeMismatch, "rmse inputs differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = double(pred[i]) - double(target[i]);
        s += r * r;
    }
    return std::sqrt(s / double(pred.size()));
}

double psnr(double rmse_value, double data_range) {
    if (rmse_value < data_range * 1e-5) return 100.0;
    return 20.0 * std::log10(data_range / rmse_value);
}

double ssim(std::span<const float> pred, std::span<const float> target, int H, int W, double data_range) {
    if (pred.size() != target.size() || pred.size() != std::size_t(H) * W || H < 1 || W < 1) {
        throw Error(Errc::ShapeMismatch, "ssim inputs must both be H*W");
    }
    int win = std::min({7, H, W});
    if (win % 2 == 0) --win;
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const double n = double(win) * win;
    const double cov_norm = win > 1 ? n / (n - 1.0) : 1.0;
    double total = 0.0;
    long positions = 0;
    for (int r = 0; r + win <= H; ++r) {
        for (int c = 0; c + win <= W; ++c) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    const std::size_t p = std::size_t(r + i) * W + (c + j);
                    const double x = pred[p], y = target[p];
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            const double mx = sx / n, my = sy / n;
            const double vx = cov_norm * (sxx / n - mx * mx);
            const double vy = cov_norm * (syy / n - my * my);
            const double vxy = cov_norm * (sxy / n - mx * my);
            total += ((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++positions;
        }
    }
    return total / double(positions);
}

ImageScores rmse_psnr_ssim(std::span<const float> pred, std::span<const float> target, int H, int W) {
    ImageScores s;
    s.rmse = rmse(pred, target);
    s.psnr = psnr(s.rmse);
    s.ssim = ssim(pred, target, H, W);
    return s;
}

}  // namespace sitsgraph
