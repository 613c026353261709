#pragma once

#include <cstdint>
#include <span>

namespace quanvseg::nn {

inline constexpr double kDecisionThreshold = 0.5;

// Pixel confusion counts for binary masks. Predictions are thresholded at
// 0.5 (>= 0.5 is positive); ground truth is positive when > 0.5.
struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
    double overall_accuracy() const noexcept;
    // 1.0 when both masks are empty
    double iou() const noexcept;

    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const float> predictions, std::span<const float> truth);
Confusion confusion(std::span<const double> predictions, std::span<const double> truth);

double overall_accuracy(std::span<const double> predictions, std::span<const double> truth);
double iou(std::span<const double> predictions, std::span<const double> truth);

}  // namespace quanvseg::nn
