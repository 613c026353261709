#include "quanvseg/metrics.hpp"

#include <string>

#include "quanvseg/errors.hpp"

namespace quanvseg::nn {
namespace {

template <typename T>
Confusion count(std::span<const T> pred, std::span<const T> truth) {
    if (pred.size() != truth.size()) {
        throw ShapeError("mask sizes differ: " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
    }
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= kDecisionThreshold;
        const bool t = truth[i] > kDecisionThreshold;
        if (p && t) ++c.tp;
        else if (!p && !t) ++c.tn;
        else if (p) ++c.fp;
        else ++c.fn;
    }
    return c;
}

}  // namespace

double Confusion::overall_accuracy() const noexcept {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
}

double Confusion::iou() const noexcept {
    const auto uni = tp + fp + fn;
    return uni == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(uni);
}

Confusion confusion(std::span<const float> predictions, std::span<const float> truth) {
    return count(predictions, truth);
}

Confusion confusion(std::span<const double> predictions, std::span<const double> truth) {
    return count(predictions, truth);
}

double overall_accuracy(std::span<const double> predictions, std::span<const double> truth) {
    return count(predictions, truth).overall_accuracy();
}

double iou(std::span<const double> predictions, std::span<const double> truth) {
    return count(predictions, truth).iou();
}

}  // namespace quanvseg::nn
