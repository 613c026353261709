#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "quanvseg/attention_unet.hpp"
#include "quanvseg/metrics.hpp"
#include "quanvseg/optim.hpp"

namespace quanvseg::unet {

// inputs: N x C x H x W, masks: N x 1 x H x W with values in {0, 1}
struct SegmentationSet {
    Tensor<float> inputs;
    Tensor<float> masks;

    std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
    void validate() const;
    // Rows idx of both tensors, in the given order.
    SegmentationSet gather(const std::vector<std::size_t>& idx) const;
};

struct TrainConfig {
    nn::AdamConfig adam;
    int epochs = 30;
    std::size_t batch = 8;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0;      // mean BCE over the epoch
    double train_oa = 0;  // accuracy of the train-mode predictions seen during the epoch
};

// Mini-batch BCE with Adam. Each epoch visits the set in an order drawn from
// a stream seeded by config.seed, so two runs with equal inputs produce
// bit-identical parameters. When log is given, one tab-separated line per
// epoch is appended to it.
std::vector<EpochStats> train(AttentionUNet<float>& model, const SegmentationSet& set, const TrainConfig& config,
                              std::ostream* log = nullptr);

void write_log_header(std::ostream& out);
void write_log_line(std::ostream& out, const EpochStats& s);

struct PatchMetrics {
    std::size_t index = 0;
    nn::Confusion counts;
    double oa = 0;
    double iou = 0;
};

struct EvalReport {
    nn::Confusion totals;
    double oa = 0;  // micro-averaged over all pixels of the split
    double iou = 0;
    std::vector<PatchMetrics> patches;
};

// Eval-mode probabilities, N x 1 x H x W.
Tensor<float> predict(const AttentionUNet<float>& model, const Tensor<float>& inputs, std::size_t batch = 8);

EvalReport evaluate(const AttentionUNet<float>& model, const SegmentationSet& set, std::size_t batch = 8);

// Metrics for ready-made probability maps against the set's masks.
EvalReport score(const Tensor<float>& probabilities, const Tensor<float>& masks);

}  // namespace quanvseg::unet
