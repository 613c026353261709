#include "quanvseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "quanvseg/random.hpp"

namespace quanvseg::unet {

void SegmentationSet::validate() const {
    nn::require_rank(inputs, 4, "segmentation inputs");
    nn::require_rank(masks, 4, "segmentation masks");
    if (masks.dim(0) != inputs.dim(0) || masks.dim(1) != 1 || masks.dim(2) != inputs.dim(2) ||
        masks.dim(3) != inputs.dim(3)) {
        throw ShapeError("masks " + nn::dims_to_string(masks.dims()) + " do not match inputs " +
                         nn::dims_to_string(inputs.dims()));
    }
}

SegmentationSet SegmentationSet::gather(const std::vector<std::size_t>& idx) const {
    auto take = [&](const Tensor<float>& t) {
        nn::Dims dims = t.dims();
        const std::size_t row = t.size() / dims[0];
        dims[0] = idx.size();
        Tensor<float> out(dims);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] >= t.dim(0)) throw IndexError("sample index out of range");
            std::copy_n(t.ptr() + idx[k] * row, row, out.ptr() + k * row);
        }
        return out;
    };
    return {take(inputs), take(masks)};
}

void write_log_header(std::ostream& out) { out << "epoch\tloss\ttrain_oa\n"; }

void write_log_line(std::ostream& out, const EpochStats& s) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\n", s.epoch, s.loss, s.train_oa);
    out << buf;
    out.flush();
}

std::vector<EpochStats> train(AttentionUNet<float>& model, const SegmentationSet& set, const TrainConfig& config,
                              std::ostream* log) {
    if (set.size() == 0) throw DataError("training split is empty");
    set.validate();
    if (config.batch == 0) throw ConfigError("batch size must be >= 1");
    if (config.epochs < 0) throw ConfigError("epochs must be >= 0");

    auto params = model.trainable_tensors();
    nn::AdamState<float> adam(config.adam, params);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(set.size());
    std::vector<EpochStats> history;
    if (log) write_log_header(*log);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_in_place(std::span<std::size_t>(order), rng);
        double loss_sum = 0;
        nn::Confusion seen;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t stop = std::min(order.size(), start + config.batch);
            const SegmentationSet batch =
                set.gather(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                    order.begin() + static_cast<std::ptrdiff_t>(stop)));
            const auto pass = model.forward(batch.inputs, Mode::Train);
            const auto loss = nn::bce_with_logits(pass.logits, batch.masks);
            if (!std::isfinite(loss.loss)) throw NumericError("loss became non-finite in epoch " + std::to_string(epoch));
            loss_sum += loss.loss * static_cast<double>(stop - start);
            seen += nn::confusion(pass.output.data(), batch.masks.data());

            const ModelParams<float> grads = model.backward(pass, loss.grad, GradWrt::Logits);
            std::vector<const Tensor<float>*> grad_ptrs;
            grads.visit_trainable([&](const std::string&, const Tensor<float>& t) { grad_ptrs.push_back(&t); });
            if (grad_ptrs.size() != params.size()) throw StateError("gradient set does not match parameters");
            nn::adam_step<float>(params, grad_ptrs, adam);
            model.commit_running_stats(pass);
        }
        EpochStats s{epoch, loss_sum / static_cast<double>(set.size()), seen.overall_accuracy()};
        history.push_back(s);
        if (log) write_log_line(*log, s);
    }
    return history;
}

Tensor<float> predict(const AttentionUNet<float>& model, const Tensor<float>& inputs, std::size_t batch) {
    nn::require_rank(inputs, 4, "prediction inputs");
    if (batch == 0) throw ConfigError("batch size must be >= 1");
    const std::size_t n = inputs.dim(0);
    Tensor<float> out({n, 1, inputs.dim(2), inputs.dim(3)});
    const std::size_t row_in = n ? inputs.size() / n : 0;
    const std::size_t row_out = n ? out.size() / n : 0;
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t m = std::min(n, start + batch) - start;
        nn::Dims dims = inputs.dims();
        dims[0] = m;
        Tensor<float> chunk(dims, std::vector<float>(inputs.ptr() + start * row_in, inputs.ptr() + (start + m) * row_in));
        const auto pass = model.forward(chunk, Mode::Eval);
        std::copy_n(pass.output.ptr(), m * row_out, out.ptr() + start * row_out);
    }
    return out;
}

EvalReport score(const Tensor<float>& probabilities, const Tensor<float>& masks) {
    nn::require_same_shape(probabilities, masks, "score");
    if (probabilities.empty()) throw DataError("evaluation split is empty");
    EvalReport r;
    const std::size_t n = probabilities.dim(0);
    const std::size_t row = probabilities.size() / n;
    for (std::size_t i = 0; i < n; ++i) {
        PatchMetrics pm;
        pm.index = i;
        pm.counts = nn::confusion(probabilities.data().subspan(i * row, row), masks.data().subspan(i * row, row));
        pm.oa = pm.counts.overall_accuracy();
        pm.iou = pm.counts.iou();
        r.totals += pm.counts;
        r.patches.push_back(pm);
    }
    r.oa = r.totals.overall_accuracy();
    r.iou = r.totals.iou();
    return r;
}

EvalReport evaluate(const AttentionUNet<float>& model, const SegmentationSet& set, std::size_t batch) {
    if (set.size() == 0) throw DataError("evaluation split is empty");
    set.validate();
    return score(predict(model, set.inputs, batch), set.masks);
}

}  // namespace quanvseg::unet
