#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quanvseg/tensor.hpp"

namespace quanvseg::nn {

// A double-precision tensor the loss depends on, paired with the analytic
// gradient of the loss with respect to it.
struct GradcheckTarget {
    std::string name;
    Tensor<double>* value = nullptr;
    Tensor<double> analytic;
};

struct GradcheckOptions {
    double step = 1e-5;
    // Tensors larger than this are checked on a random subset of this many
    // coordinates.
    std::size_t max_coords_per_tensor = 200;
    // Denominator floor of the relative error, so coordinates whose true
    // gradient is ~0 are judged on absolute error.
    double abs_floor = 1e-6;
    std::uint64_t seed = 0;
};

struct GradcheckReport {
    std::string label;
    double tolerance = 0;
    double max_rel_error = 0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
    std::size_t coords_checked = 0;
    // Coordinates whose interval straddled a non-differentiable point and
    // were judged on the one-sided slope.
    std::size_t kinks = 0;

    bool passed() const noexcept { return max_rel_error < tolerance; }
};

// Central differences of loss() over the targets' coordinates. Every value is
// restored after being perturbed. A coordinate that fails is re-examined with
// one-sided differences; if those disagree with each other the interval holds
// a kink and the better one-sided slope is used instead. Throws NumericError when the loss or an
// analytic gradient is not finite.
GradcheckReport gradcheck(const std::string& label, std::vector<GradcheckTarget>& targets,
                          const std::function<double()>& loss, double tolerance, const GradcheckOptions& options = {});

// Every layer kernel, the attention gate and a depth-2 model, each over
// `seeds` random draws. One report per (case, seed).
std::vector<GradcheckReport> run_gradcheck_suite(int seeds = 10);

}  // namespace quanvseg::nn
