#include "quanvseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "quanvseg/attention_unet.hpp"
#include "quanvseg/layers.hpp"
#include "quanvseg/random.hpp"

namespace quanvseg::nn {

GradcheckReport gradcheck(const std::string& label, std::vector<GradcheckTarget>& targets,
                          const std::function<double()>& loss, double tolerance, const GradcheckOptions& options) {
    GradcheckReport report;
    report.label = label;
    report.tolerance = tolerance;
    std::mt19937_64 rng(options.seed);

    for (auto& t : targets) {
        if (!t.value) throw StateError("gradcheck target " + t.name + " has no tensor");
        require_same_shape(*t.value, t.analytic, "gradcheck analytic gradient");
        if (!t.analytic.all_finite()) throw NumericError("analytic gradient of " + t.name + " is not finite");

        const std::size_t n = t.value->size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > options.max_coords_per_tensor) {
            shuffle_in_place(std::span<std::size_t>(coords), rng);
            coords.resize(options.max_coords_per_tensor);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            double& v = (*t.value)[i];
            const double saved = v;
            v = saved + options.step;
            const double plus = loss();
            v = saved - options.step;
            const double minus = loss();
            v = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw NumericError("loss is not finite while perturbing " + t.name + "[" + std::to_string(i) + "]");
            }
            double numeric = (plus - minus) / (2 * options.step);
            const double analytic = t.analytic[i];
            auto rel_to = [&](double num) {
                return std::abs(num - analytic) / std::max({std::abs(num), std::abs(analytic), options.abs_floor});
            };
            double rel = rel_to(numeric);
            if (rel >= tolerance) {
                // A kink (ReLU, max) inside [v - h, v + h] makes the central
                // difference meaningless; the one-sided slopes then disagree
                // and the smooth side is the derivative to compare against.
                const double centre = loss();
                const double fwd = (plus - centre) / options.step;
                const double bwd = (centre - minus) / options.step;
                const double spread =
                    std::abs(fwd - bwd) / std::max({std::abs(fwd), std::abs(bwd), options.abs_floor});
                if (spread > tolerance) {
                    ++report.kinks;
                    numeric = rel_to(fwd) < rel_to(bwd) ? fwd : bwd;
                    rel = rel_to(numeric);
                }
            }
            ++report.coords_checked;
            if (rel > report.max_rel_error || report.coords_checked == 1) {
                report.max_rel_error = rel;
                report.worst_tensor = t.name;
                report.worst_index = i;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

// ---- default suite ---------------------------------------------------------

namespace {

using unet::AttentionGateParams;

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_unit(eng); }
    std::size_t index(std::size_t lo, std::size_t hi) { return lo + uniform_index(eng, hi - lo + 1); }

    Tensor<double> tensor(Dims dims, double lo = -1, double hi = 1) {
        Tensor<double> t(std::move(dims));
        for (auto& v : t.data()) v = uniform(lo, hi);
        return t;
    }
    // Values at least `gap` away from zero.
    Tensor<double> away_from_zero(Dims dims, double gap) {
        Tensor<double> t(std::move(dims));
        for (auto& v : t.data()) {
            const double m = uniform(gap, 1.0);
            v = uniform_unit(eng) < 0.5 ? -m : m;
        }
        return t;
    }
    // Distinct values spaced at least 1 / size apart (no pooling ties).
    Tensor<double> distinct(Dims dims) {
        Tensor<double> t(std::move(dims));
        std::vector<std::size_t> order(t.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_in_place(std::span<std::size_t>(order), eng);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(order[i]) / static_cast<double>(t.size());
        return t;
    }
};

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    require_same_shape(a, b, "projection");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

constexpr double kLayerTol = 1e-4;
constexpr double kLinearTol = 1e-7;
constexpr double kLossTol = 1e-5;
constexpr double kModelTol = 1e-3;

// Random linear functional of a layer output: loss = <r, f(inputs)>, so the
// analytic gradient is the backward pass applied to r.
template <typename Forward, typename Backward>
GradcheckReport projected(const std::string& label, std::uint64_t seed, double tol,
                          std::vector<std::pair<std::string, Tensor<double>*>> inputs, Forward forward,
                          Backward backward, Rng& rng) {
    const Tensor<double> y = forward();
    const Tensor<double> r = rng.tensor(y.dims());
    std::vector<Tensor<double>> grads = backward(r);
    std::vector<GradcheckTarget> targets;
    for (std::size_t i = 0; i < inputs.size(); ++i) targets.push_back({inputs[i].first, inputs[i].second, grads.at(i)});
    GradcheckOptions opt;
    opt.seed = seed;
    return gradcheck(label, targets, [&] { return dot(r, forward()); }, tol, opt);
}

void conv_cases(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    {
        Rng rng(seed * 101 + 1);
        auto x = rng.tensor({1, 1, 6, 6});
        auto w = rng.tensor({2, 1, 3, 3});
        auto b = rng.tensor({2});
        out.push_back(projected(
            "conv2d 1x6x6 -> 2 pad 1", seed, kLayerTol, {{"x", &x}, {"weight", &w}, {"bias", &b}},
            [&] { return conv2d_forward(x, w, b, 1, 1); },
            [&](const Tensor<double>& r) {
                auto g = conv2d_backward(x, w, true, r, 1, 1);
                return std::vector{g.input, g.weight, g.bias};
            },
            rng));
    }
    {
        Rng rng(seed * 101 + 2);
        auto x = rng.tensor({2, 3, 7, 7});
        auto w = rng.tensor({4, 3, 3, 3});
        Tensor<double> none;
        out.push_back(projected(
            "conv2d stride 2 no bias", seed, kLayerTol, {{"x", &x}, {"weight", &w}},
            [&] { return conv2d_forward(x, w, none, 2, 0); },
            [&](const Tensor<double>& r) {
                auto g = conv2d_backward(x, w, false, r, 2, 0);
                return std::vector{g.input, g.weight};
            },
            rng));
    }
    {
        Rng rng(seed * 101 + 3);
        auto x = rng.tensor({2, 3, 4, 4});
        auto w = rng.tensor({4, 3, 1, 1});
        auto b = rng.tensor({4});
        out.push_back(projected(
            "linear (1x1 conv)", seed, kLinearTol, {{"x", &x}, {"weight", &w}, {"bias", &b}},
            [&] { return conv2d_forward(x, w, b, 1, 0); },
            [&](const Tensor<double>& r) {
                auto g = conv2d_backward(x, w, true, r, 1, 0);
                return std::vector{g.input, g.weight, g.bias};
            },
            rng));
    }
    {
        Rng rng(seed * 101 + 4);
        auto x = rng.tensor({2, 3, 3, 3});
        auto w = rng.tensor({3, 2, 2, 2});
        auto b = rng.tensor({2});
        out.push_back(projected(
            "transposed conv 2x", seed, kLayerTol, {{"x", &x}, {"weight", &w}, {"bias", &b}},
            [&] { return transposed_conv2x_forward(x, w, b); },
            [&](const Tensor<double>& r) {
                auto g = transposed_conv2x_backward(x, w, r);
                return std::vector{g.input, g.weight, g.bias};
            },
            rng));
    }
}

void pointwise_cases(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    Rng rng(seed * 131 + 7);
    {
        auto x = rng.away_from_zero({2, 2, 3, 3}, 1e-3);
        out.push_back(projected(
            "relu", seed, kLayerTol, {{"x", &x}}, [&] { return relu_forward(x); },
            [&](const Tensor<double>& r) { return std::vector{relu_backward(x, r)}; }, rng));
    }
    {
        auto x = rng.tensor({2, 2, 3, 3}, -4, 4);
        out.push_back(projected(
            "sigmoid", seed, kLayerTol, {{"x", &x}}, [&] { return sigmoid_forward(x); },
            [&](const Tensor<double>& r) { return std::vector{sigmoid_backward(sigmoid_forward(x), r)}; }, rng));
    }
    {
        auto x = rng.distinct({2, 2, 4, 6});
        out.push_back(projected(
            "maxpool 2x2", seed, kLayerTol, {{"x", &x}}, [&] { return maxpool2x2_forward(x); },
            [&](const Tensor<double>& r) { return std::vector{maxpool2x2_backward(x, r)}; }, rng));
    }
    {
        auto x = rng.tensor({2, 2, 3, 4});
        out.push_back(projected(
            "nearest upsample 2x", seed, kLayerTol, {{"x", &x}}, [&] { return nearest_upsample2x_forward(x); },
            [&](const Tensor<double>& r) { return std::vector{nearest_upsample2x_backward(r)}; }, rng));
    }
    {
        auto a = rng.tensor({2, 2, 3, 3});
        auto b = rng.tensor({2, 3, 3, 3});
        out.push_back(projected(
            "concat channels", seed, kLayerTol, {{"a", &a}, {"b", &b}},
            [&] { return concat_channels_forward(a, b); },
            [&](const Tensor<double>& r) {
                auto g = concat_channels_backward(r, 2);
                return std::vector{g.a, g.b};
            },
            rng));
    }
    {
        auto a = rng.tensor({2, 3, 3, 3});
        auto b = rng.tensor({2, 3, 3, 3});
        out.push_back(projected(
            "add", seed, kLayerTol, {{"a", &a}, {"b", &b}}, [&] { return add_forward(a, b); },
            [&](const Tensor<double>& r) {
                auto g = add_backward(r);
                return std::vector{g.a, g.b};
            },
            rng));
    }
    {
        auto a = rng.tensor({2, 3, 3, 3});
        auto b = rng.tensor({2, 1, 3, 3});
        out.push_back(projected(
            "mul broadcast", seed, kLayerTol, {{"a", &a}, {"b", &b}}, [&] { return mul_forward(a, b); },
            [&](const Tensor<double>& r) {
                auto g = mul_backward(a, b, r);
                return std::vector{g.a, g.b};
            },
            rng));
    }
}

void batchnorm_cases(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        Rng rng(seed * 151 + (mode == Mode::Train ? 1 : 2));
        auto x = rng.tensor({2, 3, 3, 4}, -2, 2);
        auto gamma = rng.tensor({3}, 0.5, 1.5);
        auto beta = rng.tensor({3});
        BatchNormState<double> running{rng.tensor({3}), rng.tensor({3}, 0.5, 2.0)};
        out.push_back(projected(
            mode == Mode::Train ? "batchnorm train" : "batchnorm eval", seed, kLayerTol,
            {{"x", &x}, {"gamma", &gamma}, {"beta", &beta}},
            [&] { return batchnorm_forward(x, gamma, beta, running, mode).output; },
            [&](const Tensor<double>& r) {
                auto fwd = batchnorm_forward(x, gamma, beta, running, mode);
                auto g = batchnorm_backward(fwd.cache, gamma, r);
                return std::vector{g.input, g.gamma, g.beta};
            },
            rng));
    }
}

void loss_cases(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    Rng rng(seed * 171 + 5);
    Tensor<double> y({2, 1, 4, 4});
    for (auto& v : y.data()) v = uniform_unit(rng.eng) < 0.5 ? 0.0 : 1.0;
    GradcheckOptions opt;
    opt.seed = seed;
    {
        auto p = rng.tensor({2, 1, 4, 4}, 0.05, 0.95);
        std::vector<GradcheckTarget> t{{"predictions", &p, bce_loss(p, y).grad}};
        out.push_back(gradcheck("bce loss", t, [&] { return bce_loss(p, y).loss; }, kLossTol, opt));
    }
    {
        auto z = rng.tensor({2, 1, 4, 4}, -5, 5);
        std::vector<GradcheckTarget> t{{"logits", &z, bce_with_logits(z, y).grad}};
        out.push_back(gradcheck("bce with logits", t, [&] { return bce_with_logits(z, y).loss; }, kLossTol, opt));
    }
}

void gate_case(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    Rng rng(seed * 191 + 11);
    const std::size_t gc = rng.index(2, 8), xc = rng.index(2, 8), inter = rng.index(2, 8);
    const std::size_t h = rng.index(4, 12), w = rng.index(4, 12);
    auto g = rng.tensor({2, gc, h, w});
    auto x = rng.tensor({2, xc, h, w});
    auto p = AttentionGateParams<double>::zeros(gc, xc, inter);
    p.w_g.weight = rng.tensor(p.w_g.weight.dims());
    p.w_g.bias = rng.tensor(p.w_g.bias.dims());
    p.w_x.weight = rng.tensor(p.w_x.weight.dims());
    p.w_x.bias = rng.tensor(p.w_x.bias.dims());
    p.bn.gamma = rng.tensor({inter}, 0.5, 1.5);
    p.bn.beta = rng.tensor({inter});
    p.w_rho.weight = rng.tensor(p.w_rho.weight.dims());
    p.w_rho.bias = rng.tensor(p.w_rho.bias.dims());

    const std::string label = "attention gate C=" + std::to_string(gc) + "/" + std::to_string(xc) + "/" +
                              std::to_string(inter) + " " + std::to_string(h) + "x" + std::to_string(w);
    out.push_back(projected(
        label, seed, kLayerTol,
        {{"g", &g},
         {"x", &x},
         {"w_g.weight", &p.w_g.weight},
         {"w_g.bias", &p.w_g.bias},
         {"w_x.weight", &p.w_x.weight},
         {"w_x.bias", &p.w_x.bias},
         {"bn.gamma", &p.bn.gamma},
         {"bn.beta", &p.bn.beta},
         {"w_rho.weight", &p.w_rho.weight},
         {"w_rho.bias", &p.w_rho.bias}},
        [&] { return unet::attention_gate_forward(g, x, p, Mode::Train).x_out; },
        [&](const Tensor<double>& r) {
            auto fwd = unet::attention_gate_forward(g, x, p, Mode::Train);
            auto gr = unet::attention_gate_backward(fwd.cache, p, r);
            return std::vector{gr.g,
                               gr.x,
                               gr.params.w_g.weight,
                               gr.params.w_g.bias,
                               gr.params.w_x.weight,
                               gr.params.w_x.bias,
                               gr.params.bn.gamma,
                               gr.params.bn.beta,
                               gr.params.w_rho.weight,
                               gr.params.w_rho.bias};
        },
        rng));
}

void model_case(std::uint64_t seed, std::vector<GradcheckReport>& out) {
    Rng rng(seed * 211 + 13);
    unet::AttentionUNetConfig cfg;
    cfg.in_channels = 2;
    cfg.widths = {3, 4};
    cfg.upsample = seed % 2 == 0 ? unet::UpsampleKind::Transposed : unet::UpsampleKind::NearestConv;
    unet::AttentionUNet<double> model(cfg, seed);
    model.params().visit_trainable([&](const std::string& name, Tensor<double>& t) {
        if (!name.ends_with(".weight")) {
            const bool scale = name.ends_with(".gamma");
            for (auto& v : t.data()) v = scale ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
        }
    });
    auto x = rng.tensor({2, 2, 8, 8});
    const auto fwd = model.forward(x, Mode::Train);
    const auto r = rng.tensor(fwd.output.dims());
    Tensor<double> dx;
    const auto grads = model.backward(fwd, r, unet::GradWrt::Probabilities, &dx);

    std::vector<GradcheckTarget> targets{{"input", &x, dx}};
    std::vector<Tensor<double>> analytic;
    grads.visit_trainable([&](const std::string&, const Tensor<double>& t) { analytic.push_back(t); });
    std::size_t k = 0;
    model.params().visit_trainable(
        [&](const std::string& name, Tensor<double>& t) { targets.push_back({name, &t, analytic.at(k++)}); });

    GradcheckOptions opt;
    opt.seed = seed;
    const std::string label = std::string("depth-2 model (") + std::string(unet::upsample_name(cfg.upsample)) + ")";
    out.push_back(gradcheck(
        label, targets, [&] { return dot(r, model.forward(x, Mode::Train).output); }, kModelTol, opt));
}

}  // namespace

std::vector<GradcheckReport> run_gradcheck_suite(int seeds) {
    std::vector<GradcheckReport> out;
    for (int s = 0; s < seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        conv_cases(seed, out);
        pointwise_cases(seed, out);
        batchnorm_cases(seed, out);
        loss_cases(seed, out);
        gate_case(seed, out);
        model_case(seed, out);
    }
    return out;
}

}  // namespace quanvseg::nn
