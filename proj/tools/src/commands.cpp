#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "io_helpers.hpp"
#include "quanvseg/attention_unet.hpp"
#include "quanvseg/checkpoint.hpp"
#include "quanvseg/datapipe.hpp"
#include "quanvseg/formats.hpp"
#include "quanvseg/gradcheck.hpp"
#include "quanvseg/quanvolution.hpp"
#include "quanvseg/run_config.hpp"
#include "quanvseg/training.hpp"

namespace quanvseg::cli {

namespace {

RunConfig load_config(const ConfigFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        require_file(flags.config_path);
        cfg = RunConfig::load(flags.config_path);
    }
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::string read_text(const std::string& path) {
    require_file(path);
    std::ifstream in(path);
    if (!in) throw FileError(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw FileError(path, "cannot create file");
    out << text;
    if (!out) throw Error("write failed: " + path);
}

nn::Tensor<float> load_masks(const std::string& path) {
    if (has_extension(path, ".pgm")) {
        require_file(path);
        const Raster m = io::read_mask(path);
        return nn::Tensor<float>({1, 1, m.height, m.width}, std::vector<float>(m.values.begin(), m.values.end()));
    }
    nn::Tensor<float> t = load_float(path);
    if (t.dim(1) != 1) throw ShapeError("masks must have one channel, got " + nn::dims_to_string(t.dims()));
    for (auto& v : t.data()) v = v > 0.5f ? 1.0f : 0.0f;
    return t;
}

nn::Tensor<float> stack_patches(const std::vector<const data::Patch*>& patches, std::size_t size, bool masks) {
    nn::Tensor<float> t({patches.size(), 1, size, size});
    const std::size_t plane = size * size;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& src = masks ? patches[i]->mask.values : patches[i]->input.values;
        std::copy(src.begin(), src.end(), t.ptr() + i * plane);
    }
    return t;
}

Raster plane_of(const nn::Tensor<float>& t, std::size_t n, std::size_t c) {
    Raster r(t.dim(2), t.dim(3));
    const std::size_t plane = r.height * r.width;
    const float* src = t.ptr() + (n * t.dim(1) + c) * plane;
    for (std::size_t i = 0; i < plane; ++i) r.values[i] = src[i];
    return r;
}

std::string millions(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fM", static_cast<double>(n) / 1e6);
    return buf;
}

}  // namespace

int cmd_synth_data(const SynthDataArgs& a) {
    ensure_directory(a.output_dir);
    const double looks = a.no_speckle ? data::kNoSpeckle : a.looks;
    for (std::size_t i = 0; i < a.scenes; ++i) {
        const auto scene = data::synth_scene(a.seed + i, a.height, a.width, a.buildings, looks);
        io::write_pgm(numbered(a.output_dir, "scene", i, ".pgm"), io::raster_to_pgm(scene.image, 65535));
        io::write_mask(numbered(a.output_dir, "mask", i, ".pgm"), scene.mask);
    }
    std::cout << "wrote " << a.scenes << " scene(s) of " << a.height << "x" << a.width << " to " << a.output_dir
              << "\n";
    return 0;
}

int cmd_make_patches(const MakePatchesArgs& a) {
    if (a.images.size() != a.masks.size()) throw UsageError("--image and --mask must be given the same number of times");
    const RunConfig cfg = load_config(a.cfg);
    const auto patch = static_cast<std::size_t>(cfg.get_int("data.patch"));
    const auto stride = static_cast<std::size_t>(cfg.get_int("data.stride"));

    data::PatchSet all;
    all.patch_size = patch;
    all.stride = stride;
    std::vector<std::size_t> source;
    for (std::size_t k = 0; k < a.images.size(); ++k) {
        const auto stack = load_stack(a.images[k]);
        if (stack.dim(0) != 1 || stack.dim(1) != 1) throw ShapeError(a.images[k] + " must hold a single image");
        Raster image = channel_raster(stack, 0, 0);
        if (a.db_input) image = data::normalize_db(image, cfg.get_double("norm.lo_db"), cfg.get_double("norm.hi_db"));
        const auto mt = load_masks(a.masks[k]);
        const Raster mask = plane_of(mt, 0, 0);
        auto set = data::extract_patches(image, mask, patch, stride);
        for (auto& p : set.items) {
            all.items.push_back(std::move(p));
            source.push_back(k);
        }
    }
    all = data::split(std::move(all), cfg.get_double("data.test_fraction"), cfg.get_u64("data.seed"));

    ensure_directory(a.output_dir);
    const auto dir = [&](const std::string& f) { return a.output_dir + "/" + f; };
    for (auto s : {data::Split::Train, data::Split::Test}) {
        const auto items = all.select(s);
        const std::string prefix = s == data::Split::Train ? "train" : "test";
        io::write_tensor(dir(prefix + "_inputs.qvt"), stack_patches(items, patch, false));
        io::write_tensor(dir(prefix + "_masks.qvt"), stack_patches(items, patch, true));
    }
    std::ostringstream table;
    table << "index\tsource\trow\tcol\tsplit\n";
    for (std::size_t i = 0; i < all.items.size(); ++i) {
        const auto& p = all.items[i];
        table << i << "\t" << a.images[source[i]] << "\t" << p.row << "\t" << p.col << "\t"
              << (p.split == data::Split::Train ? "train" : "test") << "\n";
    }
    write_text(dir("patches.tsv"), table.str());
    std::cout << "patches=" << all.items.size() << " train=" << all.count(data::Split::Train)
              << " test=" << all.count(data::Split::Test) << "\n";
    return 0;
}

int cmd_quanvolve(const QuanvolveArgs& a) {
    const RunConfig cfg = load_config(a.cfg);
    std::size_t rank = 0;
    const auto stack = load_stack(a.input, &rank);
    const qsim::CircuitSpec circuit =
        a.circuit_in.empty() ? cfg.circuit() : qsim::parse_circuit(read_text(a.circuit_in));
    const quanv::QuanvConfig qc = cfg.quanv(circuit);
    const auto images = to_rasters(stack);

    std::vector<quanv::FeatureStack> features;
    for (const auto& img : images) features.push_back(quanv::quanvolve(img, qc));
    const auto& f0 = features.front();
    // quanv.concat keeps the raw band as an extra last channel
    const bool concat = cfg.get_bool("quanv.concat");
    if (concat && (f0.height != stack.dim(2) || f0.width != stack.dim(3))) {
        throw ConfigError("quanv.concat needs features at the input resolution (stride 1, same-reflect)");
    }
    const std::size_t channels = f0.channels + (concat ? 1 : 0);
    nn::Dims dims = rank <= 2 ? nn::Dims{channels, f0.height, f0.width}
                              : nn::Dims{features.size(), channels, f0.height, f0.width};
    nn::Tensor<float> out(dims);
    const std::size_t per = f0.data.size();
    const std::size_t plane = f0.height * f0.width;
    for (std::size_t n = 0; n < features.size(); ++n) {
        float* dst = out.ptr() + n * channels * plane;
        std::copy(features[n].data.begin(), features[n].data.end(), dst);
        if (concat) std::copy(images[n].values.begin(), images[n].values.end(), dst + per);
    }
    io::write_tensor(a.output, out);
    if (!a.circuit_out.empty()) write_text(a.circuit_out, qsim::serialize_circuit(circuit));
    std::cout << "features " << nn::dims_to_string(out.dims()) << " -> " << a.output << " (circuit "
              << qsim::template_name(circuit.kind()) << ", " << circuit.n_qubits() << " qubits, "
              << circuit.n_layers() << " layers)\n";
    return 0;
}

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = load_config(a.cfg);
    unet::SegmentationSet set{load_float(a.inputs), load_masks(a.masks)};
    set.validate();
    if (!cfg.is_set("model.in_channels")) cfg.set("model.in_channels", std::to_string(set.inputs.dim(1)));
    const auto model_cfg = cfg.model();
    unet::AttentionUNet<float> model(model_cfg, cfg.get_u64("train.seed"));

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!a.log.empty()) {
        log_file.open(a.log);
        if (!log_file) throw FileError(a.log, "cannot create file");
        log = &log_file;
    }
    const auto history = unet::train(model, set, cfg.train(), log);
    unet::save_checkpoint(a.checkpoint, model);
    std::cout << "trained " << history.size() << " epoch(s) on " << set.size() << " patch(es), "
              << model.enumerate_params() << " parameters -> " << a.checkpoint << "\n";
    if (!history.empty()) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "final loss=%.6f train_oa=%.6f", history.back().loss, history.back().train_oa);
        std::cout << buf << "\n";
    }
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    const auto masks = load_masks(a.masks);
    nn::Tensor<float> probs;
    if (!a.predictions.empty()) {
        probs = load_float(a.predictions);
    } else {
        if (a.checkpoint.empty() || a.inputs.empty()) {
            throw UsageError("eval needs --predictions, or --checkpoint together with --inputs");
        }
        require_file(a.checkpoint);
        const auto model = unet::load_checkpoint(a.checkpoint);
        probs = unet::predict(model, load_float(a.inputs), a.batch);
    }
    const auto report = unet::score(probs, masks);
    std::printf("patch\toa\tiou\n");
    for (const auto& p : report.patches) std::printf("%zu\t%.6f\t%.6f\n", p.index, p.oa, p.iou);
    std::printf("OA=%.6f IoU=%.6f\n", report.oa, report.iou);
    return 0;
}

int cmd_predict(const PredictArgs& a) {
    require_file(a.checkpoint);
    const auto model = unet::load_checkpoint(a.checkpoint);
    const auto inputs = load_float(a.inputs);
    const auto probs = unet::predict(model, inputs, a.batch);
    nn::Tensor<float> masks;
    if (!a.masks.empty()) {
        masks = load_masks(a.masks);
        nn::require_same_shape(masks, probs, "ground-truth masks");
    }
    ensure_directory(a.output_dir);
    for (std::size_t n = 0; n < probs.dim(0); ++n) {
        Raster pred = plane_of(probs, n, 0);
        for (auto& v : pred.values) v = v >= 0.5 ? 1.0 : 0.0;
        io::write_mask(numbered(a.output_dir, "pred", n, ".pgm"), pred);
        if (!masks.empty()) {
            // input band | ground truth | prediction
            const Raster in = plane_of(inputs, n, 0);
            const Raster gt = plane_of(masks, n, 0);
            Raster side(pred.height, 3 * pred.width);
            for (std::size_t r = 0; r < pred.height; ++r) {
                for (std::size_t c = 0; c < pred.width; ++c) {
                    side.at(r, c) = in.at(r, c);
                    side.at(r, pred.width + c) = gt.at(r, c);
                    side.at(r, 2 * pred.width + c) = pred.at(r, c);
                }
            }
            io::write_pgm(numbered(a.output_dir, "compare", n, ".pgm"), io::raster_to_pgm(side));
        }
    }
    if (!a.probabilities.empty()) io::write_tensor(a.probabilities, probs);
    std::cout << "wrote " << probs.dim(0) << " mask(s) to " << a.output_dir << "\n";
    return 0;
}

int cmd_param_count(const ParamCountArgs& a) {
    unet::AttentionUNetConfig mc;
    if (a.reference == "baseline") {
        mc = unet::AttentionUNetConfig::baseline_reference();
    } else if (a.reference == "quantum") {
        mc = unet::AttentionUNetConfig::quantum_reference();
    } else if (a.reference.empty()) {
        mc = load_config(a.cfg).model();
    } else {
        throw UsageError("--reference must be baseline or quantum");
    }
    const std::uint64_t formula = unet::count_params(mc);
    std::uint64_t enumerated = 0;
    unet::allocate_params<float>(mc).visit_trainable(
        [&](const std::string&, const nn::Tensor<float>& t) { enumerated += t.size(); });
    std::string widths;
    for (std::size_t i = 0; i < mc.widths.size(); ++i) widths += (i ? "," : "") + std::to_string(mc.widths[i]);
    std::cout << "in_channels=" << mc.in_channels << " widths=" << widths
              << " upsample=" << unet::upsample_name(mc.upsample) << "\n";
    if (enumerated != formula) {
        std::cerr << "error: enumerated " << enumerated << " parameters but the formula gives " << formula << "\n";
        return 1;
    }
    std::cout << "params=" << formula << " (" << millions(formula) << ")\n";
    return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
    if (a.seeds < 1) throw UsageError("--seeds must be >= 1");
    const auto reports = nn::run_gradcheck_suite(a.seeds);
    struct Worst {
        double err = 0;
        double tol = 0;
        std::string where;
        int runs = 0;
        std::size_t kinks = 0;
        bool ok = true;
    };
    std::vector<std::string> order;
    std::map<std::string, Worst> worst;
    // gate labels carry their random shape; group them
    auto group = [](const std::string& label) {
        return label.starts_with("attention gate") ? std::string("attention gate") : label;
    };
    bool all_ok = true;
    for (const auto& r : reports) {
        const std::string key = group(r.label);
        if (!worst.count(key)) order.push_back(key);
        auto& w = worst[key];
        ++w.runs;
        w.kinks += r.kinks;
        w.tol = r.tolerance;
        w.ok = w.ok && r.passed();
        all_ok = all_ok && r.passed();
        if (r.max_rel_error >= w.err) {
            w.err = r.max_rel_error;
            w.where = r.worst_tensor + "[" + std::to_string(r.worst_index) + "]";
        }
        if (a.verbose) {
            std::printf("%s  %-36s max_rel=%.3e tol=%.0e coords=%zu kinks=%zu worst=%s[%zu]\n",
                        r.passed() ? "ok  " : "FAIL", r.label.c_str(), r.max_rel_error, r.tolerance, r.coords_checked,
                        r.kinks, r.worst_tensor.c_str(),
                        r.worst_index);
        }
    }
    for (const auto& key : order) {
        const auto& w = worst[key];
        std::printf("%s  %-28s runs=%d max_rel=%.3e tol=%.0e kinks=%zu at %s\n", w.ok ? "PASS" : "FAIL", key.c_str(),
                    w.runs, w.err, w.tol, w.kinks, w.where.c_str());
    }
    std::printf("gradcheck %s\n", all_ok ? "passed" : "FAILED");
    return all_ok ? 0 : 1;
}

}  // namespace quanvseg::cli
