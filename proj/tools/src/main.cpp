#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "quanvseg/errors.hpp"

using namespace quanvseg::cli;

namespace {

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--config", f.config_path, "key=value run configuration file");
    cmd->add_option("--set", f.overrides, "override a config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quanvolutional Attention U-Net toolkit"};
    app.require_subcommand(1);

    SynthDataArgs synth;
    auto* c_synth = app.add_subcommand("synth-data", "generate synthetic SAR-like scenes and building masks");
    c_synth->add_option("--output-dir", synth.output_dir)->required();
    c_synth->add_option("--scenes", synth.scenes, "number of scenes")->check(CLI::PositiveNumber);
    c_synth->add_option("--height", synth.height)->check(CLI::Range(32, 1 << 16));
    c_synth->add_option("--width", synth.width)->check(CLI::Range(32, 1 << 16));
    c_synth->add_option("--buildings", synth.buildings);
    c_synth->add_option("--looks", synth.looks)->check(CLI::Range(1.0, 1e9));
    c_synth->add_flag("--no-speckle", synth.no_speckle);
    c_synth->add_option("--seed", synth.seed);

    MakePatchesArgs patches;
    auto* c_patch = app.add_subcommand("make-patches", "cut scenes into overlapping patches and split them");
    add_config_flags(c_patch, patches.cfg);
    c_patch->add_option("--image", patches.images, "scene raster (PGM or QVT1), repeatable")->required();
    c_patch->add_option("--mask", patches.masks, "building mask (PGM or QVT1), repeatable")->required();
    c_patch->add_option("--output-dir", patches.output_dir)->required();
    c_patch->add_flag("--db", patches.db_input, "input is in dB; normalise with norm.lo_db / norm.hi_db");

    QuanvolveArgs quanv;
    auto* c_quanv = app.add_subcommand("quanvolve", "apply the frozen quanvolutional filter");
    add_config_flags(c_quanv, quanv.cfg);
    c_quanv->add_option("--input", quanv.input, "PGM image or QVT1 image/stack in [0,1]")->required();
    c_quanv->add_option("--output", quanv.output, "QVT1 feature stack")->required();
    c_quanv->add_option("--circuit-in", quanv.circuit_in, "reuse a saved circuit");
    c_quanv->add_option("--circuit-out", quanv.circuit_out, "save the circuit used");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "train an Attention U-Net");
    add_config_flags(c_train, train.cfg);
    c_train->add_option("--inputs", train.inputs, "N x C x H x W QVT1")->required();
    c_train->add_option("--masks", train.masks, "N x 1 x H x W QVT1")->required();
    c_train->add_option("--checkpoint", train.checkpoint, "output checkpoint path")->required();
    c_train->add_option("--log", train.log, "tab-separated epoch log (default stdout)");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "overall accuracy and IoU");
    c_eval->add_option("--checkpoint", eval.checkpoint);
    c_eval->add_option("--inputs", eval.inputs);
    c_eval->add_option("--predictions", eval.predictions, "probabilities instead of a model");
    c_eval->add_option("--masks", eval.masks)->required();
    c_eval->add_option("--batch", eval.batch)->check(CLI::PositiveNumber);

    PredictArgs predict;
    auto* c_pred = app.add_subcommand("predict", "write one PGM mask per patch");
    c_pred->add_option("--checkpoint", predict.checkpoint)->required();
    c_pred->add_option("--inputs", predict.inputs)->required();
    c_pred->add_option("--output-dir", predict.output_dir)->required();
    c_pred->add_option("--masks", predict.masks, "also write input | truth | prediction panels");
    c_pred->add_option("--probabilities", predict.probabilities, "QVT1 file for the raw probabilities");
    c_pred->add_option("--batch", predict.batch)->check(CLI::PositiveNumber);

    ParamCountArgs pc;
    auto* c_pc = app.add_subcommand("param-count", "count trainable parameters");
    add_config_flags(c_pc, pc.cfg);
    c_pc->add_option("--reference", pc.reference, "baseline | quantum");

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    c_gc->add_option("--seeds", gc.seeds);
    c_gc->add_flag("--verbose", gc.verbose);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*c_synth) return cmd_synth_data(synth);
        if (*c_patch) return cmd_make_patches(patches);
        if (*c_quanv) return cmd_quanvolve(quanv);
        if (*c_train) return cmd_train(train);
        if (*c_eval) return cmd_eval(eval);
        if (*c_pred) return cmd_predict(predict);
        if (*c_pc) return cmd_param_count(pc);
        if (*c_gc) return cmd_gradcheck(gc);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const quanvseg::FileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
