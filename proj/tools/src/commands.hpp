#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace quanvseg::cli {

// Raised for bad flag combinations the parser cannot catch. Exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
};

struct SynthDataArgs {
    ConfigFlags cfg;
    std::string output_dir;
    std::size_t scenes = 1;
    std::size_t height = 256;
    std::size_t width = 256;
    std::size_t buildings = 20;
    double looks = 4;
    bool no_speckle = false;
    std::uint64_t seed = 0;
};

struct MakePatchesArgs {
    ConfigFlags cfg;
    std::vector<std::string> images;
    std::vector<std::string> masks;
    std::string output_dir;
    bool db_input = false;
};

struct QuanvolveArgs {
    ConfigFlags cfg;
    std::string input;
    std::string output;
    std::string circuit_in;
    std::string circuit_out;
};

struct TrainArgs {
    ConfigFlags cfg;
    std::string inputs;
    std::string masks;
    std::string checkpoint;
    std::string log;
};

struct EvalArgs {
    ConfigFlags cfg;
    std::string checkpoint;
    std::string predictions;
    std::string inputs;
    std::string masks;
    std::size_t batch = 8;
};

struct PredictArgs {
    std::string checkpoint;
    std::string inputs;
    std::string masks;
    std::string output_dir;
    std::string probabilities;
    std::size_t batch = 8;
};

struct ParamCountArgs {
    ConfigFlags cfg;
    std::string reference;
};

struct GradcheckArgs {
    int seeds = 10;
    bool verbose = false;
};

int cmd_synth_data(const SynthDataArgs& a);
int cmd_make_patches(const MakePatchesArgs& a);
int cmd_quanvolve(const QuanvolveArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_predict(const PredictArgs& a);
int cmd_param_count(const ParamCountArgs& a);
int cmd_gradcheck(const GradcheckArgs& a);

}  // namespace quanvseg::cli
