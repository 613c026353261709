#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "quanvseg/attention_unet.hpp"
#include "quanvseg/quanvolution.hpp"
#include "quanvseg/training.hpp"

namespace quanvseg {

// key=value run configuration. Blank lines and lines starting with '#' are
// ignored. Unknown keys are rejected; missing keys keep their defaults.
class RunConfig {
public:
    RunConfig();

    static RunConfig parse(std::string_view text);
    static RunConfig load(const std::string& path);

    // Throws ConfigError for unknown keys or values that do not parse.
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

    static const std::vector<std::string>& known_keys();
    std::string to_text() const;

    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    qsim::CircuitSpec circuit() const;
    quanv::QuanvConfig quanv() const;
    quanv::QuanvConfig quanv(qsim::CircuitSpec circuit) const;
    unet::AttentionUNetConfig model() const;
    unet::TrainConfig train() const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

}  // namespace quanvseg
