#include "quanvseg/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace quanvseg {

namespace {

enum class Kind { Int, U64, Double, Bool, IntList, Text };

struct KeySpec {
    const char* key;
    const char* fallback;
    Kind kind;
};

// Defaults; quanv and circuit values follow the reference quanvolution setup.
constexpr KeySpec kKeys[] = {
    {"circuit.template", "basic", Kind::Text},
    {"circuit.qubits", "9", Kind::Int},
    {"circuit.layers", "2", Kind::Int},
    {"circuit.seed", "0", Kind::U64},
    {"quanv.kernel", "3", Kind::Int},
    {"quanv.stride", "1", Kind::Int},
    {"quanv.padding", "same-reflect", Kind::Text},
    {"quanv.rescale", "true", Kind::Bool},
    {"quanv.concat", "false", Kind::Bool},
    {"model.depth", "3", Kind::Int},
    {"model.widths", "8,16,32", Kind::IntList},
    {"model.in_channels", "1", Kind::Int},
    {"model.gate_widths", "", Kind::IntList},
    {"model.upsample", "transposed", Kind::Text},
    {"train.lr", "0.001", Kind::Double},
    {"train.epochs", "30", Kind::Int},
    {"train.batch", "8", Kind::Int},
    {"train.seed", "0", Kind::U64},
    {"data.patch", "256", Kind::Int},
    {"data.stride", "128", Kind::Int},
    {"data.test_fraction", "0.2", Kind::Double},
    {"data.seed", "0", Kind::U64},
    {"norm.lo_db", "-25", Kind::Double},
    {"norm.hi_db", "5", Kind::Double},
};

const KeySpec* find_key(std::string_view key) {
    for (const auto& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
        throw ConfigError("value '" + v + "' for " + key + " is not a valid number");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("value '" + v + "' for " + key + " is not a boolean");
}

std::vector<int> parse_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    if (trim(v).empty()) return out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        const std::size_t end = std::min(v.find(',', pos), v.size());
        out.push_back(parse_number<int>(key, trim(std::string_view(v).substr(pos, end - pos))));
        pos = end + 1;
    }
    return out;
}

void check_value(const KeySpec& spec, const std::string& v) {
    switch (spec.kind) {
        case Kind::Int: parse_number<std::int64_t>(spec.key, v); break;
        case Kind::U64: parse_number<std::uint64_t>(spec.key, v); break;
        case Kind::Double: parse_number<double>(spec.key, v); break;
        case Kind::Bool: parse_bool(spec.key, v); break;
        case Kind::IntList: parse_list(spec.key, v); break;
        case Kind::Text: break;
    }
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& k : kKeys) values_[k.key] = k.fallback;
}

const std::vector<std::string>& RunConfig::known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& k : kKeys) out.emplace_back(k.key);
        return out;
    }();
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("unknown config key '" + key + "'");
    const std::string v = trim(value);
    check_value(*spec, v);
    values_[key] = v;
    explicit_[key] = true;
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

RunConfig RunConfig::parse(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
        try {
            cfg.set(trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& k : kKeys) out += std::string(k.key) + "=" + values_.at(k.key) + "\n";
    return out;
}

std::int64_t RunConfig::get_int(const std::string& key) const { return parse_number<std::int64_t>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
bool RunConfig::get_bool(const std::string& key) const { return parse_bool(key, get(key)); }
std::vector<int> RunConfig::get_int_list(const std::string& key) const { return parse_list(key, get(key)); }

qsim::CircuitSpec RunConfig::circuit() const {
    const auto kind = qsim::template_from_name(get("circuit.template"));
    if (!kind || *kind == qsim::Template::Custom) {
        throw ConfigError("circuit.template must be basic, strong or random, got '" + get("circuit.template") + "'");
    }
    return qsim::build_circuit(*kind, static_cast<int>(get_int("circuit.qubits")),
                               static_cast<int>(get_int("circuit.layers")), get_u64("circuit.seed"));
}

quanv::QuanvConfig RunConfig::quanv() const { return quanv(circuit()); }

quanv::QuanvConfig RunConfig::quanv(qsim::CircuitSpec circuit) const {
    return quanv::QuanvConfig(static_cast<int>(get_int("quanv.kernel")), static_cast<int>(get_int("quanv.stride")),
                              quanv::padding_from_name(get("quanv.padding")), get_bool("quanv.rescale"),
                              std::move(circuit));
}

unet::AttentionUNetConfig RunConfig::model() const {
    unet::AttentionUNetConfig m;
    m.in_channels = static_cast<int>(get_int("model.in_channels"));
    const auto depth = get_int("model.depth");
    if (is_set("model.widths")) {
        m.widths = get_int_list("model.widths");
        if (is_set("model.depth") && static_cast<std::int64_t>(m.widths.size()) != depth) {
            throw ConfigError("model.widths has " + std::to_string(m.widths.size()) +
                              " entries but model.depth is " + std::to_string(depth));
        }
    } else if (is_set("model.depth")) {
        if (depth < 2 || depth > 8) throw ConfigError("model.depth must be between 2 and 8");
        m.widths.clear();
        for (std::int64_t i = 0; i < depth; ++i) m.widths.push_back(8 << i);
    } else {
        m.widths = get_int_list("model.widths");
    }
    m.gate_widths = get_int_list("model.gate_widths");
    m.upsample = unet::upsample_from_name(get("model.upsample"));
    m.validate();
    return m;
}

unet::TrainConfig RunConfig::train() const {
    unet::TrainConfig t;
    t.adam.lr = get_double("train.lr");
    if (t.adam.lr < 0) throw ConfigError("train.lr must be >= 0");
    const auto epochs = get_int("train.epochs");
    const auto batch = get_int("train.batch");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    t.epochs = static_cast<int>(epochs);
    t.batch = static_cast<std::size_t>(batch);
    t.seed = get_u64("train.seed");
    return t;
}

}  // namespace quanvseg
