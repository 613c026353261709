#include "quanvseg/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "quanvseg/formats.hpp"

namespace quanvseg::unet {

namespace {

constexpr const char* kHeader = "quanvseg-checkpoint 1";

std::string join(const std::vector<int>& v) {
    if (v.empty()) return "-";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<int> split_ints(const std::string& s, std::size_t line) {
    std::vector<int> out;
    if (s == "-") return out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t end = std::min(s.find(',', pos), s.size());
        int v = 0;
        const auto [p, ec] = std::from_chars(s.data() + pos, s.data() + end, v);
        if (ec != std::errc{} || p != s.data() + end) throw ParseError(line, "bad integer list '" + s + "'");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

struct Entry {
    std::string shape;
    std::size_t offset = 0;
};

}  // namespace

std::string manifest_path(const std::string& path) { return path + ".manifest"; }

void save_checkpoint(const std::string& path, const AttentionUNet<float>& model) {
    std::ofstream data(path, std::ios::binary);
    if (!data) throw FileError(path, "cannot create file");
    std::ostringstream manifest;
    const auto& cfg = model.config();
    manifest << kHeader << "\n"
             << "in_channels " << cfg.in_channels << "\n"
             << "widths " << join(cfg.widths) << "\n"
             << "gate_widths " << join(cfg.gate_widths) << "\n"
             << "upsample " << upsample_name(cfg.upsample) << "\n";
    std::size_t offset = 0;
    auto record = [&](const std::string& name, const Tensor<float>& t) {
        io::write_tensor(data, t);
        manifest << "tensor " << name << " " << nn::dims_to_string(t.dims()) << " " << offset << "\n";
        offset += io::encoded_size(t.dims(), io::DType::F32);
    };
    model.params().visit_trainable(record);
    model.params().visit_buffers(record);
    data.close();
    if (!data) throw Error("write failed: " + path);

    std::ofstream m(manifest_path(path));
    if (!m) throw FileError(manifest_path(path), "cannot create file");
    m << manifest.str();
    if (!m) throw Error("write failed: " + manifest_path(path));
}

AttentionUNet<float> load_checkpoint(const std::string& path) {
    const std::string mpath = manifest_path(path);
    std::ifstream m(mpath);
    if (!m) throw FileError(mpath);
    std::string line;
    std::size_t line_no = 0;
    AttentionUNetConfig cfg;
    std::map<std::string, Entry> entries;
    bool header = false;
    while (std::getline(m, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != kHeader) throw ParseError(line_no, "not a quanvseg checkpoint manifest");
            header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string key, value;
        ls >> key >> value;
        if (key == "in_channels") {
            cfg.in_channels = split_ints(value, line_no).at(0);
        } else if (key == "widths") {
            cfg.widths = split_ints(value, line_no);
        } else if (key == "gate_widths") {
            cfg.gate_widths = split_ints(value, line_no);
        } else if (key == "upsample") {
            cfg.upsample = upsample_from_name(value);
        } else if (key == "tensor") {
            Entry e;
            if (!(ls >> e.shape >> e.offset)) throw ParseError(line_no, "tensor line needs name, shape and offset");
            entries[value] = e;
        } else {
            throw ParseError(line_no, "unknown manifest key '" + key + "'");
        }
    }
    if (!header) throw ParseError(line_no, "empty checkpoint manifest");
    cfg.validate();

    std::ifstream data(path, std::ios::binary);
    if (!data) throw FileError(path);
    ModelParams<float> params = allocate_params<float>(cfg);
    auto load = [&](const std::string& name, Tensor<float>& t) {
        const auto it = entries.find(name);
        if (it == entries.end()) throw DataError("checkpoint has no tensor " + name);
        data.clear();
        data.seekg(static_cast<std::streamoff>(it->second.offset));
        const io::StoredTensor st = io::read_tensor(data, it->second.offset);
        if (st.dims() != t.dims()) {
            throw ShapeError("checkpoint tensor " + name + " has shape " + nn::dims_to_string(st.dims()) +
                             ", expected " + nn::dims_to_string(t.dims()));
        }
        t = st.to_float();
    };
    params.visit_trainable(load);
    params.visit_buffers(load);
    return AttentionUNet<float>(cfg, std::move(params));
}

}  // namespace quanvseg::unet
