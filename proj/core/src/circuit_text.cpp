// Circuit text format, one record per line (LF endings):
//
//   qubits <n>            required, before any gate
//   template <name>       BasicEntangled | StronglyEntangled | Random | Custom
//   layers <L>
//   seed <u64>
//   RX|RY|RZ <qubit> <angle>
//   CNOT <control> <target>
//
// Angles are written with 17 significant digits so a round trip reproduces
// the binary value exactly. Blank lines and lines starting with '#' are
// ignored by the parser.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "quanvseg/errors.hpp"
#include "quanvseg/qsim.hpp"

namespace quanvseg::qsim {
namespace {

std::string format_angle(double angle) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", angle);
    return buf;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError(line_no, std::string("invalid ") + what + " '" + std::string(tok) + "'");
    }
    return value;
}

}  // namespace

std::string serialize_circuit(const CircuitSpec& spec) {
    std::ostringstream out;
    out << "qubits " << spec.n_qubits() << '\n';
    out << "template " << template_name(spec.kind()) << '\n';
    out << "layers " << spec.n_layers() << '\n';
    out << "seed " << spec.seed() << '\n';
    for (const auto& g : spec.gates()) {
        switch (g.kind) {
            case GateKind::RX: out << "RX " << g.target << ' ' << format_angle(g.angle) << '\n'; break;
            case GateKind::RY: out << "RY " << g.target << ' ' << format_angle(g.angle) << '\n'; break;
            case GateKind::RZ: out << "RZ " << g.target << ' ' << format_angle(g.angle) << '\n'; break;
            case GateKind::CNOT: out << "CNOT " << *g.control << ' ' << g.target << '\n'; break;
        }
    }
    return out.str();
}

CircuitSpec parse_circuit(std::string_view text) {
    std::optional<int> n_qubits;
    Template kind = Template::Custom;
    int layers = 0;
    std::uint64_t seed = 0;
    std::vector<Gate> gates;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const auto tok = split_ws(line);
        if (tok.empty() || tok[0].front() == '#') continue;

        const std::string_view key = tok[0];
        auto expect_args = [&](std::size_t n) {
            if (tok.size() != n + 1) {
                throw ParseError(line_no, "'" + std::string(key) + "' expects " + std::to_string(n) +
                                              " argument(s)");
            }
        };

        if (key == "qubits") {
            expect_args(1);
            if (!gates.empty()) throw ParseError(line_no, "'qubits' must precede all gates");
            n_qubits = parse_number<int>(tok[1], line_no, "qubit count");
            if (*n_qubits < 1 || *n_qubits > kMaxQubits) throw ParseError(line_no, "qubit count out of range");
        } else if (key == "template") {
            expect_args(1);
            auto t = template_from_name(tok[1]);
            if (!t) throw ParseError(line_no, "unknown template '" + std::string(tok[1]) + "'");
            kind = *t;
        } else if (key == "layers") {
            expect_args(1);
            layers = parse_number<int>(tok[1], line_no, "layer count");
            if (layers < 0) throw ParseError(line_no, "negative layer count");
        } else if (key == "seed") {
            expect_args(1);
            seed = parse_number<std::uint64_t>(tok[1], line_no, "seed");
        } else if (key == "RX" || key == "RY" || key == "RZ" || key == "CNOT") {
            if (!n_qubits) throw ParseError(line_no, "gate before 'qubits' header");
            expect_args(2);
            Gate g;
            if (key == "CNOT") {
                g = Gate::cnot(parse_number<int>(tok[1], line_no, "control qubit"),
                               parse_number<int>(tok[2], line_no, "target qubit"));
            } else {
                const GateKind k = key == "RX" ? GateKind::RX : key == "RY" ? GateKind::RY : GateKind::RZ;
                g = Gate{k, parse_number<int>(tok[1], line_no, "qubit"), std::nullopt,
                         parse_number<double>(tok[2], line_no, "angle")};
            }
            try {
                validate_gate(g, *n_qubits);
            } catch (const Error& e) {
                throw ParseError(line_no, e.what());
            }
            gates.push_back(g);
        } else {
            throw ParseError(line_no, "unknown record '" + std::string(key) + "'");
        }
    }
    if (!n_qubits) throw ParseError(line_no, "missing 'qubits' header");
    return CircuitSpec(*n_qubits, std::move(gates), kind, layers, seed);
}

}  // namespace quanvseg::qsim
