#include "mfg/model_io.hpp"

#include "mfg/errors.hpp"
#include "mfg/format.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace mfg {

namespace {

struct Entry {
    int line = 0;
    std::string value;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<double> parse_numbers(const Entry& entry, const std::string& key) {
    std::vector<double> out;
    std::string buf = entry.value;
    for (char& c : buf)
        if (c == ',' || c == ';' || c == '[' || c == ']') c = ' ';
    std::istringstream in(buf);
    std::string token;
    while (in >> token) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0' || errno == ERANGE)
            throw ParseError(entry.line, "key '" + key + "': cannot parse number '" + token + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace

LqModel parse_model(std::string_view text) {
    std::map<std::string, Entry> entries;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find_first_of("=:");
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (entries.count(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
        entries[key] = Entry{line_no, value};
    }

    static const char* known[] = {"dim", "horizon", "eta", "Q", "R", "Qbar", "S", "QT", "label"};
    for (const auto& [key, entry] : entries) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError(entry.line, "unknown key '" + key + "'");
    }
    for (const char* k : known) {
        if (std::string(k) == "label") continue;
        if (!entries.count(k)) throw ParseError(line_no, std::string("missing key '") + k + "'");
    }

    LqModel m;
    {
        const auto& e = entries.at("dim");
        const auto v = parse_numbers(e, "dim");
        if (v.size() != 1 || v[0] < 1 || v[0] != static_cast<int>(v[0]))
            throw ParseError(e.line, "key 'dim' must be a positive integer");
        m.dim = static_cast<int>(v[0]);
    }
    {
        const auto& e = entries.at("horizon");
        const auto v = parse_numbers(e, "horizon");
        if (v.size() != 1 || !(v[0] > 0.0)) throw ParseError(e.line, "key 'horizon' must be a positive number");
        m.horizon = v[0];
    }
    auto matrix = [&](const char* key) {
        const auto& e = entries.at(key);
        const auto v = parse_numbers(e, key);
        const size_t want = static_cast<size_t>(m.dim) * static_cast<size_t>(m.dim);
        if (v.size() != want)
            throw ParseError(e.line, std::string("key '") + key + "' has " + std::to_string(v.size()) +
                                         " entries, expected " + std::to_string(want));
        Mat out(m.dim, m.dim);
        for (int i = 0; i < m.dim; ++i)
            for (int j = 0; j < m.dim; ++j) out(i, j) = v[static_cast<size_t>(i * m.dim + j)];
        return out;
    };
    m.eta = matrix("eta");
    m.Q = matrix("Q");
    m.R = matrix("R");
    m.Qbar = matrix("Qbar");
    m.S = matrix("S");
    m.QT = matrix("QT");
    if (entries.count("label")) m.label = entries.at("label").value;

    try {
        m.validate();
    } catch (const InputError& err) {
        int line = entries.at("dim").line;
        const std::string what = err.what();
        if (what.find("eta") != std::string::npos) line = entries.at("eta").line;
        if (what.find("R ") != std::string::npos || what.find(" R") != std::string::npos) line = entries.at("R").line;
        throw ParseError(line, what);
    }
    return m;
}

LqModel read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read model file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_model(ss.str());
    } catch (const ParseError& err) {
        throw ParseError(err.line(), path + ": " + err.message());
    }
}

std::string serialize_model(const LqModel& model) {
    std::ostringstream out;
    if (!model.label.empty()) out << "label = " << model.label << "\n";
    out << "dim = " << model.dim << "\n";
    out << "horizon = " << format_double(model.horizon) << "\n";
    auto matrix = [&](const char* key, const Mat& a) {
        out << key << " =";
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j) out << ' ' << format_double(a(i, j));
        out << "\n";
    };
    matrix("eta", model.eta);
    matrix("Q", model.Q);
    matrix("R", model.R);
    matrix("Qbar", model.Qbar);
    matrix("S", model.S);
    matrix("QT", model.QT);
    return out.str();
}

void write_model_file(const std::string& path, const LqModel& model) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file '" + path + "'");
    out << serialize_model(model);
}

} // namespace mfg
