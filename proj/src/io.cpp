#include "granger/io.hpp"

#include "granger/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace granger::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
    // trim surrounding whitespace and a possible trailing CR
    std::size_t b = text.find_first_not_of(" \t\r");
    std::size_t e = text.find_last_not_of(" \t\r");
    if (b == std::string_view::npos) throw FormatError(context + ": empty numeric field");
    text = text.substr(b, e - b + 1);
    double out = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw FormatError(context + ": cannot parse '" + std::string(text) + "' as a number");
    }
    return out;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string render_csv(const Matrix& m, const std::vector<std::string>& header) {
    std::string out;
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c) out += ',';
            out += header[c];
        }
        out += '\n';
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out += ',';
            out += format_double(m.at(r, c));
        }
        out += '\n';
    }
    return out;
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header) {
    write_text_atomic(path, render_csv(m, header));
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool looks_numeric(const std::string& field) {
    double out = 0.0;
    std::string_view text = field;
    std::size_t b = text.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return false;
    std::size_t e = text.find_last_not_of(" \t\r");
    text = text.substr(b, e - b + 1);
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

} // namespace

CsvContents read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    CsvContents out;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (line_no == 1 && !looks_numeric(fields[0])) {
            for (auto& f : fields) {
                std::size_t b = f.find_first_not_of(" \t\r");
                std::size_t e = f.find_last_not_of(" \t\r");
                out.header.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
            }
            cols = fields.size();
            continue;
        }
        if (cols == 0) cols = fields.size();
        if (fields.size() != cols) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(cols) + " fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            values.push_back(parse_double(
                fields[c], path.string() + ":" + std::to_string(line_no) + ":col " + std::to_string(c + 1)));
        }
    }
    if (cols == 0) throw FormatError(path.string() + ": empty file");
    const std::size_t rows = values.size() / cols;
    out.data = Matrix(rows, cols, std::move(values));
    return out;
}

void write_json_atomic(const fs::path& path, const nlohmann::json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace granger::io
