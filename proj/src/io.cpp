#include "qsdcert/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string where(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::string fmt(double x) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

std::string hex(std::uint64_t x) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
    out << text;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : read_text(path)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Matrix parse_matrix_csv(std::string_view text, std::string_view source) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t end = text.find('\n');
        std::string_view line = trim(text.substr(0, end));
        text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        while (true) {
            const std::size_t comma = line.find(',');
            const std::string_view field = trim(line.substr(0, comma));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
                throw Error(ErrorCode::ParseError,
                            where(source, line_no) + "bad number '" + std::string(field) + "'", {line_no});
            row.push_back(v);
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorCode::ParseError,
                        where(source, line_no) + "expected " + std::to_string(rows.front().size()) +
                            " fields, found " + std::to_string(row.size()),
                        {line_no});
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorCode::ParseError, std::string(source) + ": no data rows");
    return Matrix::from_rows(rows);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    return parse_matrix_csv(read_text(path), path.string());
}

Vector read_vector_csv(const std::filesystem::path& path) {
    const Matrix m = read_matrix_csv(path);
    if (m.rows() != 1)
        throw Error(ErrorCode::ParseError, path.string() + ": expected a single row of values");
    return Vector(m.data().begin(), m.data().end());
}

std::string matrix_csv(const Matrix& m, std::string_view header) {
    std::string out;
    std::string_view h = header;
    while (!h.empty()) {
        const std::size_t end = h.find('\n');
        out += "# ";
        out += h.substr(0, end);
        out += '\n';
        h = end == std::string_view::npos ? std::string_view{} : h.substr(end + 1);
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += fmt(m(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace qsdcert
