#include "volnet/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "volnet/errors.hpp"

namespace volnet {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::vector<CsvRow> read_csv(const std::filesystem::path& path,
                             const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());

    std::string line;
    int line_number = 0;
    if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
    ++line_number;
    {
        auto fields = split_line(line);
        std::string joined;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) joined += ',';
            joined += fields[i];
        }
        if (joined != expected_header) {
            throw DataError(path.string() + ": line 1: expected header '" + expected_header +
                            "', got '" + joined + "'");
        }
    }

    const auto arity = static_cast<std::size_t>(std::count(expected_header.begin(),
                                                           expected_header.end(), ',')) + 1;
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r") continue;
        CsvRow row{split_line(line), line_number};
        if (row.fields.size() != arity) {
            throw DataError(path.string() + ": line " + std::to_string(line_number) +
                            ": expected " + std::to_string(arity) + " fields, got " +
                            std::to_string(row.fields.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

double parse_double(const std::string& s, int line_number, const std::string& field) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_number) + ": field '" + field +
                        "': not a finite number: '" + s + "'");
    }
    return v;
}

int parse_int(const std::string& s, int line_number, const std::string& field) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw DataError("line " + std::to_string(line_number) + ": field '" + field +
                        "': not an integer: '" + s + "'");
    }
    return static_cast<int>(v);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(std::string header) : buffer_(std::move(header)) {
    buffer_ += '\n';
}

void CsvWriter::field(const std::string& s) {
    if (row_open_) buffer_ += ',';
    buffer_ += s;
    row_open_ = true;
}

void CsvWriter::field(double v) { field(format_double(v)); }
void CsvWriter::field(int v) { field(std::to_string(v)); }

void CsvWriter::end_row() {
    buffer_ += '\n';
    row_open_ = false;
}

void CsvWriter::save(const std::filesystem::path& path) const {
    write_file(path, buffer_);
}

std::string bytes_digest(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::filesystem::path& path) {
    return bytes_digest(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write file: " + tmp.string());
        out << contents;
    }
    fs::rename(tmp, path);
}

}  // namespace volnet
