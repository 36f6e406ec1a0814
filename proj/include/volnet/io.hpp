#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace volnet {

// One parsed CSV line; `line_number` is 1-based and includes the header.
struct CsvRow {
    std::vector<std::string> fields;
    int line_number = 0;
};

// Reads an entire CSV file. Verifies the header matches `expected_header`
// exactly (comma-joined) and that every row has the same arity.
// Throws DataError with the offending line number otherwise.
std::vector<CsvRow> read_csv(const std::filesystem::path& path,
                             const std::string& expected_header);

// Strict finite-double parse; context goes into the DataError message.
double parse_double(const std::string& s, int line_number, const std::string& field);
int parse_int(const std::string& s, int line_number, const std::string& field);

// Round-trip-exact formatting for doubles ("%.17g").
std::string format_double(double v);

// Buffered CSV writer with deterministic float formatting.
class CsvWriter {
public:
    explicit CsvWriter(std::string header);
    void field(const std::string& s);
    void field(double v);
    void field(int v);
    void end_row();
    // Atomically (write temp + rename) persists the buffer.
    void save(const std::filesystem::path& path) const;
    const std::string& str() const { return buffer_; }

private:
    std::string buffer_;
    bool row_open_ = false;
};

// FNV-1a 64-bit digest of a file's bytes, hex-encoded. Used by run manifests:
// the digest changes iff the input bytes change.
std::string file_digest(const std::filesystem::path& path);
std::string bytes_digest(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace volnet
