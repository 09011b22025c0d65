#ifndef GRANGER_IO_HPP
#define GRANGER_IO_HPP

#include "granger/matrix.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace granger::io {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Strict double parse; throws FormatError with the given context on failure.
double parse_double(std::string_view text, const std::string& context);

/// Atomic write: write to a sibling temp file, then rename over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string render_csv(const Matrix& m, const std::vector<std::string>& header = {});
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header = {});

struct CsvContents {
    std::vector<std::string> header;  // empty when the file has no header row
    Matrix data;
};

/// Reads a comma-separated numeric table. When the first row has any
/// non-numeric cell it is taken as the header.
CsvContents read_csv(const std::filesystem::path& path);

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace granger::io

#endif
