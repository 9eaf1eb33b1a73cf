#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "qsdcert/matrix.hpp"

namespace qsdcert {

/// Shortest text that reads back to the same double.
std::string fmt(double x);
std::string hex(std::uint64_t x);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
/// FNV-1a over the file bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

/// Comma-separated rows; blank lines and lines starting with '#' are skipped.
/// Throws ParseError naming `source` and the 1-based line.
Matrix parse_matrix_csv(std::string_view text, std::string_view source = "<input>");
Matrix read_matrix_csv(const std::filesystem::path& path);
/// A single data row.
Vector read_vector_csv(const std::filesystem::path& path);

/// `header` lines are written as '#' comments before the rows.
std::string matrix_csv(const Matrix& m, std::string_view header = {});

}  // namespace qsdcert
