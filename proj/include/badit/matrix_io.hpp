#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "badit/linops.hpp"

namespace badit::io {

/// "BMAT1" magic, u32 LE rows, u32 LE cols, rows×cols float64 LE row-major.
void write_bmat(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix read_bmat(const std::filesystem::path& path);

std::string encode_bmat(const DenseMatrix& m);
DenseMatrix decode_bmat(const std::string& bytes);

/// Plain numeric CSV (RFC 4180 quoting accepted on input, '.' decimal, no
/// header row). Lines starting with '#' are comments.
void write_csv(const std::filesystem::path& path, const DenseMatrix& m,
               const std::vector<std::string>& comment_lines = {});
DenseMatrix read_csv(const std::filesystem::path& path);
DenseMatrix parse_csv(const std::string& text);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

/// Reads a matrix choosing the codec from the extension (.csv, else BMAT).
DenseMatrix read_matrix(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace badit::io
