#include "badit/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace badit::io {

namespace {

constexpr char kMagic[5] = {'B', 'M', 'A', 'T', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_number(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorKind::Format,
                "line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  return v;
}

}  // namespace

std::string encode_bmat(const DenseMatrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX)
    throw Error(ErrorKind::Dimension, "matrix too large for BMAT1");
  std::string out(kMagic, sizeof(kMagic));
  out.reserve(13 + 8 * m.size());
  put_le(out, static_cast<std::uint32_t>(m.rows()));
  put_le(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_le(out, v);
  return out;
}

DenseMatrix decode_bmat(const std::string& bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorKind::Format, "missing BMAT1 header");
  const auto rows = get_le<std::uint32_t>(bytes, 5);
  const auto cols = get_le<std::uint32_t>(bytes, 9);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != 13 + 8 * count)
    throw Error(ErrorKind::Format, "BMAT1 payload has " + std::to_string(bytes.size() - 13) +
                                       " bytes, expected " + std::to_string(8 * count));
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_le<double>(bytes, 13 + 8 * i);
  return DenseMatrix(rows, cols, std::move(data));
}

void write_bmat(const std::filesystem::path& path, const DenseMatrix& m) {
  write_text(path, encode_bmat(m));
}

DenseMatrix read_bmat(const std::filesystem::path& path) { return decode_bmat(slurp(path)); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const DenseMatrix& m,
               const std::vector<std::string>& comment_lines) {
  std::string out;
  for (const auto& c : comment_lines) out += "# " + c + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += "\r\n";
  }
  write_text(path, out);
}

DenseMatrix parse_csv(const std::string& text) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    // Collect one record, honouring quoted fields that may contain newlines.
    std::vector<std::string> fields(1);
    bool quoted = false;
    bool comment = false;
    ++line_no;
    if (text[pos] == '#') comment = true;
    for (; pos < text.size(); ++pos) {
      const char ch = text[pos];
      if (quoted) {
        if (ch == '"') {
          if (pos + 1 < text.size() && text[pos + 1] == '"') {
            fields.back() += '"';
            ++pos;
          } else {
            quoted = false;
          }
        } else {
          fields.back() += ch;
        }
        continue;
      }
      if (ch == '"' && !comment) quoted = true;
      else if (ch == ',' && !comment) fields.emplace_back();
      else if (ch == '\n') { ++pos; break; }
      else fields.back() += ch;
    }
    if (quoted) throw Error(ErrorKind::Format, "unterminated quoted field");
    if (comment) continue;
    if (fields.size() == 1) {
      std::string_view f = fields[0];
      while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
      if (f.empty()) continue;
    }
    if (rows == 0) cols = fields.size();
    else if (fields.size() != cols)
      throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(cols) + " fields, got " +
                                         std::to_string(fields.size()));
    for (const auto& f : fields) data.push_back(parse_number(f, line_no));
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(data));
}

DenseMatrix read_csv(const std::filesystem::path& path) { return parse_csv(slurp(path)); }

DenseMatrix read_matrix(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv(path);
  return read_bmat(path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace badit::io
