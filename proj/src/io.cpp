#include "rhdi/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace rhdi {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated header in " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double parse_double(const std::string& tok, const std::string& path) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw IoError("bad numeric field '" + tok + "' in " + path);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Eigen::MatrixXd read_csv_table(const std::string& path, std::vector<std::string>& header) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("missing header row in " + path);
  header = split_csv_line(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto toks = split_csv_line(line);
    if (toks.size() != header.size())
      throw IoError("row with " + std::to_string(toks.size()) + " fields, expected " +
                    std::to_string(header.size()) + " in " + path);
    std::vector<double> row(toks.size());
    for (std::size_t j = 0; j < toks.size(); ++j) row[j] = parse_double(toks[j], path);
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m,
                         std::uint32_t flags) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(binfmt::kMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  write_u32(os, flags);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      static_assert(sizeof(double) == 8);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
  if (!os) throw IoError("write failed for " + path);
}

Eigen::MatrixXd read_matrix_binary(const std::string& path, std::uint32_t* flags_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, binfmt::kMagic, 4) != 0)
    throw IoError("bad magic in " + path);
  std::uint32_t rows = read_u32(is, path);
  std::uint32_t cols = read_u32(is, path);
  std::uint32_t flags = read_u32(is, path);
  if (flags_out) *flags_out = flags;
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v;
      if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("truncated data in " + path);
      m(i, j) = v;
    }
  }
  return m;
}

void write_dataset_binary(const std::string& path, const Dataset& data) {
  Eigen::MatrixXd m(data.n(), data.p() + 1);
  m.col(0) = data.y;
  m.rightCols(data.p()) = data.X;
  write_matrix_binary(path, m, binfmt::kFlagDataset);
}

Dataset read_dataset_binary(const std::string& path) {
  std::uint32_t flags = 0;
  Eigen::MatrixXd m = read_matrix_binary(path, &flags);
  if (!(flags & binfmt::kFlagDataset)) throw IoError(path + " is not a dataset file");
  if (m.cols() < 2) throw IoError(path + " has no predictor columns");
  Dataset d;
  d.y = m.col(0);
  d.X = m.rightCols(m.cols() - 1);
  return d;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "y";
  for (Eigen::Index j = 1; j <= data.p(); ++j) os << ",X" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    os << format_double(data.y[i]);
    for (Eigen::Index j = 0; j < data.p(); ++j) os << "," << format_double(data.X(i, j));
    os << "\n";
  }
  if (!os) throw IoError("write failed for " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::vector<std::string> header;
  Eigen::MatrixXd m = read_csv_table(path, header);
  if (header.empty() || header[0] != "y")
    throw IoError("dataset CSV must start with a 'y' column: " + path);
  if (m.cols() < 2) throw IoError(path + " has no predictor columns");
  Dataset d;
  d.y = m.col(0);
  d.X = m.rightCols(m.cols() - 1);
  return d;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << "V" << (j + 1);
  os << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << (j ? "," : "") << format_double(m(i, j));
    os << "\n";
  }
  if (!os) throw IoError("write failed for " + path);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::vector<std::string> header;
  return read_csv_table(path, header);
}

}  // namespace rhdi
