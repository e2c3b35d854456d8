#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rhdi/core.hpp"

namespace rhdi {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary matrix container: magic "RHDI", then u32 rows, u32 cols, u32 flags,
// then rows*cols little-endian doubles in row-major order. Flag bit 0 marks a
// dataset payload whose first column is y.
namespace binfmt {
inline constexpr char kMagic[4] = {'R', 'H', 'D', 'I'};
inline constexpr std::uint32_t kFlagDataset = 1u;
}  // namespace binfmt

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m,
                         std::uint32_t flags = 0);
Eigen::MatrixXd read_matrix_binary(const std::string& path,
                                   std::uint32_t* flags_out = nullptr);

void write_dataset_binary(const std::string& path, const Dataset& data);
Dataset read_dataset_binary(const std::string& path);

// CSV with a header row. Datasets use "y,X1,...,Xp"; bare matrices "V1..Vp".
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

}  // namespace rhdi
