#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <span>
#include <string>

#include "rlae/interactions.hpp"

namespace rlae {

// Square-matrix container:
//   bytes 0..7    magic "RLAEMAT1"
//   bytes 8..15   n, uint64 little-endian
//   bytes 16..19  dtype code, uint32 little-endian (1 = float64)
//   bytes 20..23  reserved, zero
//   then n * n float64 little-endian values, row-major.
inline constexpr std::array<char, 8> kMatrixMagic{'R', 'L', 'A', 'E', 'M', 'A', 'T', '1'};
inline constexpr std::uint32_t kDtypeFloat64 = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 24;

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& in);

void save_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::string& path);

/// CSV grid; with `labels`, a header row and a leading label column carry the
/// item indices.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, std::span<const ItemIndex> labels = {});

}  // namespace rlae
