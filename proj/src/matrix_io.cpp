#include "rlae/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace rlae {

namespace {

template <typename T>
void to_little_endian(T value, char* out) {
    std::memcpy(out, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(out, out + sizeof(T));
}

template <typename T>
T from_little_endian(const char* in) {
    char buf[sizeof(T)];
    std::memcpy(buf, in, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

}  // namespace

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("container holds square matrices only");
    const auto n = static_cast<std::uint64_t>(m.rows());
    char header[kMatrixHeaderBytes] = {};
    std::memcpy(header, kMatrixMagic.data(), kMatrixMagic.size());
    to_little_endian(n, header + 8);
    to_little_endian(kDtypeFloat64, header + 16);
    out.write(header, sizeof header);

    std::vector<char> row(static_cast<std::size_t>(n) * sizeof(double));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            to_little_endian(m(r, c), row.data() + static_cast<std::size_t>(c) * sizeof(double));
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("failed writing matrix payload");
}

Eigen::MatrixXd read_matrix(std::istream& in) {
    char header[kMatrixHeaderBytes];
    if (!in.read(header, sizeof header)) throw std::runtime_error("truncated matrix header");
    if (!std::equal(kMatrixMagic.begin(), kMatrixMagic.end(), header)) throw std::runtime_error("bad matrix magic");
    const auto n = from_little_endian<std::uint64_t>(header + 8);
    const auto dtype = from_little_endian<std::uint32_t>(header + 16);
    if (dtype != kDtypeFloat64) throw std::runtime_error("unsupported matrix dtype " + std::to_string(dtype));
    if (n > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max()))
        throw std::runtime_error("matrix dimension too large");

    const auto dim = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd m(dim, dim);
    std::vector<char> row(static_cast<std::size_t>(n) * sizeof(double));
    for (Eigen::Index r = 0; r < dim; ++r) {
        if (!in.read(row.data(), static_cast<std::streamsize>(row.size())))
            throw std::runtime_error("truncated matrix payload at row " + std::to_string(r));
        for (Eigen::Index c = 0; c < dim; ++c)
            m(r, c) = from_little_endian<double>(row.data() + static_cast<std::size_t>(c) * sizeof(double));
    }
    return m;
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot create " + path);
    write_matrix(out, m);
}

Eigen::MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_matrix(in);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, std::span<const ItemIndex> labels) {
    const bool labelled = !labels.empty();
    if (labelled && (static_cast<Eigen::Index>(labels.size()) != m.rows() || m.rows() != m.cols()))
        throw std::invalid_argument("labels must match a square matrix");
    const auto old_precision = out.precision(17);
    if (labelled) {
        out << "item";
        for (ItemIndex i : labels) out << ',' << i;
        out << '\n';
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (labelled) out << labels[static_cast<std::size_t>(r)] << ',';
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out << ',';
            out << m(r, c);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace rlae
