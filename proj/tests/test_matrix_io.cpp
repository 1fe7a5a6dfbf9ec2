#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "rlae/matrix_io.hpp"

using namespace rlae;

TEST(MatrixIoTest, BinaryRoundTripIsExact) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(7, 7);
    m(0, 0) = 1.0 / 3.0;
    m(6, 6) = -0.0;
    std::stringstream buf;
    write_matrix(buf, m);
    EXPECT_EQ(buf.str().size(), kMatrixHeaderBytes + 7 * 7 * sizeof(double));
    const Eigen::MatrixXd back = read_matrix(buf);
    EXPECT_EQ(back, m);
}

TEST(MatrixIoTest, HeaderLayout) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    std::stringstream buf;
    write_matrix(buf, m);
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 8), "RLAEMAT1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
    EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);
    // Row-major payload: second value is m(0, 1).
    double second;
    std::memcpy(&second, bytes.data() + kMatrixHeaderBytes + sizeof(double), sizeof(double));
    EXPECT_EQ(second, 2.0);
}

TEST(MatrixIoTest, RejectsCorruptInput) {
    std::stringstream bad_magic("NOTAMATRIX..............");
    EXPECT_THROW(read_matrix(bad_magic), std::runtime_error);

    std::stringstream buf;
    write_matrix(buf, Eigen::MatrixXd::Identity(3, 3));
    std::string s = buf.str();
    std::stringstream truncated(s.substr(0, s.size() - 5));
    EXPECT_THROW(read_matrix(truncated), std::runtime_error);

    s[16] = 7;
    std::stringstream dtype(s);
    EXPECT_THROW(read_matrix(dtype), std::runtime_error);

    std::stringstream sink;
    EXPECT_THROW(write_matrix(sink, Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(MatrixIoTest, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "rlae_matrix_io_test.bin";
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(4, 4);
    save_matrix(path.string(), m);
    EXPECT_EQ(load_matrix(path.string()), m);
    std::filesystem::remove(path);
    EXPECT_THROW(load_matrix(path.string()), std::runtime_error);
}

TEST(MatrixIoTest, CsvWithLabels) {
    Eigen::MatrixXd m(2, 2);
    m << 1.5, 0.25, 0.25, 2;
    std::ostringstream out;
    const std::vector<ItemIndex> labels{7, 3};
    write_matrix_csv(out, m, labels);
    EXPECT_EQ(out.str(), "item,7,3\n7,1.5,0.25\n3,0.25,2\n");

    std::ostringstream plain;
    write_matrix_csv(plain, m);
    EXPECT_EQ(plain.str(), "1.5,0.25\n0.25,2\n");
    const std::vector<ItemIndex> wrong{1};
    EXPECT_THROW(write_matrix_csv(plain, m, wrong), std::invalid_argument);
}
