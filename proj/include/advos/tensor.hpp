#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace advos {

// Dense row-major matrix of 64-bit reals. Row vectors are 1xN, column
// vectors Nx1, scalars 1x1. All numeric state in the library lives in
// these; values are expected to stay finite (NaN/Inf is an error state
// checked at the tape level).
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols);
    Tensor(int rows, int cols, std::vector<double> values);
    Tensor(std::initializer_list<std::initializer_list<double>> rows);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double v);
    static Tensor row(std::vector<double> values);
    static Tensor column(std::vector<double> values);
    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }
    static Tensor identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;

    double& at(int r, int c) {
        check_index(r, c);
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    double at(int r, int c) const {
        check_index(r, c);
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    // Scalar accessor; contract-checked.
    double item() const;

    bool all_finite() const;
    void fill(double v);

    Tensor transposed() const;

private:
    void check_index(int r, int c) const;

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// GEMM kernels (Eigen-backed). "n" = as stored, "t" = transposed operand.
// matmul_nn:  out = A  * B      [m,k]x[k,n] -> [m,n]
// matmul_nt:  out = A  * B^T    [m,k]x[n,k] -> [m,n]
// matmul_tn:  out = A^T * B     [k,m]x[k,n] -> [m,n]
// accumulate=true adds into out (which must be pre-shaped).
void matmul_nn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);

}  // namespace advos
