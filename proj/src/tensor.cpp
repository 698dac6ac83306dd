#include "advos/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "advos/error.hpp"

namespace advos {

namespace {
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;
}  // namespace

Tensor::Tensor(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw ContractError("Tensor: negative dimension");
}

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != static_cast<std::size_t>(rows) * cols) {
        throw ContractError("Tensor: data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_str());
    }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw ContractError("Tensor: ragged init list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Tensor Tensor::full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    t.fill(v);
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor(1, n, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor(n, 1, std::move(values));
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[" << rows_ << "x" << cols_ << "]";
    return os.str();
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1) {
        throw ContractError("Tensor::item on non-scalar " + shape_str());
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::transposed() const {
    Tensor t(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
    return t;
}

namespace {
void check_out(const Tensor& out, int m, int n, const char* who) {
    if (out.rows() != m || out.cols() != n) {
        throw ContractError(std::string(who) + ": output shape mismatch");
    }
}
}  // namespace

void matmul_nn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
    if (a.cols() != b.rows()) {
        throw ContractError("matmul_nn: inner dims " + a.shape_str() + " x " + b.shape_str());
    }
    if (!accumulate) out = Tensor(a.rows(), b.cols());
    check_out(out, a.rows(), b.cols(), "matmul_nn");
    CMap ma(a.data(), a.rows(), a.cols());
    CMap mb(b.data(), b.rows(), b.cols());
    Map mo(out.data(), out.rows(), out.cols());
    if (accumulate)
        mo.noalias() += ma * mb;
    else
        mo.noalias() = ma * mb;
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
    if (a.cols() != b.cols()) {
        throw ContractError("matmul_nt: inner dims " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    if (!accumulate) out = Tensor(a.rows(), b.rows());
    check_out(out, a.rows(), b.rows(), "matmul_nt");
    CMap ma(a.data(), a.rows(), a.cols());
    CMap mb(b.data(), b.rows(), b.cols());
    Map mo(out.data(), out.rows(), out.cols());
    if (accumulate)
        mo.noalias() += ma * mb.transpose();
    else
        mo.noalias() = ma * mb.transpose();
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
    if (a.rows() != b.rows()) {
        throw ContractError("matmul_tn: inner dims " + a.shape_str() + "^T x " + b.shape_str());
    }
    if (!accumulate) out = Tensor(a.cols(), b.cols());
    check_out(out, a.cols(), b.cols(), "matmul_tn");
    CMap ma(a.data(), a.rows(), a.cols());
    CMap mb(b.data(), b.rows(), b.cols());
    Map mo(out.data(), out.rows(), out.cols());
    if (accumulate)
        mo.noalias() += ma.transpose() * mb;
    else
        mo.noalias() = ma.transpose() * mb;
}

}  // namespace advos

namespace advos {

void Tensor::check_index(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
        throw ContractError("tensor index (" + std::to_string(r) + "," + std::to_string(c) +
                            ") out of range for " + shape_str());
    }
}

}  // namespace advos
