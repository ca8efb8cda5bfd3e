#include "gmil/matrix.hpp"

#include <cmath>
#include <string>

#include "gmil/errors.hpp"
#include "gmil/kernels.hpp"

namespace gmil {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw InternalError("matrix data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::ones(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    m.fill(1.0);
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols_) throw InternalError("ragged row list");
        for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

void Matrix::fill(double v) {
    for (double& x : data_) x = v;
}

void Matrix::check_finite(const char* context) const {
    for (double x : data_)
        if (!std::isfinite(x))
            throw InternalError(std::string("non-finite value in ") + context);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw InternalError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    kernels::active().matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InternalError(std::string(op) + " shape mismatch");
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    kernels::active().add(a.data(), b.data(), out.data(), a.size());
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    kernels::active().sub(a.data(), b.data(), out.data(), a.size());
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    kernels::active().mul(a.data(), b.data(), out.data(), a.size());
    return out;
}

Matrix scale(double alpha, const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    kernels::active().scale(alpha, m.data(), out.data(), m.size());
    return out;
}

void axpy_into(double alpha, const Matrix& x, Matrix& y) {
    require_same_shape(x, y, "axpy");
    kernels::active().axpy(alpha, x.data(), y.data(), x.size());
}

double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    for (double x : m.vec()) s += x * x;
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double e = std::fabs(a.data()[i] - b.data()[i]);
        if (e > d) d = e;
    }
    return d;
}

}  // namespace gmil
