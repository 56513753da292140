#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Core>
#include <Eigen/QR>

#include "normlab/errors.hpp"
#include "normlab/rng.hpp"

namespace normlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Euclidean norm of a vector.
inline double norm(const Vector& x)
{
    return std::sqrt(x.squaredNorm());
}

/// Frobenius norm of a matrix.
inline double norm(const Matrix& m)
{
    return std::sqrt(m.squaredNorm());
}

/// Fills a rows x cols matrix, row-major, with i.i.d. N(0, variance) draws
/// from the (seed, stream) sequence of `rng`.
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double variance, RngState rng)
{
    detail::require(rows > 0 && cols > 0, "gaussian_matrix: dimensions must be positive");
    detail::require(variance > 0.0 && std::isfinite(variance), "gaussian_matrix: variance must be positive");
    Matrix out(rows, cols);
    Generator gen(rng);
    const double sd = std::sqrt(variance);
    double* data = out.data();
    for (Eigen::Index i = 0; i < rows * cols; ++i) {
        data[i] = sd * gen.normal();
    }
    return out;
}

/// Top-left rows x cols block of an unbounded field of i.i.d. N(0, variance)
/// draws. Row i comes from its own sub-stream, so a smaller block is exactly
/// a sub-matrix of a larger one drawn from the same state.
inline Matrix gaussian_block(Eigen::Index rows, Eigen::Index cols, double variance, RngState rng)
{
    detail::require(rows > 0 && cols > 0, "gaussian_block: dimensions must be positive");
    detail::require(variance > 0.0 && std::isfinite(variance), "gaussian_block: variance must be positive");
    Matrix out(rows, cols);
    const double sd = std::sqrt(variance);
    for (Eigen::Index i = 0; i < rows; ++i) {
        Generator gen(derive(rng, static_cast<std::uint64_t>(i)));
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = sd * gen.normal();
        }
    }
    return out;
}

/// Vector of i.i.d. N(0, variance) draws.
inline Vector gaussian_vector(Eigen::Index dim, double variance, RngState rng)
{
    detail::require(dim > 0, "gaussian_vector: dimension must be positive");
    detail::require(variance > 0.0 && std::isfinite(variance), "gaussian_vector: variance must be positive");
    Vector out(dim);
    Generator gen(rng);
    const double sd = std::sqrt(variance);
    for (Eigen::Index i = 0; i < dim; ++i) {
        out[i] = sd * gen.normal();
    }
    return out;
}

/// Random ambient_dim x subspace_dim matrix with orthonormal columns.
///
/// Householder QR of a standard Gaussian matrix; column signs are fixed so
/// that R has a positive diagonal, which makes the basis Haar distributed.
inline Matrix orthonormal_basis(Eigen::Index ambient_dim, Eigen::Index subspace_dim, RngState rng)
{
    detail::require(ambient_dim >= 1, "orthonormal_basis: ambient_dim must be positive");
    detail::require(subspace_dim >= 1 && subspace_dim <= ambient_dim,
                    "orthonormal_basis: need 1 <= subspace_dim <= ambient_dim");
    const Eigen::MatrixXd g = gaussian_matrix(ambient_dim, subspace_dim, 1.0, rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim, subspace_dim);
    const Eigen::MatrixXd& packed = qr.matrixQR();
    for (Eigen::Index j = 0; j < subspace_dim; ++j) {
        if (packed(j, j) < 0.0) {
            q.col(j) = -q.col(j);
        }
    }
    return q;
}

} // namespace normlab
