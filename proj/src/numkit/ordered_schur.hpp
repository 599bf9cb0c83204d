#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace coordlqr::numkit::detail {

using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

struct ComplexSchurForm {
    CMat T;  // upper triangular
    CMat Z;  // unitary, M = Z T Z^*
};

ComplexSchurForm complex_schur(const Eigen::MatrixXd& M);

/// Reorders the diagonal of T so that every eigenvalue for which `select`
/// holds precedes the rest, by adjacent Givens swaps. Returns the count of
/// selected eigenvalues.
Eigen::Index reorder_schur(ComplexSchurForm& form, const std::function<bool(Complex)>& select);

}  // namespace coordlqr::numkit::detail
