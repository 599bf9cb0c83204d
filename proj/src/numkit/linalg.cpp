#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "coordlqr/numkit.hpp"

namespace coordlqr {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::NoStabilizingSolution: return "NoStabilizingSolution";
        case ErrorCode::NotHurwitz: return "NotHurwitz";
        case ErrorCode::NotUnitNorm: return "NotUnitNorm";
        case ErrorCode::NotStabilizable: return "NotStabilizable";
        case ErrorCode::NotOrthonormal: return "NotOrthonormal";
        case ErrorCode::AssumptionViolated: return "AssumptionViolated";
        case ErrorCode::SingularDCGain: return "SingularDCGain";
        case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
        case ErrorCode::NotMinimalWeight: return "NotMinimalWeight";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::UnstableClosedLoop: return "UnstableClosedLoop";
        case ErrorCode::InternalInconsistency: return "InternalInconsistency";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

namespace numkit {

void Tolerances::validate() const {
    if (!(residual_rel > 0 && psd_slack > 0 && hurwitz_margin > 0 && rank_drop > 0)) {
        throw Error(ErrorCode::InvalidArgument, "tolerances must be strictly positive");
    }
}

bool all_finite(const Mat& M) noexcept {
    return M.size() == 0 || M.allFinite();
}

void require_finite(const Mat& M, std::string_view what) {
    if (!all_finite(M)) {
        throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
    }
}

void require_square(const Mat& M, std::string_view what) {
    if (M.rows() != M.cols()) {
        std::ostringstream os;
        os << what << " must be square, got " << M.rows() << "x" << M.cols();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

void require_shape(const Mat& M, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
    if (M.rows() != rows || M.cols() != cols) {
        std::ostringstream os;
        os << what << " must be " << rows << "x" << cols << ", got " << M.rows() << "x" << M.cols();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

Mat symmetrize(const Mat& M) {
    return 0.5 * (M + M.transpose());
}

double min_eig_sym(const Mat& M) {
    require_square(M, "matrix");
    if (M.size() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat psd_sqrt(const Mat& Q) {
    require_square(Q, "Q");
    if (Q.size() == 0) {
        return Q;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(Q));
    const Vec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Mat checked_inverse(const Mat& M, std::string_view what) {
    require_square(M, what);
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::AssumptionViolated, std::string(what) + " is singular");
    }
    return lu.inverse();
}

std::vector<std::complex<double>> eigenvalues(const Mat& A) {
    require_square(A, "A");
    require_finite(A, "A");
    if (A.size() == 0) {
        return {};
    }
    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::InternalInconsistency, "eigenvalue iteration did not converge");
    }
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

double spectral_abscissa(const Mat& A) {
    double result = -std::numeric_limits<double>::infinity();
    for (const auto& lambda : eigenvalues(A)) {
        result = std::max(result, lambda.real());
    }
    return result;
}

bool is_hurwitz(const Mat& A, const Tolerances& tol) {
    return spectral_abscissa(A) < -tol.hurwitz_margin;
}

namespace {

using CMat = Eigen::MatrixXcd;

double smallest_singular_value(const CMat& M) {
    if (M.rows() == 0 || M.cols() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    // Callers pass tall matrices, so min(rows, cols) = cols singular values.
    Eigen::JacobiSVD<CMat> svd(M);
    return svd.singularValues().minCoeff();
}

double op_norm(const Mat& M) {
    if (M.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Mat> svd(M);
    return svd.singularValues()(0);
}

// [A - lambda I; C] full column rank
bool column_rank_full_at(const Mat& A, const Mat& C, std::complex<double> lambda, double threshold) {
    const Eigen::Index n = A.rows();
    CMat stacked(n + C.rows(), n);
    stacked.topRows(n) = A.cast<std::complex<double>>() - lambda * CMat::Identity(n, n);
    stacked.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    return smallest_singular_value(stacked) > threshold;
}

// [A - lambda I, B] full row rank
bool row_rank_full_at(const Mat& A, const Mat& B, std::complex<double> lambda, double threshold) {
    const Eigen::Index n = A.rows();
    CMat joined(n, n + B.cols());
    joined.leftCols(n) = A.cast<std::complex<double>>() - lambda * CMat::Identity(n, n);
    joined.rightCols(B.cols()) = B.cast<std::complex<double>>();
    return smallest_singular_value(joined.adjoint()) > threshold;
}

double rank_threshold(const Mat& A, const Mat& other, const Tolerances& tol) {
    const double scale = std::max({op_norm(A), op_norm(other), std::numeric_limits<double>::min()});
    return tol.rank_drop * scale;
}

}  // namespace

bool pbh_no_imaginary_unobservable(const Mat& Q, const Mat& A, const Tolerances& tol) {
    require_square(A, "A");
    require_shape(Q, A.rows(), A.cols(), "Q");
    require_finite(Q, "Q");
    const Mat C = psd_sqrt(Q);
    const double threshold = rank_threshold(A, C, tol);
    for (const auto& lambda : eigenvalues(A)) {
        if (std::abs(lambda.real()) <= tol.hurwitz_margin &&
            !column_rank_full_at(A, C, lambda, threshold)) {
            return false;
        }
    }
    return true;
}

bool pbh_stabilizable(const Mat& A, const Mat& B, const Tolerances& tol) {
    require_square(A, "A");
    if (B.rows() != A.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
    }
    require_finite(B, "B");
    const double threshold = rank_threshold(A, B, tol);
    for (const auto& lambda : eigenvalues(A)) {
        if (lambda.real() >= -tol.hurwitz_margin && !row_rank_full_at(A, B, lambda, threshold)) {
            return false;
        }
    }
    return true;
}

bool pbh_controllable(const Mat& A, const Mat& B, const Tolerances& tol) {
    require_square(A, "A");
    if (B.rows() != A.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
    }
    const double threshold = rank_threshold(A, B, tol);
    for (const auto& lambda : eigenvalues(A)) {
        if (!row_rank_full_at(A, B, lambda, threshold)) {
            return false;
        }
    }
    return true;
}

bool pbh_observable(const Mat& C, const Mat& A, const Tolerances& tol) {
    require_square(A, "A");
    if (C.cols() != A.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "C must have as many columns as A");
    }
    const double threshold = rank_threshold(A, C, tol);
    for (const auto& lambda : eigenvalues(A)) {
        if (!column_rank_full_at(A, C, lambda, threshold)) {
            return false;
        }
    }
    return true;
}

Mat kron(const Mat& A, const Mat& B) {
    Mat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return K;
}

std::size_t numerical_rank(const Mat& A, const Tolerances& tol) {
    require_finite(A, "A");
    if (A.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Mat> svd(A);
    const Vec& s = svd.singularValues();
    const double sigma_max = s(0);
    if (sigma_max == 0.0) {
        return 0;
    }
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > tol.rank_drop * sigma_max) {
            ++rank;
        }
    }
    return rank;
}

Mat decoupling_unitary(const Vec& mu, const Tolerances& tol) {
    require_finite(mu, "mu");
    const Eigen::Index nu = mu.size();
    if (nu == 0 || std::abs(mu.norm() - 1.0) > tol.psd_slack) {
        throw Error(ErrorCode::NotUnitNorm, "mu must be a unit vector");
    }
    const double tail = mu.tail(nu - 1).squaredNorm();
    if (tail == 0.0 && mu(0) > 0.0) {
        return Mat::Identity(nu, nu);
    }
    // v = mu - e1 with the first entry formed without cancellation when mu1 > 0.
    Vec v = mu;
    v(0) = mu(0) > 0.0 ? -tail / (mu(0) + 1.0) : mu(0) - 1.0;
    const double vv = v.squaredNorm();
    Mat U = Mat::Identity(nu, nu) - (2.0 / vv) * v * v.transpose();
    return U;
}

Mat orthogonal_complement(const Mat& M) {
    const Eigen::Index r = M.rows();
    const Eigen::Index c = M.cols();
    if (c > r) {
        throw Error(ErrorCode::DimensionMismatch, "orthogonal complement needs a tall matrix");
    }
    if (c == 0) {
        return Mat::Identity(r, r);
    }
    Eigen::HouseholderQR<Mat> qr(M);
    const Mat Q = qr.householderQ() * Mat::Identity(r, r);
    return Q.rightCols(r - c);
}

Mat expm(const Mat& A, double t) {
    require_square(A, "A");
    require_finite(A, "A");
    if (A.size() == 0) {
        return A;
    }
    const Mat At = A * t;
    return At.exp();
}

}  // namespace numkit
}  // namespace coordlqr
