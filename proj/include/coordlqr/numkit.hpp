#pragma once

// Dense real linear algebra and matrix-equation solvers used by every
// synthesis routine in coordlqr.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace coordlqr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class ErrorCode {
    DimensionMismatch,
    NonFiniteInput,
    NoStabilizingSolution,
    NotHurwitz,
    NotUnitNorm,
    NotStabilizable,
    NotOrthonormal,
    AssumptionViolated,
    SingularDCGain,
    NonPositiveWeight,
    NotMinimalWeight,
    TooLarge,
    UnstableClosedLoop,
    InternalInconsistency,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace numkit {

struct Tolerances {
    double residual_rel = 1e-9;
    double psd_slack = 1e-8;
    double hurwitz_margin = 1e-8;
    double rank_drop = 1e-10;

    /// Throws InvalidArgument unless every field is strictly positive.
    void validate() const;
};

// ---- checks and small helpers -------------------------------------------

void require_finite(const Mat& M, std::string_view what);
void require_square(const Mat& M, std::string_view what);
void require_shape(const Mat& M, Eigen::Index rows, Eigen::Index cols, std::string_view what);

bool all_finite(const Mat& M) noexcept;

/// (M + M') / 2
Mat symmetrize(const Mat& M);

/// Smallest eigenvalue of the symmetric part of M.
double min_eig_sym(const Mat& M);

/// Symmetric PSD square root. Small negative eigenvalues (round-off) are clipped.
Mat psd_sqrt(const Mat& Q);

/// Inverse via a full-pivot LU; throws
/// DimensionMismatch when not square and AssumptionViolated when singular.
Mat checked_inverse(const Mat& M, std::string_view what);

// ---- spectra ---------------------------------------------------------------

/// Eigenvalues of a real square matrix (Hessenberg reduction + shifted QR).
std::vector<std::complex<double>> eigenvalues(const Mat& A);

/// Largest real part of the spectrum. Empty matrices return -infinity.
double spectral_abscissa(const Mat& A);

/// True iff every eigenvalue has real part < -hurwitz_margin.
bool is_hurwitz(const Mat& A, const Tolerances& tol = {});

/// For every eigenvalue lambda of A with |Re lambda| <= hurwitz_margin the
/// stacked matrix [A - lambda I; Q^{1/2}] has full column rank.
bool pbh_no_imaginary_unobservable(const Mat& Q, const Mat& A, const Tolerances& tol = {});

/// PBH stabilizability: [A - lambda I, B] has full row rank at every
/// eigenvalue with Re lambda >= -hurwitz_margin.
bool pbh_stabilizable(const Mat& A, const Mat& B, const Tolerances& tol = {});

/// PBH controllability / observability at every eigenvalue of A.
bool pbh_controllable(const Mat& A, const Mat& B, const Tolerances& tol = {});
bool pbh_observable(const Mat& C, const Mat& A, const Tolerances& tol = {});

// ---- structured matrices ---------------------------------------------------

Mat kron(const Mat& A, const Mat& B);

/// Number of singular values strictly above rank_drop * sigma_max.
std::size_t numerical_rank(const Mat& A, const Tolerances& tol = {});

/// Orthogonal U with U * mu = e1. U is the Householder reflector taking mu
/// to e1 (symmetric), or the identity when mu == e1.
Mat decoupling_unitary(const Vec& mu, const Tolerances& tol = {});

/// Orthonormal basis of the null space of M' (columns), i.e. the orthogonal
/// complement of range(M), from a full Householder QR of M.
Mat orthogonal_complement(const Mat& M);

/// e^{A t} by Pade scaling and squaring.
Mat expm(const Mat& A, double t = 1.0);

// ---- matrix equations ------------------------------------------------------

/// Stabilizing solution X of
///   A'X + XA + Q - (XB + S) R^{-1} (B'X + S') = 0
/// via the ordered Schur form of the Hamiltonian, followed by one Newton
/// correction when the residual exceeds the tolerance. Pass an empty S for
/// the cross-term-free equation.
Mat solve_care(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S = Mat(),
               const Tolerances& tol = {});

/// Residual norm of the CARE above (Frobenius).
double care_residual(const Mat& X, const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                     const Mat& S = Mat());

/// Gain K = -R^{-1}(B'X + S') associated with a CARE solution.
Mat care_gain(const Mat& X, const Mat& B, const Mat& R, const Mat& S = Mat());

/// X solving Acl'X + X Acl + Q = 0 for Hurwitz Acl (Bartels-Stewart on the
/// complex Schur form).
Mat solve_lyapunov(const Mat& Acl, const Mat& Q, const Tolerances& tol = {});

double lyapunov_residual(const Mat& X, const Mat& Acl, const Mat& Q);

}  // namespace numkit
}  // namespace coordlqr
