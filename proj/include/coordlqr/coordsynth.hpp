#pragma once

// Hard-constraint coordinated LQR: identical agents x_i' = A x_i + B u_i with
// local cost integral of x'Qx + u'u, coupled only by the requirement that
// the weighted center of mass obeys ubar = Fbar * xbar.
//
// The optimal law is diagonal plus rank one:
//   u_i = F_alpha x_i + mu_i (Fbar - F_alpha) xbar,
// and is computed from one local Riccati equation and one Lyapunov equation
// regardless of the number of agents.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "coordlqr/numkit.hpp"

namespace coordlqr {

using numkit::Tolerances;

/// Shared agent dynamics (A, B).
struct Plant {
    Mat A;
    Mat B;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }

    /// Checks shapes, finiteness and PBH stabilizability.
    void validate(const Tolerances& tol = {}) const;
};

/// Local state weight Q_alpha; the input weight is the identity.
struct CostSpec {
    Mat Q;

    /// Checks symmetry, PSD and the absence of unobservable imaginary-axis modes.
    void validate(const Plant& plant, const Tolerances& tol = {}) const;
};

/// Agent masses mu with sum mu_i^2 = 1 and no zero entries.
class Weights {
public:
    /// Throws NotUnitNorm or InvalidArgument; never rescales silently.
    explicit Weights(Vec mu);

    static Weights uniform(std::size_t nu);

    const Vec& mu() const noexcept { return mu_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(mu_.size()); }
    double operator[](std::size_t i) const { return mu_(static_cast<Eigen::Index>(i)); }
    bool is_uniform(double tol = 1e-12) const;

private:
    Vec mu_;
};

/// mu / ||mu||; throws InvalidArgument for a zero vector.
Vec normalize(const Vec& mu);

/// Required center-of-mass gain.
struct HardSpec {
    Mat Fbar;
};

/// Factored form of the aggregate gain
///   F = I (x) F_alpha + (mu mu') (x) (F_center - F_alpha).
struct GainDecomposition {
    Mat F_alpha;
    Mat F_center;
    Weights weights;

    std::size_t nu() const { return weights.size(); }

    /// Full nu*m x nu*n gain. Memory grows as nu^2.
    Mat materialize() const;

    /// (mu mu') (x) (F_center - F_alpha)
    Mat coordination_block() const;
};

struct LocalSolution {
    Mat X_alpha;
    Mat F_alpha;
};

struct HardSolution {
    GainDecomposition gains;
    Mat X_alpha;
    Mat Xbar;
};

/// Cost decomposition for one set of initial conditions.
struct CostReport {
    double J_total = 0.0;
    Vec J_local;     // x_i0' X_alpha x_i0
    Vec J_excess;    // coordination penalty per agent
    double J_consensus = 0.0;

    /// J_local + J_excess
    Vec J_agent() const { return J_local + J_excess; }
};

using InitialStates = std::span<const Vec>;

/// xbar = sum mu_i x_i
Vec center_of_mass(InitialStates states, const Weights& weights);

LocalSolution local_gain(const Plant& plant, const CostSpec& cost, const Tolerances& tol = {});

/// Solves (A + B Fbar)'Xbar + Xbar (A + B Fbar) + Q + Fbar'Fbar = 0.
Mat center_value(const Plant& plant, const CostSpec& cost, const HardSpec& hard,
                 const Tolerances& tol = {});

HardSolution synthesize_hard(const Plant& plant, const CostSpec& cost, const Weights& weights,
                             const HardSpec& hard, const Tolerances& tol = {});

/// u_i = F_alpha x_i + mu_i (F_center - F_alpha) xbar + mu_i r
Vec apply_control(const GainDecomposition& gains, std::size_t agent, const Vec& x_i, const Vec& xbar,
                  const std::optional<Vec>& r = std::nullopt);

/// Cost decomposition for a center-of-mass excess matrix X_excess: agent i
/// pays mu_i^2 xbar0' X_excess xbar0 on top of its local optimum.
CostReport cost_report(const Mat& X_alpha, const Mat& X_excess, InitialStates x0s,
                       const Weights& weights, const Tolerances& tol = {});

/// Hard-case decomposition with X_excess = Xbar - X_alpha.
CostReport optimal_cost(const Mat& X_alpha, const Mat& Xbar, InitialStates x0s,
                        const Weights& weights, const Tolerances& tol = {});

/// x0' ((I - mu mu') (x) X_alpha) x0, evaluated on the materialized Kronecker form.
double consensus_cost_kron(const Mat& X_alpha, InitialStates x0s, const Weights& weights);

struct ConsensusPair {
    double J_a;
    double J_b;
};

/// Consensus cost under two different center-of-mass gains, each evaluated as
/// the aggregate closed-loop cost minus xbar0' Xbar xbar0. Materializes
/// nu*n x nu*n matrices.
ConsensusPair consensus_invariance_check(const Plant& plant, const CostSpec& cost,
                                         const Weights& weights, const Mat& Fbar_a,
                                         const Mat& Fbar_b, InitialStates x0s,
                                         const Tolerances& tol = {});

struct PartialConstraint {
    Mat Fbar;  // m x n, equivalent full constraint
    Mat X2;    // center-of-mass value
};

/// Constrains only E' ubar = Fbar1 xbar (E'E = I) and returns the
/// equivalent full constraint gain.
PartialConstraint partial_constraint(const Plant& plant, const CostSpec& cost, const Mat& E,
                                     const Mat& Fbar1, const Tolerances& tol = {});

/// Constant input r with steady-state average agent state equal to x_ref,
/// r = sqrt(nu) * Tbar(0)^{-1} x_ref with Tbar(s) = (sI - A - B Fbar)^{-1} B.
/// Requires uniform masses; non-square Tbar(0) is inverted in the
/// least-squares sense.
Vec dc_feedforward(const Plant& plant, const HardSpec& hard, const Weights& weights, const Vec& x_ref,
                   const Tolerances& tol = {});

/// The linear map x_ref -> r used by dc_feedforward.
Mat dc_feedforward_gain(const Plant& plant, const HardSpec& hard, const Weights& weights,
                        const Tolerances& tol = {});

/// Reduction of sum lambda_i J_i to the unweighted problem: agent signals
/// are scaled by sqrt(lambda_i) and mu_i becomes mu_i / sqrt(lambda_i),
/// renormalized to unit length.
struct WeightedRescale {
    Weights weights;
    Vec signal_scale;  // sqrt(lambda_i)

    std::vector<Vec> scale_states(InitialStates states) const;
};

WeightedRescale rescale_weighted(const Vec& lambdas, const Weights& weights);

}  // namespace coordlqr
