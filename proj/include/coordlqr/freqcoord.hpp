#pragma once

// Frequency-weighted soft coordination. The mismatch ubar - Fbar xbar is
// filtered by W(s) = Dphi + Cphi (sI - Aphi)^{-1} Bphi before being
// penalized; weights with imaginary-axis poles enforce the hard constraint
// at those frequencies.

#include <functional>
#include <optional>
#include <vector>

#include "coordlqr/coordsynth.hpp"

namespace coordlqr {

/// State-space record (A, B, C, D).
struct StateSpace {
    Mat A;
    Mat B;
    Mat C;
    Mat D;

    Eigen::Index states() const { return A.rows(); }

    /// D + C (sI - A)^{-1} B at a real frequency point s.
    Mat evaluate(double s) const;
};

struct WeightFilter {
    Mat Aphi;  // p x p
    Mat Bphi;  // p x m
    Mat Cphi;  // q x p
    Mat Dphi;  // q x m

    Eigen::Index p() const { return Aphi.rows(); }
    Eigen::Index m() const { return Bphi.cols(); }
    Eigen::Index q() const { return Cphi.rows(); }

    /// Checks shapes and minimality (PBH controllability and observability).
    void validate(Eigen::Index m, const Tolerances& tol = {}) const;

    /// W(s) = c I with no states.
    static WeightFilter static_gain(double c, Eigen::Index m);
    /// W(s) = (c / s) I.
    static WeightFilter integrator(double c, Eigen::Index m);
    /// W(s) = 0; reduces the problem to decentralized control.
    static WeightFilter zero(Eigen::Index m);
};

struct AugmentedPlant {
    Mat A_sigma;
    Mat B_sigma;
    Mat C_sigma;
    Mat D_sigma;
};

/// Center-of-mass plant augmented with the weight filter states.
AugmentedPlant augment(const Plant& plant, const CostSpec& cost, const Mat& Fbar,
                       const WeightFilter& w);

struct AugmentedSynthesis {
    Mat Fbar;
    Mat X_sigma;   // (p+n) x (p+n)
    Mat F_sigma1;  // m x p
    Mat F_sigma2;  // m x n
    Mat A_sigma;
    Mat B_sigma;
    StateSpace M_phi;  // (Aphi + Bphi F_sigma1, Bphi, F_sigma1, I)
    std::optional<double> omega_sigma;  // -F_sigma1 when p = m = 1

    Eigen::Index p() const { return F_sigma1.cols(); }
    Eigen::Index n() const { return F_sigma2.cols(); }
    Mat F_sigma() const;
    Mat closed_loop() const { return A_sigma + B_sigma * F_sigma(); }
    Mat X_sigma22() const { return X_sigma.bottomRightCorner(n(), n()); }
};

AugmentedSynthesis synthesize_weighted(const Plant& plant, const CostSpec& cost,
                                       const Weights& weights, const Mat& Fbar,
                                       const WeightFilter& w, const Tolerances& tol = {});

/// Transmission zeros of a square system with invertible D: eig(A - B D^{-1} C).
std::vector<std::complex<double>> transmission_zeros(const StateSpace& sys);

/// Per-agent dynamic controller
///   u_i = F_alpha x_i + mu_i (Fbar - F_alpha) xbar + mu_i ubar_phi,
/// where ubar_phi is the output of `filter` driven by xbar.
struct WeightedController {
    Mat F_alpha;
    Mat Fbar;
    Weights weights;
    StateSpace filter;  // state x_phi, input xbar, output ubar_phi

    std::size_t nu() const { return weights.size(); }
    Eigen::Index p() const { return filter.A.rows(); }
};

WeightedController weighted_controller(const AugmentedSynthesis& synth, const Mat& F_alpha,
                                       const Weights& weights);

/// Center-of-mass closed loop in the state ordering (x_phi, xbar).
Mat weighted_center_loop(const WeightedController& ctrl, const Plant& plant);

struct WeightedEnergies {
    double mismatch = 0.0;  // ||ubar - Fbar xbar||^2
    Vec per_agent_excess;
    Mat X_phi22;
    Mat X_v22;
};

WeightedEnergies weighted_energies(const AugmentedSynthesis& synth, const Plant& plant,
                                   const CostSpec& cost, const Mat& Fbar, const Weights& weights,
                                   InitialStates x0s, const Tolerances& tol = {});

/// Center-of-mass quadratic forms behind weighted_energies.
struct WeightedEnergyMatrices {
    Mat X_phi22;
    Mat X_v22;
};

WeightedEnergyMatrices weighted_energy_matrices(const AugmentedSynthesis& synth, const Mat& F_alpha,
                                                const Tolerances& tol = {});

using WeightFamily = std::function<WeightFilter(double lambda)>;

/// lambda -> sqrt(lambda / (1 - lambda)) I
WeightFamily static_family(Eigen::Index m);
/// lambda -> sqrt(lambda / (1 - lambda)) / s * I; the zero weight at lambda = 0.
WeightFamily integrator_family(Eigen::Index m);

struct WeightedTradeoffPoint {
    double lambda = 0.0;
    double mismatch = 0.0;
    Vec per_agent_excess;
    std::optional<double> omega_sigma;
};

std::vector<WeightedTradeoffPoint> sweep_weighted(const Plant& plant, const CostSpec& cost,
                                                  const Weights& weights, const Mat& Fbar,
                                                  const WeightFamily& family,
                                                  const std::vector<double>& grid, InitialStates x0s,
                                                  const Tolerances& tol = {});

}  // namespace coordlqr
