#include <algorithm>
#include <cmath>
#include <numeric>

#include "coordlqr/coordsynth.hpp"
#include "coordlqr/ensemblelab.hpp"
#include "doctest.h"
#include "oracle_values.hpp"
#include "support/expect.hpp"
#include "support/random_instance.hpp"

using namespace coordlqr;
using namespace coordlqr::numkit;
using testing_support::InstanceGenerator;
using testing_support::max_abs;
using testing_support::min_eig;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

Plant tadpole_axis() { return Plant{scalar(0), scalar(1)}; }
CostSpec unit_cost() { return CostSpec{scalar(1)}; }

Plant tadpole() { return Plant{Mat::Zero(2, 2), Mat::Identity(2, 2)}; }

}  // namespace

TEST_SUITE("coordsynth") {

TEST_CASE("weights are validated, never rescaled") {
    CHECK_NOTHROW(Weights((Vec(2) << 0.6, 0.8).finished()));
    CHECK_CODE(Weights(Vec::Constant(2, 1.0)), ErrorCode::NotUnitNorm);
    Vec with_zero(2);
    with_zero << 1.0, 0.0;
    CHECK_CODE(Weights(with_zero), ErrorCode::InvalidArgument);
    const Vec n = normalize(Vec::Constant(4, 3.0));
    CHECK(n.norm() == doctest::Approx(1.0));
    CHECK(Weights::uniform(9).is_uniform());
    CHECK_CODE(normalize(Vec::Zero(3)), ErrorCode::InvalidArgument);
}

TEST_CASE("local gain anchors") {
    const LocalSolution t = local_gain(tadpole(), CostSpec{Mat::Identity(2, 2)});
    CHECK(max_abs(t.F_alpha + Mat::Identity(2, 2)) <= 1e-12);
    CHECK(max_abs(t.X_alpha - Mat::Identity(2, 2)) <= 1e-12);

    Mat A(2, 2);
    A << -1, 1, 0, -2;
    const LocalSolution z = local_gain(Plant{A, Mat::Identity(2, 1)}, CostSpec{Mat::Zero(2, 2)});
    CHECK(max_abs(z.F_alpha) <= 1e-12);

    const LocalSolution s = local_gain(Plant{scalar(1), scalar(1)}, CostSpec{scalar(3)});
    CHECK(s.X_alpha(0, 0) == doctest::Approx(oracle::care_unstable_q3).epsilon(1e-12));
    CHECK(s.F_alpha(0, 0) == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("plant and cost validation") {
    CHECK_CODE(Plant({scalar(1), scalar(0)}).validate(), ErrorCode::AssumptionViolated);
    CHECK_CODE(CostSpec{scalar(0)}.validate(tadpole_axis()), ErrorCode::AssumptionViolated);
    CHECK_CODE(CostSpec{scalar(-1)}.validate(tadpole_axis()), ErrorCode::InvalidArgument);
}

TEST_CASE("center value anchors") {
    const Plant p = tadpole_axis();
    const CostSpec c = unit_cost();
    CHECK(center_value(p, c, HardSpec{scalar(-25)})(0, 0) ==
          doctest::Approx(oracle::lyap_tadpole_axis).epsilon(1e-13));
    const LocalSolution loc = local_gain(p, c);
    CHECK(max_abs(center_value(p, c, HardSpec{loc.F_alpha}) - loc.X_alpha) <= 1e-12);
    CHECK_CODE(center_value(p, c, HardSpec{scalar(0)}), ErrorCode::NotHurwitz);

    Mat A(2, 2);
    A << -1, 1, 0, -2;
    Mat Q(2, 2);
    Q << 2, 0, 0, 1;
    const Mat gram = center_value(Plant{A, Mat::Identity(2, 1)}, CostSpec{Q}, HardSpec{Mat::Zero(1, 2)});
    CHECK(lyapunov_residual(gram, A, Q) <= 1e-12);
}

TEST_CASE("hard synthesis: scalar two-agent gain") {
    const HardSolution hs = synthesize_hard(tadpole_axis(), unit_cost(), Weights::uniform(2), HardSpec{scalar(-25)});
    Mat expected(2, 2);
    expected << oracle::hard_nu2_gain[0], oracle::hard_nu2_gain[1], oracle::hard_nu2_gain[2],
        oracle::hard_nu2_gain[3];
    CHECK(max_abs(hs.gains.materialize() - expected) <= 1e-12);
    CHECK(hs.Xbar(0, 0) == doctest::Approx(12.52));
    CHECK(hs.X_alpha(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("hard synthesis with Fbar = F_alpha is decentralized") {
    InstanceGenerator gen(21);
    const auto inst = gen.make(3, 2, 4);
    const LocalSolution loc = local_gain(inst.plant, inst.cost);
    const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{loc.F_alpha});
    CHECK(max_abs(hs.gains.materialize() - kron(Mat::Identity(4, 4), loc.F_alpha)) <= 1e-12);
    CHECK(max_abs(hs.gains.coordination_block()) <= 1e-12);
}

TEST_CASE("coordination block rank equals rank(Fbar - F_alpha)") {
    InstanceGenerator gen(22);
    for (Eigen::Index nu = 2; nu <= 8; ++nu) {
        const auto inst = gen.make(gen.integer(2, 4), gen.integer(1, 2), nu);
        const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
        const Mat diff = hs.gains.materialize() - kron(Mat::Identity(nu, nu), hs.gains.F_alpha);
        CHECK(numerical_rank(diff) == numerical_rank(inst.Fbar - hs.gains.F_alpha));
    }
}

TEST_CASE("apply_control reproduces the aggregate gain") {
    InstanceGenerator gen(23);
    const auto inst = gen.make(3, 2, 5);
    const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
    const Vec xbar = center_of_mass(inst.x0s, inst.weights);
    Vec x(15);
    for (int i = 0; i < 5; ++i) x.segment(3 * i, 3) = inst.x0s[static_cast<std::size_t>(i)];
    const Vec u = hs.gains.materialize() * x;
    Vec ubar = Vec::Zero(2);
    for (std::size_t i = 0; i < 5; ++i) {
        const Vec ui = apply_control(hs.gains, i, inst.x0s[i], xbar);
        CHECK(max_abs(ui - u.segment(2 * static_cast<Eigen::Index>(i), 2)) <= 1e-12);
        ubar += inst.weights[i] * ui;
    }
    CHECK(max_abs(ubar - inst.Fbar * xbar) <= 1e-12);

    // xbar = 0 and no reference: purely local action.
    CHECK(max_abs(apply_control(hs.gains, 0, inst.x0s[0], Vec::Zero(3)) - hs.gains.F_alpha * inst.x0s[0]) <= 1e-15);

    // Reference enters scaled by mu_i.
    const Vec r = Vec::Ones(2);
    const Vec with_r = apply_control(hs.gains, 1, inst.x0s[1], xbar, r);
    CHECK(max_abs(with_r - apply_control(hs.gains, 1, inst.x0s[1], xbar) - inst.weights[1] * r) <= 1e-15);

    // x_i = mu_i xbar gives ubar = Fbar xbar exactly.
    Vec ub = Vec::Zero(2);
    for (std::size_t i = 0; i < 5; ++i) {
        ub += inst.weights[i] * apply_control(hs.gains, i, inst.weights[i] * xbar, xbar);
    }
    CHECK(max_abs(ub - inst.Fbar * xbar) <= 1e-12);
    CHECK_CODE(apply_control(hs.gains, 0, Vec::Zero(2), xbar), ErrorCode::DimensionMismatch);
}

TEST_CASE("tadpole agent law") {
    const Weights w = Weights::uniform(50);
    const HardSolution hs = synthesize_hard(tadpole(), CostSpec{Mat::Identity(2, 2)}, w, HardSpec{-25.0 * Mat::Identity(2, 2)});
    Vec xi(2), xbar(2);
    xi << 1.0, -2.0;
    xbar << 0.5, 0.25;
    const double mu = 1.0 / std::sqrt(50.0);
    const Vec expected = -xi + mu * (-24.0) * xbar;
    CHECK(max_abs(apply_control(hs.gains, 7, xi, xbar) - expected) <= 1e-13);
}

TEST_CASE("optimal cost decomposition") {
    InstanceGenerator gen(24);
    const auto inst = gen.make(3, 2, 4);
    const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
    const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, inst.x0s, inst.weights);
    CHECK(rep.J_total == doctest::Approx(rep.J_local.sum() + rep.J_excess.sum()).epsilon(1e-12));
    CHECK((rep.J_excess.array() >= 0.0).all());
    const Vec xbar = center_of_mass(inst.x0s, inst.weights);
    CHECK(rep.J_excess.sum() == doctest::Approx(xbar.dot((hs.Xbar - hs.X_alpha) * xbar)).epsilon(1e-12));

    // Zero center of mass: coordination is free.
    std::vector<Vec> balanced = inst.x0s;
    const Vec shift = xbar;
    for (std::size_t i = 0; i < balanced.size(); ++i) balanced[i] -= inst.weights[i] * shift;
    const CostReport free = optimal_cost(hs.X_alpha, hs.Xbar, balanced, inst.weights);
    CHECK(max_abs(free.J_excess) <= 1e-12);

    // x_i0 = mu_i chi: each agent pays x_i0' Xbar x_i0.
    std::vector<Vec> aligned;
    const Vec chi = gen.gaussian_vec(3);
    for (std::size_t i = 0; i < 4; ++i) aligned.push_back(inst.weights[i] * chi);
    const CostReport al = optimal_cost(hs.X_alpha, hs.Xbar, aligned, inst.weights);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(al.J_agent()(static_cast<Eigen::Index>(i)) ==
              doctest::Approx(aligned[i].dot(hs.Xbar * aligned[i])).epsilon(1e-10));
    }
}

TEST_CASE("opposite agents: consensus cost is twice the local cost") {
    InstanceGenerator gen(25);
    const Plant p = gen.plant(2, 1);
    const CostSpec c{gen.psd(2, 0.1)};
    const Mat Fbar = gen.hurwitz_gain(p);
    const HardSolution hs = synthesize_hard(p, c, Weights::uniform(2), HardSpec{Fbar});
    const Vec chi = gen.gaussian_vec(2);
    const std::vector<Vec> x0s{chi, -chi};
    const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, x0s, Weights::uniform(2));
    CHECK(rep.J_consensus == doctest::Approx(2.0 * chi.dot(hs.X_alpha * chi)).epsilon(1e-12));
}

TEST_CASE("fixed instance matches the scipy aggregate oracle") {
    Mat A(3, 3), B(3, 2), Q(3, 3), F(2, 3);
    A << 0.2, 1.0, 0.0, -0.5, -0.3, 0.4, 0.1, 0.0, -0.8;
    B << 1.0, 0.0, 0.3, 1.0, 0.0, 0.5;
    Q = Vec((Vec(3) << 1.0, 0.5, 2.0).finished()).asDiagonal();
    F << -2.0, -1.0, 0.0, 0.0, -1.5, -1.0;
    Vec mu(3);
    mu << 0.5, -0.5, std::sqrt(0.5);
    std::vector<Vec> x0s{(Vec(3) << 1.0, 0.0, -1.0).finished(), (Vec(3) << 0.5, 0.5, 0.0).finished(),
                         (Vec(3) << -0.2, 1.0, 0.3).finished()};
    const Weights w(mu);
    const HardSolution hs = synthesize_hard(Plant{A, B}, CostSpec{Q}, w, HardSpec{F});
    const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, x0s, w);
    CHECK(rep.J_total == doctest::Approx(oracle::fixed_instance_oracle_J).epsilon(1e-9));
}

TEST_CASE("consensus cost is independent of Fbar") {
    const Weights w = Weights::uniform(50);
    InstanceGenerator gen(26);
    std::vector<Vec> x0s;
    for (int i = 0; i < 50; ++i) x0s.push_back(gen.gaussian_vec(2));
    const ConsensusPair tp = consensus_invariance_check(tadpole(), CostSpec{Mat::Identity(2, 2)}, w,
                                                        -25.0 * Mat::Identity(2, 2), -2.0 * Mat::Identity(2, 2), x0s);
    CHECK(std::abs(tp.J_a - tp.J_b) <= 1e-10 * (1.0 + std::abs(tp.J_a)));

    for (int trial = 0; trial < 5; ++trial) {
        const auto inst = gen.make(3, 2, 4);
        const Mat Fb2 = gen.hurwitz_gain(inst.plant);
        const ConsensusPair pr = consensus_invariance_check(inst.plant, inst.cost, inst.weights, inst.Fbar, Fb2, inst.x0s);
        CHECK(std::abs(pr.J_a - pr.J_b) <= 1e-10 * (1.0 + std::abs(pr.J_a)));
        const LocalSolution loc = local_gain(inst.plant, inst.cost);
        CHECK(std::abs(consensus_cost_kron(loc.X_alpha, inst.x0s, inst.weights) - pr.J_a) <=
              1e-10 * (1.0 + std::abs(pr.J_a)));
    }
}

TEST_CASE("I - mu mu' equals both regrouped sums") {
    InstanceGenerator gen(27);
    for (Eigen::Index nu = 1; nu <= 16; ++nu) {
        const Vec mu = gen.unit_mu(nu);
        const Mat target = Mat::Identity(nu, nu) - mu * mu.transpose();
        Mat a = Mat::Zero(nu, nu);
        Mat b = Mat::Zero(nu, nu);
        for (Eigen::Index i = 0; i < nu; ++i) {
            const Vec v = Vec::Unit(nu, i) - mu(i) * mu;
            a += v * v.transpose();
            for (Eigen::Index j = i + 1; j < nu; ++j) {
                const Vec d = mu(j) * Vec::Unit(nu, i) - mu(i) * Vec::Unit(nu, j);
                b += d * d.transpose();
            }
        }
        CHECK(max_abs(a - target) <= 1e-14);
        CHECK(max_abs(b - target) <= 1e-14);
    }
}

TEST_CASE("PSD ordering Xbar >= X_alpha") {
    InstanceGenerator gen(28);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = gen.make(gen.integer(1, 5), gen.integer(1, 2), 2);
        const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
        CHECK(min_eig(hs.Xbar - hs.X_alpha) >= -1e-8);
    }
}

TEST_CASE("permutation equivariance with uniform masses") {
    InstanceGenerator gen(29);
    const auto inst = gen.make(2, 1, 4, true);
    const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
    const Mat F = hs.gains.materialize();
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 2, 0, 3, 1;
    const Mat Px = kron(Mat(perm), Mat::Identity(2, 2));
    const Mat Pu = kron(Mat(perm), Mat::Identity(1, 1));
    CHECK(max_abs(Pu * F * Px.transpose() - F) <= 1e-12);
}

TEST_CASE("partial constraints") {
    InstanceGenerator gen(30);
    const Plant p = gen.plant(3, 2);
    const CostSpec c{gen.psd(3, 0.2)};
    const Mat F1 = gen.hurwitz_gain(p);

    // Full constraint: E = I.
    const PartialConstraint full = partial_constraint(p, c, Mat::Identity(2, 2), F1);
    CHECK(max_abs(full.Fbar - F1) <= 1e-12);

    // Empty constraint: equals the local gain.
    const LocalSolution loc = local_gain(p, c);
    const PartialConstraint none = partial_constraint(p, c, Mat::Zero(2, 0), Mat::Zero(0, 3));
    CHECK(max_abs(none.Fbar - loc.F_alpha) <= 1e-8);

    // One input constrained.
    const Mat E = Mat(Vec::Unit(2, 0));
    const Mat F1row = F1.topRows(1);
    const PartialConstraint part = partial_constraint(p, c, E, F1row);
    CHECK(max_abs(E.transpose() * part.Fbar - F1row) <= 1e-12);
    CHECK(max_abs(center_value(p, c, HardSpec{part.Fbar}) - part.X2) <= 1e-8 * (1.0 + part.X2.norm()));
    CHECK(min_eig(part.X2 - loc.X_alpha) >= -1e-8);

    CHECK_CODE(partial_constraint(p, c, 2.0 * Mat(Vec::Unit(2, 0)), F1row), ErrorCode::NotOrthonormal);
}

TEST_CASE("dc feedforward") {
    const Weights w = Weights::uniform(50);
    const Mat G = dc_feedforward_gain(tadpole(), HardSpec{-25.0 * Mat::Identity(2, 2)}, w);
    CHECK(max_abs(G - oracle::ff_tadpole_scale * Mat::Identity(2, 2)) <= 1e-10);
    CHECK(max_abs(dc_feedforward(tadpole(), HardSpec{-25.0 * Mat::Identity(2, 2)}, w, Vec::Zero(2))) == 0.0);

    const Vec r = dc_feedforward(Plant{scalar(-1), scalar(1)}, HardSpec{scalar(0)}, Weights::uniform(4), Vec::Ones(1));
    CHECK(r(0) == doctest::Approx(oracle::ff_scalar_nu4).epsilon(1e-14));

    Vec mu(2);
    mu << 0.6, 0.8;
    CHECK_CODE(dc_feedforward(tadpole(), HardSpec{-25.0 * Mat::Identity(2, 2)}, Weights(mu), Vec::Ones(2)),
               ErrorCode::InvalidArgument);
    // B with a zero column: Tbar(0) has rank 1 < m.
    Mat B(2, 2);
    B << 1, 0, 0, 0;
    Mat A(2, 2);
    A << -1, 0, 0, -1;
    CHECK_CODE(dc_feedforward_gain(Plant{A, B}, HardSpec{Mat::Zero(2, 2)}, Weights::uniform(2)),
               ErrorCode::SingularDCGain);
}

TEST_CASE("weighted cost rescaling") {
    const Weights w = Weights::uniform(2);
    const WeightedRescale id = rescale_weighted(Vec::Ones(2), w);
    CHECK(max_abs(id.weights.mu() - w.mu()) <= 1e-15);
    CHECK(max_abs(id.signal_scale - Vec::Ones(2)) == 0.0);

    Vec lam(2);
    lam << 4.0, 1.0;
    const WeightedRescale rs = rescale_weighted(lam, w);
    CHECK(rs.weights[0] == doctest::Approx(oracle::rescaled_mu[0]).epsilon(1e-14));
    CHECK(rs.weights[1] == doctest::Approx(oracle::rescaled_mu[1]).epsilon(1e-14));
    CHECK_CODE(rescale_weighted((Vec(2) << 1.0, 0.0).finished(), w), ErrorCode::NonPositiveWeight);

    // sum lambda_i J_i from the brute-force oracle equals the rescaled
    // unweighted problem's optimum.
    const Plant p = tadpole_axis();
    const CostSpec c = unit_cost();
    const std::vector<Vec> x0s{scalar(1.0), scalar(-0.4)};
    const OracleResult weighted = oracle_constrained_cost(p, c, w, scalar(-25), x0s, lam);
    // The constraint sum mu_i u_i = Fbar sum mu_i x_i reads, in scaled signals
    // z_i = sqrt(lambda_i) x_i, sum mu'_i v_i = Fbar sum mu'_i z_i after dividing by the norm.
    const std::vector<Vec> z0 = rs.scale_states(x0s);
    const HardSolution hs = synthesize_hard(p, c, rs.weights, HardSpec{scalar(-25)});
    const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, z0, rs.weights);
    CHECK(rep.J_total == doctest::Approx(weighted.J).epsilon(1e-8));
}

}  // TEST_SUITE
