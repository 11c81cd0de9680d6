#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"
#include "qvfv/measurement.hpp"
#include "qvfv/random.hpp"
#include "qvfv/reconstruction.hpp"

using namespace qvfv;

using namespace qvfv::testing_support;

TEST(ReconstructionInput, RejectsNonSpanning) {
    std::vector<ReconstructionEntry> planar{{{1, 0, 0}, 0.5, 1}, {{0, 1, 0}, 0.5, 1}, {{-1, 0, 0}, 0.5, 1}, {{0, -1, 0}, 0.5, 1}};
    EXPECT_THROW(ReconstructionInput{planar}, NonSpanningBases);
    std::vector<ReconstructionEntry> two{{{1, 0, 0}, 0.5, 1}, {{0, 1, 0}, 0.5, 1}};
    EXPECT_THROW(ReconstructionInput{two}, NonSpanningBases);
    std::vector<ReconstructionEntry> bad_p{{{1, 0, 0}, 1.5, 1}, {{0, 1, 0}, 0.5, 1}, {{0, 0, 1}, 0.5, 1}};
    EXPECT_THROW(ReconstructionInput{bad_p}, InvalidArgument);
}

TEST(ReconstructionInput, TetrahedralGramIsIsotropic) {
    const auto axes = tetra_axes();
    const ReconstructionInput in = ReconstructionInput::exact({0.1, 0.2, 0.3}, axes);
    const Eigen::Matrix3d g = in.gram();
    EXPECT_LT((g - (4.0 / 3.0) * Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(ReconstructionInput, UnequalShotsWeights) {
    std::vector<ReconstructionEntry> e{{{1, 0, 0}, 0.5, 100}, {{0, 1, 0}, 0.5, 300}, {{0, 0, 1}, 0.5, 200}};
    const ReconstructionInput in(e);
    EXPECT_DOUBLE_EQ(in.weight(0), 0.5);
    EXPECT_DOUBLE_EQ(in.weight(1), 1.5);
    EXPECT_DOUBLE_EQ(in.weight(2), 1.0);
}

TEST(MleObjective, ValueAndGradientAtOrigin) {
    std::vector<ReconstructionEntry> e;
    const auto axes = tetra_axes();
    const double ps[] = {0.9, 0.2, 0.35, 0.6};
    BlochVector expected;
    for (int i = 0; i < 4; ++i) {
        e.push_back({axes[i], ps[i], 1.0});
        expected += (2 * ps[i] - 1) * axes[i];
    }
    const ReconstructionInput in(e);
    EXPECT_DOUBLE_EQ(mle_objective({0, 0, 0}, in), 0.0);
    const BlochVector g = mle_gradient({0, 0, 0}, in);
    EXPECT_NEAR(norm(g - expected), 0.0, 1e-15);
}

TEST(MleObjective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 gen(21);
    for (int i = 0; i < 100; ++i) {
        const ReconstructionInput in = sampled_input(random_in_ball(gen, 0.95), 500, 1000 + i);
        const BlochVector a = random_in_ball(gen, 0.9);
        const BlochVector fd = oracle::central_difference([&](const BlochVector& x) { return mle_objective(x, in); }, a);
        EXPECT_LE(norm(mle_gradient(a, in) - fd), 1e-5);
    }
}

TEST(MleObjective, ConcaveAlongSegments) {
    std::mt19937_64 gen(22);
    std::uniform_real_distribution<double> t(0, 1);
    for (int i = 0; i < 200; ++i) {
        const ReconstructionInput in = sampled_input(random_in_ball(gen), 1000, 2000 + i);
        const BlochVector a = random_in_ball(gen, 0.99), b = random_in_ball(gen, 0.99);
        const double s = t(gen);
        const double mid = mle_objective(a * (1 - s) + b * s, in);
        const double chord = (1 - s) * mle_objective(a, in) + s * mle_objective(b, in);
        EXPECT_GE(mid, chord - 1e-12);
    }
}

TEST(Mle, MaximallyMixed) {
    const auto axes = tetra_axes();
    const ReconstructionResult r = mle_reconstruct(ReconstructionInput::exact({0, 0, 0}, axes));
    EXPECT_LE(norm(r.estimate), 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.estimator, Estimator::MLE);
}

TEST(Mle, ExactProbabilitiesInterior) {
    const BlochVector target{0.3, -0.2, 0.8};
    const ReconstructionInput in = ReconstructionInput::exact(target, tetra_axes());
    // The analytic gradient vanishes at the generating state.
    EXPECT_LE(norm(mle_gradient(target, in)), 1e-12);
    const ReconstructionResult r = mle_reconstruct(in);
    EXPECT_LE(distance(r.estimate, target), 1e-6);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.gradient_norm_final, 1e-10);
}

TEST(Mle, BoundaryMaximizer) {
    // p = 1 on the z axis, exact values elsewhere, for the north pole.
    const ReconstructionInput in = ReconstructionInput::exact({0, 0, 1}, tetra_axes());
    EXPECT_EQ(in.entry(0).probability, 1.0);
    const ReconstructionResult r = mle_reconstruct(in);
    EXPECT_NEAR(norm(r.estimate), 1.0, 1e-6);
    EXPECT_LE(distance(r.estimate, {0, 0, 1}), 1e-6);
    const auto o = oracle::mle_grid_polish(to_terms(in), 0.02);
    EXPECT_LE(distance(r.estimate, oracle::to_bloch_vector(o)), 2e-3);
}

TEST(Mle, PureStatesRecovered) {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> th(0, std::numbers::pi), ph(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < 200; ++i) {
        const BlochVector a = to_bloch({th(gen), ph(gen)});
        const ReconstructionResult r = mle_reconstruct(ReconstructionInput::exact(a, tetra_axes()));
        EXPECT_LE(distance(r.estimate, a), 1e-6);
        EXPECT_LE(norm(r.estimate), 1.0 + 1e-9);
    }
}

TEST(Mle, SampledDataInvariants) {
    std::mt19937_64 gen(24);
    for (int i = 0; i < 500; ++i) {
        const BlochVector a = i % 2 ? to_bloch({std::acos(1 - 2 * (i / 500.0)), 0.7 * i}) : random_in_ball(gen);
        const ReconstructionResult r = mle_reconstruct(sampled_input(a, 20000, 5000 + i));
        EXPECT_TRUE(r.converged);
        EXPECT_LE(norm(r.estimate), 1.0 + 1e-9);
        EXPECT_LE(r.gradient_norm_final, 1e-10);
        EXPECT_LT(r.iterations, 200);
    }
}

TEST(Mle, ExtremeCountsConverge) {
    // All-or-nothing counts, including infeasible-looking combinations.
    const auto axes = tetra_axes();
    for (int mask = 0; mask < 16; ++mask) {
        std::vector<ReconstructionEntry> e;
        for (int k = 0; k < 4; ++k) e.push_back({axes[k], (mask >> k) & 1 ? 1.0 : 0.0, 1.0});
        const ReconstructionInput in(e);
        const ReconstructionResult r = mle_reconstruct(in);
        EXPECT_TRUE(r.converged) << mask;
        EXPECT_LE(norm(r.estimate), 1.0 + 1e-9);
        const auto o = oracle::mle_grid_polish(to_terms(in), 0.02);
        EXPECT_GE(r.objective, oracle::loglik(o, to_terms(in)) - 1e-9) << mask;
    }
}

TEST(Mle, MatchesGridOracle) {
    std::mt19937_64 gen(25);
    for (int i = 0; i < 10; ++i) {
        const ReconstructionInput in = sampled_input(random_in_ball(gen, 0.95), 1000, 7000 + i);
        const ReconstructionResult r = mle_reconstruct(in);
        const auto o = oracle::mle_grid_polish(to_terms(in), 0.02);
        EXPECT_LE(distance(r.estimate, oracle::to_bloch_vector(o)), 2e-3);
    }
}

TEST(Mle, IterationLimit) {
    SolverOptions opt;
    opt.max_iter = 0;
    const ReconstructionInput in = ReconstructionInput::exact({0.3, 0.1, 0.2}, tetra_axes());
    try {
        mle_reconstruct(in, opt);
        FAIL() << "expected MaxIterationsExceeded";
    } catch (const MaxIterationsExceeded& e) {
        EXPECT_FALSE(e.best().converged);
        EXPECT_EQ(e.best().estimate, BlochVector{});
    }
}

TEST(Lr, TetrahedralClosedForm) {
    std::vector<ReconstructionEntry> e;
    const auto axes = tetra_axes();
    const double ps[] = {0.7, 0.45, 0.4, 0.5};
    BlochVector expected;
    for (int i = 0; i < 4; ++i) {
        e.push_back({axes[i], ps[i], 1.0});
        expected += 0.75 * (2 * ps[i] - 1) * axes[i];
    }
    const ReconstructionResult r = lr_reconstruct(ReconstructionInput(e));
    ASSERT_LT(norm(expected), 1.0);
    EXPECT_LE(distance(r.estimate, expected), 1e-14);
    EXPECT_EQ(r.multiplier, 0.0);
    EXPECT_EQ(r.estimator, Estimator::LR);
}

TEST(Lr, ExactProbabilities) {
    const BlochVector target{0.3, -0.2, 0.8};
    const ReconstructionResult r = lr_reconstruct(ReconstructionInput::exact(target, tetra_axes()));
    EXPECT_LE(distance(r.estimate, target), 1e-12);
    EXPECT_LE(r.objective, 1e-24);
}

TEST(Lr, AllOnesIsDegenerate) {
    std::vector<ReconstructionEntry> e;
    for (const auto& u : tetra_axes()) e.push_back({u, 1.0, 1.0});
    const ReconstructionResult r = lr_reconstruct(ReconstructionInput(e));
    // b = sum u = 0, so the minimizer is the origin.
    EXPECT_LE(norm(r.estimate), 1e-12);
}

TEST(Lr, BoundarySolutionsAndKkt) {
    std::mt19937_64 gen(26);
    std::uniform_real_distribution<double> u01(0, 1);
    int boundary = 0;
    for (int i = 0; i < 300; ++i) {
        std::vector<ReconstructionEntry> e;
        for (const auto& u : tetra_axes()) e.push_back({u, u01(gen) < 0.5 ? u01(gen) * 0.05 : 1 - u01(gen) * 0.05, 1.0});
        const ReconstructionInput in(e);
        const ReconstructionResult r = lr_reconstruct(in);
        EXPECT_GE(r.multiplier, 0.0);
        EXPECT_LE(std::abs(r.multiplier * (norm(r.estimate) - 1.0)), 1e-9);
        if (r.multiplier > 0) {
            ++boundary;
            EXPECT_NEAR(norm(r.estimate), 1.0, 1e-12);
        }
        const auto o = oracle::lr_qp(to_terms(in));
        EXPECT_LE(distance(r.estimate, oracle::to_bloch_vector(o)), 1e-9);
    }
    EXPECT_GT(boundary, 50);
}

TEST(Lr, MatchesQpOracleOnRandomCatalogs) {
    std::mt19937_64 gen(27);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u01(0, 1);
    for (int i = 0; i < 100; ++i) {
        std::vector<ReconstructionEntry> e;
        const int k = 3 + i % 4;
        for (int j = 0; j < k; ++j) {
            BlochVector u{n(gen), n(gen), n(gen)};
            e.push_back({u / norm(u), u01(gen), 50.0 + 1000 * u01(gen)});
        }
        ReconstructionInput in;
        try {
            in = ReconstructionInput(e);
        } catch (const NonSpanningBases&) {
            continue;
        }
        const auto o = oracle::lr_qp(to_terms(in));
        EXPECT_LE(distance(lr_reconstruct(in).estimate, oracle::to_bloch_vector(o)), 1e-9) << i;
    }
}

TEST(Estimators, ConsistentAtExactProbabilities) {
    std::mt19937_64 gen(28);
    for (int i = 0; i < 100; ++i) {
        const BlochVector a = random_in_ball(gen);
        const ReconstructionInput in = ReconstructionInput::exact(a, tetra_axes());
        EXPECT_LE(distance(mle_reconstruct(in).estimate, a), 1e-6);
        EXPECT_LE(distance(lr_reconstruct(in).estimate, a), 1e-12);
    }
}

TEST(Estimators, PauliCatalog) {
    const auto axes = pauli_catalog().axes();
    const BlochVector a{0.5, 0.5, -0.5};
    const ReconstructionInput in = ReconstructionInput::exact(a, axes);
    EXPECT_LE(distance(mle_reconstruct(in).estimate, a), 1e-6);
    EXPECT_LE(distance(lr_reconstruct(in).estimate, a), 1e-12);
}
