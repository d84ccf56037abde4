#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace lle;

namespace {

ComplexField bump(const Grid& g, double amp)
{
    return ComplexField::sample(g, [amp](double x) { return amp * cplx(1.0, 0.5) * std::exp(-(x - 0.3) * (x - 0.3)); });
}

ComplexField run(const ComplexField& u0, const Params& p, double t, double dt, Scheme s = Scheme::etdrk4)
{
    EvolveOptions opt;
    opt.scheme = s;
    return evolve(u0, p, t, dt, opt).back().field;
}

double top_real_eigenvalue(const BranchPoint& pt)
{
    const VectorXcd ev = general_eigen(assemble(pt).generator(), false).values;
    double top = -1e300;
    for (Index i = 0; i < ev.size(); ++i) top = std::max(top, ev[i].real());
    return top;
}

} // namespace

TEST(Stepper, RejectsStiffStep)
{
    const Grid g(512, 20.0);
    EXPECT_THROW(Stepper(g, fixture::baseline, 0.01), std::invalid_argument);
    EXPECT_NO_THROW(Stepper(g, fixture::baseline, 0.006));
    EXPECT_THROW(Stepper(g, fixture::baseline, 0.0), std::invalid_argument);
}

TEST(Stepper, StepCountMustBeExact)
{
    const ComplexField u(Grid(64, 20.0));
    EXPECT_THROW(evolve(u, fixture::baseline, 1.0, 0.3), std::invalid_argument);
    EXPECT_THROW(evolve(u, fixture::baseline, -1.0, 0.25), std::invalid_argument);
    EXPECT_EQ(evolve(u, fixture::baseline, 1.0, 0.25).size(), 2u);
}

TEST(Evolution, StationaryWaveStaysPut)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const ComplexField u = run(pt.field, pt.params, 50.0, 0.02);
    EXPECT_LT(norm(u - pt.field, NormKind::H1), 1e-7);
}

TEST(Evolution, UnforcedLimitConservesMass)
{
    const Params nls{1.0, 0.0, 0.0};
    const Grid g(256, 20.0);
    const ComplexField phi = nls_soliton(nls, g, 0.0);
    const ComplexField u0 = phi + bump(g, 0.1);
    const ComplexField u = run(u0, nls, 20.0, 0.02);
    EXPECT_NEAR(norm(u, NormKind::L2), norm(u0, NormKind::L2), 1e-8);

    // the detuning is built into the frame, so the soliton itself is stationary
    const ComplexField s = run(phi, nls, 20.0, 0.02);
    EXPECT_LT((s.values.cwiseAbs() - phi.values.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((s.values - phi.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Evolution, TimeReversal)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const ComplexField u0 = pt.field + bump(pt.grid(), 0.01);
    const ComplexField back = run(run(u0, pt.params, 5.0, 0.01), pt.params, -5.0, -0.01);
    EXPECT_LT(norm(back - u0, NormKind::L2), 1e-6);
}

TEST(Evolution, ConvergenceOrder)
{
    const Params p = fixture::baseline.with_epsilon(0.05);
    const Grid g(128, 20.0);
    const ComplexField u0 = leading_ansatz(p, g, solve_theta0(p).theta_stable) + bump(g, 0.2);
    const ComplexField ref = run(u0, p, 2.0, 0.0025);
    const double e1 = norm(run(u0, p, 2.0, 0.08) - ref, NormKind::L2);
    const double e2 = norm(run(u0, p, 2.0, 0.04) - ref, NormKind::L2);
    EXPECT_GE(e1 / e2, 3.0);
    const ComplexField ref2 = run(u0, p, 2.0, 0.0025, Scheme::etd2rk);
    const double f1 = norm(run(u0, p, 2.0, 0.02, Scheme::etd2rk) - ref2, NormKind::L2);
    const double f2 = norm(run(u0, p, 2.0, 0.01, Scheme::etd2rk) - ref2, NormKind::L2);
    EXPECT_GE(f1 / f2, 3.0);
}

TEST(Evolution, BlowUpDetected)
{
    const Params p{1.0, 2.0, 1.0};
    const ComplexField u0(Grid(64, 20.0), VectorXcd::Constant(64, cplx(1e-3, 0.0)));
    EXPECT_THROW(run(u0, p, 10.0, 0.01), BlowUp);
}

TEST(OrbitalDistance, RecoversShift)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const OrbitalDistance od = orbital_distance(shift(pt.field, 0.7), pt);
    EXPECT_NEAR(od.sigma, 0.7, 1e-6);
    EXPECT_LT(od.distance, 1e-8);

    const OrbitalDistance self = orbital_distance(pt.field, pt);
    EXPECT_NEAR(self.sigma, 0.0, 1e-9);
    EXPECT_LT(self.distance, 1e-12);
}

TEST(OrbitalDistance, NeverExceedsUnshiftedDistance)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const ComplexField state = shift(pt.field, -1.3) + bump(pt.grid(), 0.05);
    const OrbitalDistance od = orbital_distance(state, pt);
    EXPECT_LE(od.distance, norm(state - pt.field, NormKind::H1));
    EXPECT_NEAR(od.distance, norm(state - shift(pt.field, od.sigma), NormKind::H1), 1e-12);
    for (double s : {-1.4, -1.3, -1.2, 0.0})
        EXPECT_LE(od.distance, norm(state - shift(pt.field, s), NormKind::H1) + 1e-12);
}

TEST(Perturbation, NormalizedAndDeterministic)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    for (auto k : {PerturbationKind::gaussian, PerturbationKind::odd_gaussian, PerturbationKind::mixed,
                   PerturbationKind::random}) {
        EXPECT_NEAR(norm(make_perturbation(k, pt, 1e-3, 3), NormKind::H1), 1e-3, 1e-15) << to_string(k);
        EXPECT_EQ(perturbation_from_string(to_string(k)), k);
    }
    EXPECT_EQ(norm(make_perturbation(PerturbationKind::none, pt, 1e-3), NormKind::H1), 0.0);
    const ComplexField a = make_perturbation(PerturbationKind::random, pt, 1e-3, 7);
    const ComplexField b = make_perturbation(PerturbationKind::random, pt, 1e-3, 7);
    const ComplexField c = make_perturbation(PerturbationKind::random, pt, 1e-3, 8);
    EXPECT_EQ(fixture::max_abs_diff(a.values, b.values), 0.0);
    EXPECT_GT(fixture::max_abs_diff(a.values, c.values), 0.0);
    EXPECT_THROW(perturbation_from_string("sideways"), std::invalid_argument);
}

TEST(LogSlope, ExactExponential)
{
    std::vector<double> t, y;
    for (int i = 0; i <= 20; ++i) {
        t.push_back(0.5 * i);
        y.push_back(3.0 * std::exp(-0.7 * 0.5 * i));
    }
    const auto [slope, m] = log_slope(t, y, 2.0, 6.0);
    EXPECT_NEAR(slope, -0.7, 1e-12);
    EXPECT_EQ(m, 9);
    EXPECT_TRUE(std::isnan(log_slope(t, y, 2.0, 2.2).first));
}

TEST(Stability, StableWaveAttractsNearbyData)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const double delta = 1e-3, t_end = 500.0;
    ExperimentOptions opt;
    opt.dt = 0.02;
    opt.sample_interval = 1.0;
    const EvolutionTrace tr = stability_experiment(pt, make_perturbation(PerturbationKind::mixed, pt, delta), t_end, opt);
    ASSERT_EQ(tr.times.size(), 501u);
    EXPECT_NEAR(tr.orbital_distances.front(), 0.0, delta);
    EXPECT_LT(tr.orbital_distances.back(), 0.1 * delta);
    EXPECT_GE(tr.fitted_rate, 0.3 * 0.01);
    EXPECT_LE(tr.fitted_rate, 2.1 * 0.01);
    const OrbitalDistance fin = orbital_distance(tr.final_state, pt);
    EXPECT_NEAR(std::remainder(fin.sigma - tr.sigma_infinity(), 40.0), 0.0, 1e-6);
    for (std::size_t i = 1; i < tr.sigma_track.size(); ++i)
        EXPECT_LT(std::abs(tr.sigma_track[i] - tr.sigma_track[i - 1]), 0.05);
}

TEST(Stability, TranslationIsNeutral)
{
    const BranchPoint& pt = fixture::converged_point(0.01);
    const double c = 1e-4;
    ComplexField pert = first_derivative(pt.field);
    pert.values *= c;
    ExperimentOptions opt;
    opt.dt = 0.02;
    opt.sample_interval = 1.0;
    const EvolutionTrace tr = stability_experiment(pt, pert, 50.0, opt);
    // u + c u' is u(x + c) to first order
    EXPECT_NEAR(tr.sigma_track.front(), -c, 1e-7);
    EXPECT_NEAR(tr.sigma_infinity(), -c, 1e-6);
    EXPECT_LT(tr.orbital_distances.back(), 1e-6);
}

TEST(Stability, UnstableWaveGrowsAtEigenvalueRate)
{
    const BranchPoint& pt = fixture::converged_point(0.01, false);
    const double lambda_plus = top_real_eigenvalue(pt);
    ASSERT_GT(lambda_plus, 1e-3);
    ExperimentOptions opt;
    opt.dt = 0.02;
    opt.sample_interval = 0.25;
    opt.rate = RateKind::growth;
    const EvolutionTrace tr =
        stability_experiment(pt, make_perturbation(PerturbationKind::eigenvector, pt, 1e-6), 40.0, opt);
    EXPECT_GE(tr.fit_samples, 10);
    EXPECT_NEAR(tr.fitted_rate / lambda_plus, 1.0, 0.15);
}
