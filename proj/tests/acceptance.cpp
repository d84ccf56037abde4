// Acceptance run on the baseline (zeta = 1, f = 2, n = 512, half_length = 20).
// Prints one PASS/FAIL line per criterion; the exit status is nonzero if any fails.
// Resolvent checks run at n = 256.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include <lle/lle.hpp>

extern "C" void openblas_set_num_threads(int);

using namespace lle;
using std::numbers::pi;

namespace {

const Params base{1.0, 2.0, 0.0};
const Grid grid512(512, 20.0);

double relerr(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// |Im| of the rotational pair predicted at eps for the baseline.
double rotational_prediction(double eps, double theta0)
{
    return std::sqrt(eps * pi * base.f * std::sqrt(2.0 * base.zeta) * std::sin(theta0));
}

const BranchPoint& point(double eps, bool stable = true, int n = 512)
{
    static std::map<std::tuple<double, bool, int>, BranchPoint> cache;
    const auto key = std::make_tuple(eps, stable, n);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const Params p = base.with_epsilon(eps);
        const BifurcationAngles a = solve_theta0(p);
        const Grid g(n, 20.0);
        NewtonOptions opt;
        opt.tol = 1e-12;
        it = cache.emplace(key, newton_correct(leading_ansatz(p, g, stable ? a.theta_stable : a.theta_unstable), p, opt))
                 .first;
    }
    return it->second;
}

const SpectrumReport& spectrum(double eps, bool stable = true)
{
    static std::map<std::pair<double, bool>, SpectrumReport> cache;
    auto it = cache.find({eps, stable});
    if (it == cache.end()) it = cache.emplace(std::make_pair(eps, stable), dense_spectrum(assemble(point(eps, stable)))).first;
    return it->second;
}

double rotational_relerr(double eps)
{
    const SpectrumReport& r = spectrum(eps);
    const double pred = rotational_prediction(eps, r.theta0);
    double worst = 0.0;
    for (Index i : r.indices_of(EigenClass::rotational_pair))
        worst = std::max(worst, relerr(std::abs((r.eigenvalues[i] + eps).imag()), pred));
    return worst;
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const char* fmt, auto... args)
    {
        char buf[256];
        std::snprintf(buf, sizeof buf, fmt, args...);
        if (!detail.empty()) detail += "; ";
        detail += buf;
        if (!ok) detail += " [x]";
        pass = pass && ok;
    }
};

// ---------------------------------------------------------------------------

Outcome bifurcation_scalars()
{
    Outcome o;
    const double t0 = solve_theta0(base).theta_stable;
    const double angle_res = std::abs(pi * base.f * std::cos(t0) - 2.0 * std::sqrt(2.0 * base.zeta));
    const double reduced = std::abs(4.0 * std::sqrt(base.zeta) - std::sqrt(2.0) * pi * base.f * std::cos(t0));
    const double h = 1e-5;
    const double fd = (reduced_bifurcation_function(t0 + h, base) - reduced_bifurcation_function(t0 - h, base)) / (2 * h);
    const double closed = std::sqrt(2.0) * pi * base.f * std::sin(t0);
    o.check(angle_res <= 1e-12, "angle residual %.2e", angle_res);
    o.check(reduced <= 1e-12 && std::abs(reduced_bifurcation_function(t0, base)) <= 1e-12, "reduced residual %.2e", reduced);
    o.check(std::abs(fd - closed) <= 1e-6 && std::abs(reduced_bifurcation_derivative(t0, base) - closed) <= 1e-12,
            "derivative vs FD %.2e", std::abs(fd - closed));
    return o;
}

Outcome norm_golden_values()
{
    Outcome o;
    const ComplexField phi = nls_soliton(base, grid512, 0.0);
    const double l2 = norm(phi, NormKind::L2), l3 = norm(phi, NormKind::L3);
    const double e2 = relerr(l2 * l2, 4.0 * std::sqrt(base.zeta));
    const double e3 = relerr(l3 * l3 * l3, std::sqrt(2.0) * base.zeta * pi);
    o.check(e2 <= 1e-8, "L2^2 rel %.2e", e2);
    o.check(e3 <= 1e-8, "L3^3 rel %.2e", e3);
    return o;
}

Outcome branch_order()
{
    Outcome o;
    const Branch b = continue_branch(base, grid512, solve_theta0(base).theta_stable, 0.002, 0.016, 0.002);
    double lo = 1e300, hi = 0.0, worst = 0.0;
    int used = 0;
    for (const BranchPoint& pt : b.points) {
        const double eps = pt.epsilon();
        if (std::abs(eps / 0.002 - std::round(eps / 0.002)) > 1e-9) continue;
        const int m = int(std::round(eps / 0.002));
        if (m != 1 && m != 2 && m != 4 && m != 8) continue;
        ++used;
        lo = std::min(lo, pt.correction_norm / eps);
        hi = std::max(hi, pt.correction_norm / eps);
        const cplx lead = -I_unit * base.f * eps / base.zeta;
        worst = std::max(worst, std::abs(pt.u_inf - lead) / std::abs(lead) / eps);
    }
    o.check(used == 4, "%d of 4 points", used);
    o.check((hi - lo) / lo < 0.5, "correction/eps spread %.3f", (hi - lo) / lo);
    o.check(worst <= 5.0, "u_inf rel err / eps %.3f", worst);
    return o;
}

Outcome small_eigenvalues()
{
    Outcome o;
    const double eps = 0.01;
    const SpectrumReport& r = spectrum(eps);
    const auto trans = r.indices_of(EigenClass::translational_zero);
    const auto neg = r.indices_of(EigenClass::translational_negative);
    const auto rot = r.indices_of(EigenClass::rotational_pair);
    o.check(trans.size() == 1 && neg.size() == 1 && rot.size() == 2, "classes %zu/%zu/%zu", trans.size(), neg.size(),
            rot.size());
    if (!o.pass) return o;
    const double dt = std::max(std::abs(r.eigenvalues[trans[0]] + eps - eps), std::abs(r.eigenvalues[neg[0]] + eps + eps));
    o.check(dt <= 1e-3, "translational dev %.2e", dt);
    const double pred = rotational_prediction(eps, r.theta0);
    double rel = 0.0, re = 0.0;
    for (Index i : rot) {
        const cplx mu = r.eigenvalues[i] + eps;
        rel = std::max(rel, relerr(std::abs(mu.imag()), pred));
        re = std::max(re, std::abs(mu.real()));
    }
    o.check(rel <= 0.1, "rotational rel %.4f (pred %.6f)", rel, pred);
    o.check(re < 1e-4, "rotational |Re| %.2e", re);
    const double e1 = rotational_relerr(0.01), e2 = rotational_relerr(0.005);
    o.check(e2 < e1 && e2 / std::sqrt(0.005) <= 1.2 * e1 / std::sqrt(0.01), "halving C %.3f -> %.3f",
            e1 / std::sqrt(0.01), e2 / std::sqrt(0.005));
    return o;
}

Outcome unstable_angle()
{
    Outcome o;
    const double eps = 0.01;
    const SpectrumReport& r = spectrum(eps, false);
    int count = 0;
    cplx top = 0.0;
    for (Index i = 0; i < r.eigenvalues.size(); ++i)
        if (r.eigenvalues[i].real() > 1e-3) {
            ++count;
            top = r.eigenvalues[i];
        }
    o.check(count == 1, "%d eigenvalues with Re > 1e-3", count);
    o.check(std::abs(top.imag()) <= 1e-6, "|Im| %.2e", std::abs(top.imag()));
    const double pred = rotational_prediction(eps, solve_theta0(base).theta_stable);
    o.check(relerr(top.real() + eps, pred) <= 0.1, "rel to %.6f: %.4f", pred, relerr(top.real() + eps, pred));
    return o;
}

Outcome expansion_constants()
{
    Outcome o;
    const double t0 = solve_theta0(base).theta_stable;
    const ExpansionConstants c = verify_expansion_constants(base, t0, grid512);
    const double c1 = 2.0 / std::sqrt(base.zeta), c2 = -2.0 * std::sqrt(2.0) * pi * base.f * std::sin(t0);
    o.check(std::abs(c.c1 - c1) <= 1e-6, "c1 %.10f", c.c1);
    o.check(relerr(c.c2, c2) <= 1e-4, "c2 %.8f vs %.8f", c.c2, c2);
    return o;
}

Outcome krein_counts()
{
    Outcome o;
    for (double eps : {0.005, 0.01, 0.02}) {
        const SpectrumReport& r = spectrum(eps);
        try {
            const KreinReport k = krein_audit(to_real_form(assemble(point(eps)), r.theta0), r);
            int negative = 0, rotational = 0;
            const double pred = rotational_prediction(eps, r.theta0);
            for (const auto& [mu, gram] : k.per_eigenvalue_signs)
                if (relerr(std::abs(mu), pred) < 0.1) {
                    ++rotational;
                    negative += gram < 0.0;
                }
            o.check(k.n_L == 3 && k.k_r == 1 && k.k_i_minus == 2 && k.k_c == 0 && k.balanced() && rotational == 2 &&
                        negative == 2,
                    "eps %.3f: n=%d (%d,%d,%d) neg Gram %d/2", eps, k.n_L, k.k_r, k.k_i_minus, k.k_c, negative);
        } catch (const CountingFormulaViolation& e) {
            o.check(false, "eps %.3f: %s", eps, e.what());
        }
    }
    return o;
}

/// Band minimum of |Im| of the constant-coefficient symbol, on a fine k-grid.
double symbol_band_minimum(const Params& p, cplx u)
{
    double best = 1e300;
    const int m = 200001;
    for (int i = 0; i < m; ++i) {
        const double k = -10.0 + 20.0 * i / (m - 1);
        const double d = k * k + p.zeta - 2.0 * std::norm(u);
        Eigen::Matrix2cd s;
        s << -I_unit * d, I_unit * u * u, -I_unit * std::conj(u * u), I_unit * d;
        const Eigen::Vector2cd ev = Eigen::ComplexEigenSolver<Eigen::Matrix2cd>(s, false).eigenvalues();
        best = std::min({best, std::abs(ev[0].imag()), std::abs(ev[1].imag())});
    }
    return best;
}

Outcome essential_spectrum()
{
    Outcome o;
    auto edge = [](double eps) {
        const Params p = base.with_epsilon(eps);
        return essential_spectrum_edge(p, solve_background(p));
    };
    const Params p = base.with_epsilon(0.01);
    const cplx u = solve_background(p);
    const double dev = std::abs(edge(0.01) - symbol_band_minimum(p, u));
    o.check(dev <= 1e-10, "closed form vs k-grid %.2e", dev);
    const double ratio = (base.zeta - edge(0.02)) / (base.zeta - edge(0.01));
    const double ratio2 = (base.zeta - edge(0.01)) / (base.zeta - edge(0.005));
    o.check(std::abs(ratio / 4.0 - 1.0) <= 0.2 && std::abs(ratio2 / 4.0 - 1.0) <= 0.2, "gap ratios %.4f %.4f", ratio, ratio2);

    const SpectrumReport& r = spectrum(0.01);
    const BranchPoint& pt = point(0.01);
    double band_min = 1e300;
    for (Index i : r.indices_of(EigenClass::essential_band)) band_min = std::min(band_min, std::abs(r.eigenvalues[i].imag()));
    const double k1 = pi / pt.grid().half_length();
    const double a = k1 * k1 + base.zeta - 2.0 * std::norm(pt.u_inf), b = std::norm(pt.u_inf);
    const double spacing = std::sqrt(a * a - b * b) - r.zeta_eps;
    o.check(std::abs(band_min - r.zeta_eps) <= 2.0 * spacing, "edge offset %.3f spacings",
            std::abs(band_min - r.zeta_eps) / spacing);
    return o;
}

Outcome resolvent()
{
    Outcome o;
    const BranchPoint& pt = point(0.01, true, 256);

    // self-adjoint oracle: ||(H - lambda)^{-1}|| = 1 / dist(lambda, spec H)
    const MatrixXcd h = to_real_form(assemble(pt), solve_theta0(pt.params).theta_stable).L_tilde.cast<cplx>();
    double sa = 0.0;
    for (cplx lambda : {cplx(-1.5), cplx(0.5), cplx(0.2, 0.7)})
        sa = std::max(sa, relerr(matrix_resolvent_norm(h, lambda), self_adjoint_resolvent_norm(h, lambda)));
    o.check(sa <= 1e-8, "self-adjoint %.2e", sa);

    const BlockSystem sys = BlockSystem::from_point(pt);
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> n01;
    auto rand_vec = [&] {
        VectorXcd v(sys.size());
        for (Index i = 0; i < v.size(); ++i) v[i] = cplx(n01(rng), n01(rng));
        return v;
    };
    double schur = 0.0;
    for (cplx lambda : {cplx(0.5, 40.0), cplx(0.25, -30.0), cplx(2.0, 60.0)})
        for (int t = 0; t < 5; ++t) {
            const BlockVector rhs{rand_vec(), rand_vec()};
            const BlockVector a = schur_high_frequency_solve(sys, lambda, rhs), b = direct_block_solve(sys, lambda, rhs);
            schur = std::max(schur, std::hypot((a.first - b.first).norm(), (a.second - b.second).norm()) /
                                        std::hypot(b.first.norm(), b.second.norm()));
        }
    o.check(schur <= 1e-9, "Schur vs direct %.2e", schur);

    const OperatorPair ops = assemble(pt);
    const VectorXcd ev = general_eigen(ops.generator(), false).values;
    const SpectralProjection proj = spectral_projection(ops, ev);
    std::vector<double> ims;
    for (int i = -100; i <= 100; ++i) ims.push_back(0.5 * i);
    const ResolventScan scan = scan_halfplane(ops, proj, {0.0, 0.25, 0.5, 1.0, 2.0}, ims, {}, ev);
    bool finite = scan.excluded.empty() && scan.norms.size() == 5 * ims.size();
    for (double v : scan.norms) finite = finite && std::isfinite(v);
    o.check(finite, "scan %zu samples, sup %.1f", scan.norms.size(), scan.sup_norm);

    double lo = 1e300, hi = 0.0;
    for (const ScalingRow& row : high_frequency_scaling_check(sys, {0.25, 0.5, 1.0, 2.0}, 40.0)) {
        lo = std::min(lo, row.product);
        hi = std::max(hi, row.product);
    }
    o.check(hi / lo <= 3.0, "product spread %.3f", hi / lo);
    return o;
}

Outcome dynamics()
{
    Outcome o;
    const double eps = 0.01, delta = 1e-3;
    const BranchPoint& pt = point(eps);
    ExperimentOptions opt;
    opt.dt = 0.005;
    opt.sample_interval = 1.0;
    const EvolutionTrace tr = stability_experiment(pt, make_perturbation(PerturbationKind::mixed, pt, delta), 5.0 / eps, opt);
    o.check(tr.orbital_distances.back() < 0.1 * delta, "final %.2e", tr.orbital_distances.back());
    o.check(tr.fitted_rate >= 0.3 * eps && tr.fitted_rate <= 3.0 * eps, "eta %.5f", tr.fitted_rate);
    const double sig = std::abs(std::remainder(orbital_distance(tr.final_state, pt).sigma - tr.sigma_infinity(), 40.0));
    // sigma_inf is the minimizer: nudging it in either direction cannot shrink the distance
    const double d0 = norm(tr.final_state - shift(pt.field, tr.sigma_infinity()), NormKind::H1);
    const double dm = norm(tr.final_state - shift(pt.field, tr.sigma_infinity() - 1e-6), NormKind::H1);
    const double dp = norm(tr.final_state - shift(pt.field, tr.sigma_infinity() + 1e-6), NormKind::H1);
    o.check(sig <= 1e-6 && d0 <= dm + 1e-15 && d0 <= dp + 1e-15, "sigma_inf %.3e, consistency %.2e", tr.sigma_infinity(),
            sig);

    const BranchPoint& up = point(eps, false);
    double lambda_plus = -1e300;
    for (Index i = 0; i < spectrum(eps, false).eigenvalues.size(); ++i)
        lambda_plus = std::max(lambda_plus, spectrum(eps, false).eigenvalues[i].real());
    ExperimentOptions gopt;
    gopt.dt = 0.005;
    gopt.sample_interval = 0.25;
    gopt.rate = RateKind::growth;
    const EvolutionTrace gr = stability_experiment(up, make_perturbation(PerturbationKind::eigenvector, up, 1e-6), 40.0, gopt);
    o.check(relerr(gr.fitted_rate, lambda_plus) <= 0.15, "growth %.5f vs %.5f", gr.fitted_rate, lambda_plus);

    const Params nls{base.zeta, 0.0, 0.0};
    const ComplexField u0 = nls_soliton(nls, grid512, 0.0) + ComplexField::sample(grid512, [](double x) {
                                return cplx(0.1, 0.05) * std::exp(-(x - 0.3) * (x - 0.3));
                            });
    EvolveOptions eo;
    const ComplexField u1 = evolve(u0, nls, 20.0, 0.005, eo).back().field;
    const double drift = std::abs(norm(u1, NormKind::L2) - norm(u0, NormKind::L2));
    o.check(drift <= 1e-8, "NLS L2 drift %.2e", drift);
    return o;
}

} // namespace

int main()
{
    openblas_set_num_threads(1);
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"bifurcation scalars", bifurcation_scalars},
        {"norm golden values", norm_golden_values},
        {"branch order", branch_order},
        {"small-eigenvalue asymptotics", small_eigenvalues},
        {"unstable angle", unstable_angle},
        {"expansion constants", expansion_constants},
        {"Krein audit", krein_counts},
        {"essential spectrum", essential_spectrum},
        {"resolvent", resolvent},
        {"dynamics", dynamics},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2d %s  %-30s %s  (%.1f s)\n", index, out.pass ? "PASS" : "FAIL", name, out.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += !out.pass;
    }
    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
