#ifndef LLE_SPECTRUM_HPP
#define LLE_SPECTRUM_HPP

//
// Spectrum of the generator JL - eps: essential band edge, dense eigensolve
// with classification, small-eigenvalue asymptotics, expansion constants,
// Krein index audit and the stability verdict.
//

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "continuation.hpp"
#include "errors.hpp"
#include "lapack.hpp"
#include "linops.hpp"
#include "soliton.hpp"

namespace lle {

enum class EigenClass { translational_zero, translational_negative, rotational_pair, essential_band, other_discrete };
enum class Verdict { stable, unstable_essential, unstable_eigenvalue };

inline std::string to_string(EigenClass c)
{
    switch (c) {
    case EigenClass::translational_zero: return "translational_zero";
    case EigenClass::translational_negative: return "translational_negative";
    case EigenClass::rotational_pair: return "rotational_pair";
    case EigenClass::essential_band: return "essential_band";
    case EigenClass::other_discrete: return "other_discrete";
    }
    return "unknown";
}

inline std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable_essential: return "unstable_essential";
    case Verdict::unstable_eigenvalue: return "unstable_eigenvalue";
    }
    return "unknown";
}

struct SpectrumReport {
    Params params;
    double theta0 = 0.0;
    VectorXcd eigenvalues;  ///< of JL - eps
    MatrixXcd eigenvectors; ///< doubled-vector columns
    std::vector<EigenClass> classes;
    VectorXd localization;  ///< mass fraction on |x| < L/2
    double zeta_eps = 0.0;
    Verdict verdict = Verdict::stable;
    std::vector<cplx> small_eigs_predicted; ///< of JL (unshifted): +eps, -eps, then the rotational pair

    double epsilon() const { return params.epsilon; }

    std::vector<Index> indices_of(EigenClass c) const
    {
        std::vector<Index> out;
        for (Index i = 0; i < Index(classes.size()); ++i)
            if (classes[i] == c) out.push_back(i);
        return out;
    }
};

struct KreinReport {
    int n_L = 0;
    int k_r = 0;
    int k_i_minus = 0;
    int k_c = 0;
    std::vector<std::pair<cplx, double>> per_eigenvalue_signs; ///< (eigenvalue of JL, <L~v, v>)

    bool balanced() const { return k_r + k_i_minus + k_c == n_L; }
};

/// Branch angle (stable or unstable) nearest to the fitted rotation of a point.
inline double bifurcation_angle_of(const BranchPoint& point)
{
    const BifurcationAngles a = solve_theta0(point.params);
    const double ds = std::abs(detail::wrap_angle(point.theta_fit - a.theta_stable));
    const double du = std::abs(detail::wrap_angle(point.theta_fit - a.theta_unstable));
    return ds <= du ? a.theta_stable : a.theta_unstable;
}

// ---------------------------------------------------------------------------

/// Lower edge of |Im| on the essential band of JL:  sqrt((zeta - 2|u|^2)^2 - |u|^4).
inline double essential_spectrum_edge(const Params& p, cplx u_inf)
{
    const double a = p.zeta - 2.0 * std::norm(u_inf), b = std::norm(u_inf);
    if (!(a > b)) {
        std::ostringstream os;
        os << "background |u_inf|^2 = " << b << " is supercritical for zeta = " << p.zeta;
        throw SupercriticalBackground(os.str());
    }
    return std::sqrt(a * a - b * b);
}

/// +-eps and the rotational pair predicted for JL at small eps.
inline std::vector<cplx> small_eigenvalue_asymptotics(const Params& p, double theta0)
{
    if (p.epsilon < 0.0) throw std::invalid_argument("small_eigenvalue_asymptotics: eps must be nonnegative");
    const double s = p.epsilon * std::numbers::pi * p.f * std::sqrt(2.0 * p.zeta) * std::sin(theta0);
    const cplx r = s >= 0.0 ? I_unit * std::sqrt(s) : cplx(std::sqrt(-s));
    return {p.epsilon, -p.epsilon, r, -r};
}

struct SpectrumOptions {
    double localization = 0.99;        ///< central mass fraction separating discrete from band
    double translational_overlap = 0.99;
    double unstable_re = 1e-4;         ///< verdict threshold on Re of discrete eigenvalues
};

inline Verdict stability_verdict(const SpectrumReport& report, const Params& p, double unstable_re = 1e-4)
{
    if (p.epsilon < 0.0) return Verdict::unstable_essential;
    for (Index i = 0; i < report.eigenvalues.size(); ++i)
        if (report.classes[i] != EigenClass::essential_band && report.eigenvalues[i].real() > unstable_re)
            return Verdict::unstable_eigenvalue;
    return Verdict::stable;
}

namespace detail {

inline double central_mass_fraction(const VectorXcd& v, const Grid& g)
{
    const Index n = g.size();
    double inside = 0.0, total = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double m = std::norm(v[j]) + std::norm(v[n + j]);
        total += m;
        if (std::abs(g.x(j)) < 0.5 * g.half_length()) inside += m;
    }
    return total > 0.0 ? inside / total : 0.0;
}

inline double overlap(const VectorXcd& a, const VectorXcd& b)
{
    return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

} // namespace detail

///
/// All 2n eigenpairs of the generator. Eigenvectors concentrated on the central
/// half of the domain are discrete; the rest are essential-band samples.
///
inline SpectrumReport dense_spectrum(const OperatorPair& ops, const SpectrumOptions& opt = {})
{
    const BranchPoint& pt = ops.about;
    const Grid& g = pt.grid();
    const EigenDecomposition ed = general_eigen(ops.generator());
    const Index m = ed.values.size();

    SpectrumReport r;
    r.params = pt.params;
    r.theta0 = bifurcation_angle_of(pt);
    r.eigenvalues = ed.values;
    r.eigenvectors = ed.vectors;
    r.localization.resize(m);
    r.classes.assign(m, EigenClass::essential_band);

    const VectorXcd mode = translation_mode(pt.field);
    std::vector<Index> translational, discrete;
    for (Index i = 0; i < m; ++i) {
        r.localization[i] = detail::central_mass_fraction(ed.vectors.col(i), g);
        if (r.localization[i] <= opt.localization) continue;
        r.classes[i] = EigenClass::other_discrete;
        if (detail::overlap(ed.vectors.col(i), mode) > opt.translational_overlap)
            translational.push_back(i);
        else
            discrete.push_back(i);
    }
    std::sort(translational.begin(), translational.end(),
              [&](Index a, Index b) { return std::abs(ed.values[a]) < std::abs(ed.values[b]); });
    if (!translational.empty()) r.classes[translational[0]] = EigenClass::translational_zero;
    for (std::size_t k = 1; k < translational.size(); ++k) r.classes[translational[k]] = EigenClass::translational_negative;

    const double eps = pt.epsilon();
    std::sort(discrete.begin(), discrete.end(),
              [&](Index a, Index b) { return std::abs(ed.values[a] + eps) < std::abs(ed.values[b] + eps); });
    for (std::size_t k = 0; k < std::min<std::size_t>(2, discrete.size()); ++k)
        r.classes[discrete[k]] = EigenClass::rotational_pair;

    r.zeta_eps = essential_spectrum_edge(pt.params, pt.u_inf);
    r.small_eigs_predicted = small_eigenvalue_asymptotics(pt.params.with_epsilon(std::abs(eps)), r.theta0);
    r.verdict = stability_verdict(r, pt.params, opt.unstable_re);
    return r;
}

// ---------------------------------------------------------------------------
// Expansion constants of the rotational eigenvalues

struct ExpansionConstants {
    double c1 = 0.0;            ///< <J^-1 L0^-1 J^-1 V0, V0>
    double c2 = 0.0;            ///< <L1 V0, V0>
    double c1_closed = 0.0;     ///< 2 / sqrt(zeta)
    double c2_closed = 0.0;     ///< -2 sqrt(2) pi f sin(theta0)
    double zeta_trick_residual = 0.0; ///< |L0 (d_zeta phi, conj) + (phi, conj phi)|_inf
    double kernel_solve_condition = 0.0;
    double theta_coefficient_sensitivity = 0.0; ///< |c2(kappa = 1) - c2(kappa = 0)|
};

namespace detail {

/// Pairing of doubled vectors:  int a1 conj(b1) + a2 conj(b2) dx.
inline cplx pair_inner(const VectorXcd& a, const VectorXcd& b, double dx) { return dx * b.dot(a); }

/// Real symmetric matrix of  v -> -v'' + zeta v - 2|phi|^2 v - phi^2 conj(v)  on (Re v, Im v).
inline MatrixXd real_linearization(const ComplexField& phi, double zeta)
{
    const Grid& g = phi.grid;
    const Index n = g.size();
    const MatrixXd d2 = second_derivative_matrix(g);
    MatrixXd m = MatrixXd::Zero(2 * n, 2 * n);
    m.topLeftCorner(n, n) = -d2;
    m.bottomRightCorner(n, n) = -d2;
    for (Index j = 0; j < n; ++j) {
        const cplx q = phi.values[j] * phi.values[j];
        const double base = zeta - 2.0 * std::norm(phi.values[j]);
        m(j, j) += base - q.real();
        m(n + j, n + j) += base + q.real();
        m(j, n + j) = -q.imag();
        m(n + j, j) = -q.imag();
    }
    return m;
}

/// <L1 V0, V0> for the first-order solution correction u1.
inline double l1_pairing(const ComplexField& u0, const VectorXcd& u1)
{
    const Index n = u0.size();
    const VectorXcd& a = u0.values;
    VectorXcd l1v0(2 * n), v0(2 * n);
    for (Index j = 0; j < n; ++j) {
        const cplx diag = -2.0 * (a[j] * std::conj(u1[j]) + std::conj(a[j]) * u1[j]);
        const cplx off = -2.0 * a[j] * u1[j];
        const cplx p = I_unit * a[j], q = -I_unit * std::conj(a[j]);
        v0[j] = p;
        v0[n + j] = q;
        l1v0[j] = diag * p + off * q;
        l1v0[n + j] = std::conj(off) * p + diag * q;
    }
    return pair_inner(l1v0, v0, u0.grid.dx()).real();
}

} // namespace detail

///
/// Evaluates both pairings that fix the rotational eigenvalue at eps = 0
/// structures. The first-order correction is u1 = i kappa phi - i f/zeta + phi1,
/// where phi1 solves the linearized problem orthogonally to its kernel; kappa
/// drops out of the pairing, which is checked by evaluating it at 0 and 1.
///
inline ExpansionConstants verify_expansion_constants(const Params& p, double theta0, const Grid& g)
{
    p.validate();
    ExpansionConstants out;
    out.c1_closed = 2.0 / std::sqrt(p.zeta);
    out.c2_closed = -2.0 * std::numbers::sqrt2 * std::numbers::pi * p.f * std::sin(theta0);

    const Index n = g.size();
    const double dx = g.dx();
    const ComplexField phi = nls_soliton(p, g, theta0);
    const ComplexField dphi = soliton_zeta_derivative(p, g, theta0);

    // L0 (d_zeta phi, conj) = -(phi, conj phi) = J^-1 V0.
    const OperatorPair l0 = assemble(phi, p.with_epsilon(0.0));
    const VectorXcd w = doubled(dphi);
    VectorXcd jinv_v0(2 * n), v0(2 * n);
    jinv_v0 << -phi.values, -phi.values.conjugate();
    v0 << I_unit * phi.values, -I_unit * phi.values.conjugate();
    out.zeta_trick_residual = (l0.L * w - jinv_v0).cwiseAbs().maxCoeff();
    VectorXcd jinv_w(2 * n);
    jinv_w << I_unit * w.head(n), -I_unit * w.tail(n);
    out.c1 = detail::pair_inner(jinv_w, v0, dx).real();

    // phi1 from the pseudoinverse of the real symmetric linearization.
    const cplx du_inf = -I_unit * p.f / p.zeta;
    VectorXcd rhs_c(n);
    for (Index j = 0; j < n; ++j) {
        const cplx ph = phi.values[j];
        rhs_c[j] = 2.0 * std::norm(ph) * du_inf + ph * ph * std::conj(du_inf) + I_unit * ph;
    }
    VectorXd rhs(2 * n);
    rhs << rhs_c.real(), rhs_c.imag();

    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(detail::real_linearization(phi, p.zeta));
    const VectorXd& mu = es.eigenvalues();
    std::vector<Index> order(2 * n);
    for (Index i = 0; i < 2 * n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(mu[a]) < std::abs(mu[b]); });
    // Two-dimensional kernel: i phi (even) and phi' (odd).
    constexpr int kernel_dim = 2;
    const double smallest_kept = std::abs(mu[order[kernel_dim]]);
    out.kernel_solve_condition = mu.cwiseAbs().maxCoeff() / smallest_kept;
    if (!(out.kernel_solve_condition <= 1e12) || std::abs(mu[order[kernel_dim - 1]]) > 1e-6) {
        std::ostringstream os;
        os << "kernel-constrained solve has condition " << out.kernel_solve_condition;
        throw IllConditionedKernelSolve(os.str());
    }
    VectorXd sol = VectorXd::Zero(2 * n);
    for (Index k = kernel_dim; k < 2 * n; ++k) {
        const Index i = order[k];
        sol += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(rhs) / mu[i]);
    }
    VectorXcd phi1(n);
    for (Index j = 0; j < n; ++j) phi1[j] = cplx(sol[j], sol[n + j]);

    auto c2_with = [&](double kappa) {
        VectorXcd u1 = I_unit * kappa * phi.values + phi1;
        u1.array() += du_inf;
        return detail::l1_pairing(phi, u1);
    };
    out.c2 = c2_with(0.0);
    out.theta_coefficient_sensitivity = std::abs(c2_with(1.0) - out.c2);
    return out;
}

// ---------------------------------------------------------------------------

///
/// Index count for the real Hamiltonian problem. The Gram value of an eigenvector
/// is taken in real-form coordinates; only simple imaginary eigenvalues enter.
///
inline KreinReport krein_audit(const RealOperatorPair& real_ops, const SpectrumReport& report)
{
    constexpr double tol = 1e-6;
    KreinReport k;
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(real_ops.L_tilde, Eigen::EigenvaluesOnly);
    for (Index i = 0; i < es.eigenvalues().size(); ++i) k.n_L += es.eigenvalues()[i] < -tol;

    const double eps = report.epsilon();
    std::vector<cplx> imaginary;
    for (Index i = 0; i < report.eigenvalues.size(); ++i) {
        const cplx mu = report.eigenvalues[i] + eps;
        const bool discrete = report.classes[i] != EigenClass::essential_band;
        if (mu.real() > tol) {
            (std::abs(mu.imag()) < tol ? k.k_r : k.k_c) += 1;
        } else if (discrete && std::abs(mu.real()) <= tol && std::abs(mu.imag()) > tol) {
            const VectorXcd w = to_real_coordinates(report.eigenvectors.col(i), real_ops.theta0);
            const double gram = w.dot(real_ops.L_tilde * w).real() / w.squaredNorm();
            k.per_eigenvalue_signs.emplace_back(mu, gram);
            for (const cplx& other : imaginary)
                if (std::abs(other - mu) < tol)
                    throw CountingFormulaViolation("imaginary eigenvalue is not simple; Gram matrix would be needed");
            imaginary.push_back(mu);
            if (gram < 0.0) ++k.k_i_minus;
        } else if (discrete && std::abs(mu) > tol) {
            const VectorXcd w = to_real_coordinates(report.eigenvectors.col(i), real_ops.theta0);
            k.per_eigenvalue_signs.emplace_back(mu, w.dot(real_ops.L_tilde * w).real() / w.squaredNorm());
        }
    }
    if (!k.balanced()) {
        std::ostringstream os;
        os << "counting formula fails: k_r + k_i^- + k_c = " << k.k_r << " + " << k.k_i_minus << " + " << k.k_c
           << " but n(L~) = " << k.n_L << "; discrete eigenvalues:";
        for (const auto& [mu, g] : k.per_eigenvalue_signs) os << ' ' << mu << " (gram " << g << ')';
        throw CountingFormulaViolation(os.str());
    }
    return k;
}

} // namespace lle

#endif // LLE_SPECTRUM_HPP
