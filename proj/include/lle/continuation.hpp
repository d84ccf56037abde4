#ifndef LLE_CONTINUATION_HPP
#define LLE_CONTINUATION_HPP

//
// Newton correction and eps-continuation of even stationary solutions.
//
// The stationary map involves conj(u), so it is linearized over R: unknowns are
// stacked (Re u, Im u) samples. Solves are restricted to even fields, which
// removes the odd translation mode u' from the kernel.
//

#include <cmath>
#include <numbers>
#include <functional>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "soliton.hpp"

namespace lle {

struct NewtonOptions {
    double tol = 1e-10;          ///< L-infinity stationary residual
    int max_iters = 25;
    double max_condition = 1e14; ///< reciprocal of the LU condition estimate
};

struct BranchPoint {
    Params params;
    ComplexField field;
    cplx u_inf = 0.0;
    double theta_fit = 0.0;
    double correction_norm = 0.0; ///< H2 norm of u - u_inf - phi_{theta_fit}
    double residual_norm = 0.0;   ///< L-infinity stationary residual
    int newton_iters = 0;

    double epsilon() const noexcept { return params.epsilon; }
    const Grid& grid() const noexcept { return field.grid; }
};

struct Branch {
    Params params; ///< zeta and f shared by every point
    std::vector<BranchPoint> points;
};

/// Raised when continuation cannot reach the requested eps; carries what was built.
class ContinuationFailure : public Error {
public:
    ContinuationFailure(const std::string& what, Branch partial, double failed_epsilon)
        : Error(what), partial_(std::move(partial)), failed_epsilon_(failed_epsilon) {}

    const Branch& partial() const noexcept { return partial_; }
    double failed_epsilon() const noexcept { return failed_epsilon_; }

private:
    Branch partial_;
    double failed_epsilon_;
};

/// -u'' + zeta u - |u|^2 u + i eps (f - u)
inline ComplexField stationary_residual(const ComplexField& u, const Params& p)
{
    ComplexField r = second_derivative(u);
    r.values = -r.values;
    r.values.array() += p.zeta * u.values.array() - u.values.array().abs2() * u.values.array()
                        + I_unit * p.epsilon * (p.f - u.values.array());
    return r;
}

/// arg of the pairing of u - u_inf with the unrotated soliton.
inline double fit_theta(const BranchPoint& point)
{
    ComplexField localized = point.field;
    localized.values.array() -= point.u_inf;
    const ComplexField phi0 = nls_soliton(point.params, point.grid(), 0.0);
    return std::arg(inner(localized, phi0));
}

namespace detail {

/// Folds a full-grid vector onto the even half (indices n/2 .. n inclusive, mod n).
struct EvenReduction {
    const Grid& g;
    Index half() const { return g.size() / 2 + 1; }
    Index full_index(Index m) const { return (g.center() + m) % g.size(); }

    VectorXcd restrict(const VectorXcd& full) const
    {
        VectorXcd r(half());
        for (Index m = 0; m < half(); ++m) r[m] = full[full_index(m)];
        return r;
    }

    VectorXcd expand(const VectorXcd& reduced) const
    {
        VectorXcd full(g.size());
        for (Index m = 0; m < half(); ++m) {
            full[full_index(m)] = reduced[m];
            full[g.mirror(full_index(m))] = reduced[m];
        }
        return full;
    }

    MatrixXd fold(const MatrixXd& op) const
    {
        const Index h = half();
        MatrixXd r(h, h);
        for (Index m = 0; m < h; ++m) {
            const Index row = full_index(m);
            for (Index mp = 0; mp < h; ++mp) {
                const Index col = full_index(mp), mcol = g.mirror(col);
                r(m, mp) = op(row, col) + (mcol != col ? op(row, mcol) : 0.0);
            }
        }
        return r;
    }
};

inline void finalize_point(BranchPoint& pt)
{
    pt.u_inf = solve_background(pt.params);
    pt.theta_fit = fit_theta(pt);
    ComplexField corr = pt.field - nls_soliton(pt.params, pt.grid(), pt.theta_fit);
    corr.values.array() -= pt.u_inf;
    pt.correction_norm = norm(corr, NormKind::H2);
    pt.residual_norm = norm(stationary_residual(pt.field, pt.params), NormKind::Linf);
}

inline double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

} // namespace detail

///
/// Newton iteration for the stationary equation in the even subspace. Always
/// performs at least one step; the Jacobian conditioning is checked at each one.
///
inline BranchPoint newton_correct(const ComplexField& seed, const Params& p, const NewtonOptions& opt = {})
{
    p.validate();
    const Grid& g = seed.grid;
    const detail::EvenReduction even{g};
    const Index h = even.half();
    const MatrixXd d2 = even.fold(second_derivative_matrix(g));

    ComplexField u = seed;
    u.values = 0.5 * (seed.values + mirrored(seed).values);

    double res = norm(stationary_residual(u, p), NormKind::Linf);
    int iters = 0;
    while (true) {
        if (iters >= opt.max_iters) {
            std::ostringstream os;
            os << "Newton did not converge in " << opt.max_iters << " iterations at eps = " << p.epsilon
               << " (residual " << res << ")";
            throw NoConvergence(os.str());
        }
        const VectorXcd ur = even.restrict(u.values);
        const VectorXd a = ur.real(), b = ur.imag();

        MatrixXd jac(2 * h, 2 * h);
        jac.topLeftCorner(h, h) = -d2;
        jac.bottomRightCorner(h, h) = -d2;
        jac.topRightCorner(h, h).setZero();
        jac.bottomLeftCorner(h, h).setZero();
        for (Index m = 0; m < h; ++m) {
            jac(m, m) += p.zeta - (3.0 * a[m] * a[m] + b[m] * b[m]);
            jac(h + m, h + m) += p.zeta - (a[m] * a[m] + 3.0 * b[m] * b[m]);
            jac(m, h + m) = -2.0 * a[m] * b[m] + p.epsilon;
            jac(h + m, m) = -2.0 * a[m] * b[m] - p.epsilon;
        }
        Eigen::PartialPivLU<MatrixXd> lu(jac);
        const double rcond = lu.rcond();
        if (!(rcond > 1.0 / opt.max_condition)) {
            std::ostringstream os;
            os << "Jacobian condition estimate " << 1.0 / rcond << " exceeds " << opt.max_condition
               << " at eps = " << p.epsilon;
            throw SingularJacobian(os.str());
        }

        const VectorXcd fr = even.restrict(stationary_residual(u, p).values);
        VectorXd rhs(2 * h);
        rhs << -fr.real(), -fr.imag();
        const VectorXd step = lu.solve(rhs);
        VectorXcd dv(h);
        for (Index m = 0; m < h; ++m) dv[m] = cplx(step[m], step[h + m]);
        u.values += even.expand(dv);
        ++iters;

        res = norm(stationary_residual(u, p), NormKind::Linf);
        if (!std::isfinite(res)) throw NoConvergence("Newton iterate diverged at eps = " + std::to_string(p.epsilon));
        if (res < opt.tol) break;
    }

    BranchPoint pt{p, u};
    pt.newton_iters = iters;
    detail::finalize_point(pt);
    return pt;
}

///
/// Natural-parameter continuation in eps at fixed (zeta, f). The first point is
/// seeded by the leading ansatz, later ones by secant extrapolation. A failing
/// step is bisected up to six times before the failure is reported.
///
inline Branch continue_branch(const Params& params, const Grid& grid, double theta_start, double eps_start,
                              double eps_end, double step, const NewtonOptions& opt = {})
{
    params.validate();
    if (!(step > 0.0)) throw std::invalid_argument("continue_branch: step must be positive");
    if (eps_start == 0.0) throw std::invalid_argument("continue_branch: eps_start must be nonzero");
    if (eps_start * eps_end < 0.0) throw std::invalid_argument("continue_branch: eps range must not cross zero");

    const double dir = eps_end >= eps_start ? 1.0 : -1.0;
    std::vector<double> targets;
    const double span = std::abs(eps_end - eps_start);
    const int count = int(std::floor(span / step + 1e-9));
    for (int i = 0; i <= count; ++i) targets.push_back(eps_start + dir * i * step);
    if (span - count * step > 1e-9 * step) targets.push_back(eps_end);

    Branch branch{params, {}};
    constexpr int max_halvings = 6;
    constexpr double max_theta_jump = 0.1;

    auto seed_for = [&](double eps, const std::vector<const BranchPoint*>& hist) {
        const Params p = params.with_epsilon(eps);
        if (hist.empty()) return leading_ansatz(p, grid, theta_start);
        const BranchPoint& last = *hist.back();
        ComplexField s = last.field;
        if (hist.size() >= 2) {
            const BranchPoint& prev = *hist[hist.size() - 2];
            const double t = (eps - last.epsilon()) / (last.epsilon() - prev.epsilon());
            s.values += t * (last.field.values - prev.field.values);
        } else {
            s.values.array() += solve_background(p) - last.u_inf;
        }
        return s;
    };

    // Solve at eps starting from the history; bisect towards eps on failure.
    std::function<BranchPoint(double, std::vector<const BranchPoint*>, int)> reach;
    reach = [&](double eps, std::vector<const BranchPoint*> hist, int depth) -> BranchPoint {
        std::string why;
        try {
            BranchPoint pt = newton_correct(seed_for(eps, hist), params.with_epsilon(eps), opt);
            if (hist.empty() || std::abs(detail::wrap_angle(pt.theta_fit - hist.back()->theta_fit)) < max_theta_jump)
                return pt;
            why = "rotation angle jumped by more than 0.1 rad";
        } catch (const Error& e) {
            why = e.what();
        }
        if (hist.empty() || depth >= max_halvings) throw NoConvergence(why);
        const double mid = 0.5 * (hist.back()->epsilon() + eps);
        BranchPoint mid_pt = reach(mid, hist, depth + 1);
        auto hist2 = hist;
        hist2.push_back(&mid_pt);
        return reach(eps, hist2, depth + 1);
    };

    for (double eps : targets) {
        std::vector<const BranchPoint*> hist;
        for (std::size_t i = branch.points.size() >= 2 ? branch.points.size() - 2 : 0; i < branch.points.size(); ++i)
            hist.push_back(&branch.points[i]);
        try {
            branch.points.push_back(reach(eps, hist, 0));
        } catch (const NoConvergence& e) {
            std::ostringstream os;
            os << "continuation failed at eps = " << eps << ": " << e.what();
            throw ContinuationFailure(os.str(), branch, eps);
        }
    }
    return branch;
}

} // namespace lle

#endif // LLE_CONTINUATION_HPP
