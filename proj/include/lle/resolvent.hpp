#ifndef LLE_RESOLVENT_HPP
#define LLE_RESOLVENT_HPP

//
// Resolvent norms of the deflated generator on the closed right half-plane, and
// the block-elimination solve used for high frequencies.
//

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linops.hpp"

namespace lle {

struct ResolventOptions {
    bool exact_svd = false;       ///< form the solution matrix and take its SVD instead of Lanczos
    double max_condition = 1e14;
    double min_distance = 1e-8;   ///< to known non-kernel eigenvalues
    int lanczos_max_iters = 120;
    double lanczos_tol = 1e-14;
};

namespace detail {

/// Largest eigenvalue of a Hermitian positive semidefinite operator, by Lanczos
/// with full reorthogonalization.
template <class Apply>
double lanczos_largest(Index dim, Apply&& apply, int max_iters, double tol)
{
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    VectorXcd q(dim);
    for (Index i = 0; i < dim; ++i) q[i] = cplx(normal(rng), normal(rng));
    q.normalize();

    const int kmax = int(std::min<Index>(dim, max_iters));
    MatrixXcd basis(dim, kmax);
    std::vector<double> alpha, beta;
    double theta = 0.0;
    for (int k = 0; k < kmax; ++k) {
        basis.col(k) = q;
        VectorXcd w = apply(q);
        alpha.push_back(q.dot(w).real());
        for (int pass = 0; pass < 2; ++pass)
            w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
        const double b = w.norm();

        MatrixXd t = MatrixXd::Zero(k + 1, k + 1);
        for (int i = 0; i <= k; ++i) t(i, i) = alpha[i];
        for (int i = 0; i < k; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
        theta = es.eigenvalues()[k];
        const double residual = b * std::abs(es.eigenvectors()(k, k));
        if (residual <= tol * theta || b <= tol * theta) break;
        beta.push_back(b);
        q = w / b;
    }
    return theta;
}

/// Operator 2-norm of  M^{-1} (I - r l^*)  given an LU factorization of M.
inline double projected_inverse_norm(const Eigen::PartialPivLU<MatrixXcd>& lu, const VectorXcd* r, const VectorXcd* l,
                                     const ResolventOptions& opt)
{
    const Index dim = lu.rows();
    auto project = [&](VectorXcd v) {
        if (r) v -= *r * l->dot(v);
        return v;
    };
    auto project_adjoint = [&](VectorXcd v) {
        if (r) v -= *l * r->dot(v);
        return v;
    };
    if (opt.exact_svd) {
        MatrixXcd rhs = MatrixXcd::Identity(dim, dim);
        if (r) rhs -= *r * l->adjoint();
        const MatrixXcd x = lu.solve(rhs);
        return Eigen::BDCSVD<MatrixXcd>(x).singularValues()[0];
    }
    auto normal_op = [&](const VectorXcd& v) {
        const VectorXcd y = lu.solve(project(v));
        return project_adjoint(lu.adjoint().solve(y));
    };
    return std::sqrt(lanczos_largest(dim, normal_op, opt.lanczos_max_iters, opt.lanczos_tol));
}

inline void check_conditioning(const Eigen::PartialPivLU<MatrixXcd>& lu, cplx lambda, const ResolventOptions& opt)
{
    const double rc = lu.rcond();
    if (!(rc * opt.max_condition > 1.0)) {
        std::ostringstream os;
        os << "resolvent at lambda = " << lambda << " has condition estimate " << 1.0 / rc;
        throw NearSingular(os.str());
    }
}

} // namespace detail

///
/// || (JL - eps - lambda)^{-1} (I - P0) ||_2. For the biorthogonal projection the
/// kernel is replaced by an identity block, which leaves the operator on the
/// complement unchanged and keeps lambda = 0 computable.
///
inline double resolvent_norm(const OperatorPair& ops, const SpectralProjection& proj, cplx lambda,
                             const ResolventOptions& opt = {}, const VectorXcd& known_eigenvalues = VectorXcd())
{
    for (Index i = 0; i < known_eigenvalues.size(); ++i) {
        const cplx mu = known_eigenvalues[i];
        if (std::abs(mu) >= 1e-6 && std::abs(mu - lambda) < opt.min_distance) {
            std::ostringstream os;
            os << "lambda = " << lambda << " lies within " << opt.min_distance << " of eigenvalue " << mu;
            throw NearSingular(os.str());
        }
    }
    MatrixXcd m = ops.generator();
    m.diagonal().array() -= lambda;
    if (proj.kind == DeflationKind::biorthogonal) m += (1.0 + lambda) * proj.P0;
    const Eigen::PartialPivLU<MatrixXcd> lu(m);
    detail::check_conditioning(lu, lambda, opt);
    return detail::projected_inverse_norm(lu, &proj.kernel_vector, &proj.left_vector, opt);
}

/// ||(H - lambda)^{-1}|| for a plain matrix, through the same numerical path.
inline double matrix_resolvent_norm(const MatrixXcd& h, cplx lambda, const ResolventOptions& opt = {})
{
    MatrixXcd m = h;
    m.diagonal().array() -= lambda;
    const Eigen::PartialPivLU<MatrixXcd> lu(m);
    detail::check_conditioning(lu, lambda, opt);
    return detail::projected_inverse_norm(lu, nullptr, nullptr, opt);
}

/// 1 / dist(sigma(H), lambda) for Hermitian H.
inline double self_adjoint_resolvent_norm(const MatrixXcd& h, cplx lambda)
{
    const Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    double d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < es.eigenvalues().size(); ++i) d = std::min(d, std::abs(es.eigenvalues()[i] - lambda));
    return 1.0 / d;
}

// ---------------------------------------------------------------------------

enum class ResolventRegion { hille_yosida, high_frequency, compact };

inline std::string to_string(ResolventRegion r)
{
    switch (r) {
    case ResolventRegion::hille_yosida: return "hille_yosida";
    case ResolventRegion::high_frequency: return "high_frequency";
    case ResolventRegion::compact: return "compact";
    }
    return "unknown";
}

struct ScanSpec {
    std::vector<double> re_values;
    std::vector<double> im_values;
    double hille_yosida_re = 0.0;   ///< numerical abscissa of the generator + 1
    double high_frequency_im = 0.0; ///< 2 zeta
};

struct ResolventScan {
    std::vector<cplx> lambda_samples;
    std::vector<double> norms;
    std::vector<ResolventRegion> regions;
    std::vector<std::pair<cplx, std::string>> excluded;
    double sup_norm = 0.0;
    cplx sup_at = 0.0;
    ScanSpec scan_spec;
};

/// Largest eigenvalue of the Hermitian part: Re lambda above it is in the Hille-Yosida region.
inline double numerical_abscissa(const MatrixXcd& a)
{
    const MatrixXcd h = 0.5 * (a + a.adjoint());
    return Eigen::SelfAdjointEigenSolver<MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

inline ResolventScan scan_halfplane(const OperatorPair& ops, const SpectralProjection& proj,
                                    const std::vector<double>& re_values, const std::vector<double>& im_values,
                                    const ResolventOptions& opt = {}, const VectorXcd& known_eigenvalues = VectorXcd())
{
    ResolventScan scan;
    scan.scan_spec = {re_values, im_values, numerical_abscissa(ops.generator()) + 1.0, 2.0 * ops.about.params.zeta};
    for (double re : re_values)
        for (double im : im_values) {
            const cplx lambda(re, im);
            try {
                const double nrm = resolvent_norm(ops, proj, lambda, opt, known_eigenvalues);
                scan.lambda_samples.push_back(lambda);
                scan.norms.push_back(nrm);
                scan.regions.push_back(re >= scan.scan_spec.hille_yosida_re ? ResolventRegion::hille_yosida
                                       : std::abs(im) >= scan.scan_spec.high_frequency_im ? ResolventRegion::high_frequency
                                                                                          : ResolventRegion::compact);
                if (nrm > scan.sup_norm) {
                    scan.sup_norm = nrm;
                    scan.sup_at = lambda;
                }
            } catch (const NearSingular& e) {
                scan.excluded.emplace_back(lambda, e.what());
            }
        }
    return scan;
}

// ---------------------------------------------------------------------------
// High-frequency block system
//
//     (A+ + li - i lr) phi1 + B phi2 = psi1
//     (A- - li + i lr) phi2 + B^* phi1 = psi2
//
// which is (J [[A+, B], [B^*, A-]] - lambda) phi = psi after the rescaling
// psi1 -> i psi1, psi2 -> -i psi2.

struct BlockSystem {
    MatrixXcd A_plus;
    MatrixXcd A_minus;
    MatrixXcd B;
    double bound_gamma = 0.0; ///< A+- >= -bound_gamma

    Index size() const { return A_plus.rows(); }

    static BlockSystem from_operators(const MatrixXcd& a_plus, const MatrixXcd& a_minus, const MatrixXcd& b)
    {
        BlockSystem s{a_plus, a_minus, b, 0.0};
        const double lo = std::min(Eigen::SelfAdjointEigenSolver<MatrixXcd>(a_plus, Eigen::EigenvaluesOnly).eigenvalues().minCoeff(),
                                   Eigen::SelfAdjointEigenSolver<MatrixXcd>(a_minus, Eigen::EigenvaluesOnly).eigenvalues().minCoeff());
        s.bound_gamma = std::max(0.0, -lo);
        return s;
    }

    /// A+- = -D2 + zeta - 2|u|^2,  B = -u^2.
    static BlockSystem from_point(const BranchPoint& point)
    {
        const OperatorPair ops = assemble(point);
        const Index n = ops.half();
        return from_operators(ops.L.topLeftCorner(n, n), ops.L.bottomRightCorner(n, n), ops.L.topRightCorner(n, n));
    }

    /// The full 2n x 2n matrix of the rescaled system at lambda.
    MatrixXcd matrix(cplx lambda) const
    {
        const Index n = size();
        const double lr = lambda.real(), li = lambda.imag();
        MatrixXcd m(2 * n, 2 * n);
        m.topLeftCorner(n, n) = A_plus;
        m.topLeftCorner(n, n).diagonal().array() += li - I_unit * lr;
        m.topRightCorner(n, n) = B;
        m.bottomLeftCorner(n, n) = B.adjoint();
        m.bottomRightCorner(n, n) = A_minus;
        m.bottomRightCorner(n, n).diagonal().array() += -li + I_unit * lr;
        return m;
    }
};

struct BlockVector {
    VectorXcd first;
    VectorXcd second;
};

inline BlockVector direct_block_solve(const BlockSystem& s, cplx lambda, const BlockVector& rhs)
{
    const Index n = s.size();
    VectorXcd r(2 * n);
    r << rhs.first, rhs.second;
    const VectorXcd x = s.matrix(lambda).partialPivLu().solve(r);
    return {x.head(n), x.tail(n)};
}

namespace detail {

inline MatrixXcd shifted_inverse(const MatrixXcd& a, cplx shift)
{
    MatrixXcd m = a;
    m.diagonal().array() += shift;
    return m.partialPivLu().inverse();
}

/// Pieces of the elimination for one lambda. For li > 0 the first unknown is
/// eliminated; for li < 0 the roles of the two blocks are mirrored.
struct SchurPieces {
    bool eliminate_first = true;
    MatrixXcd r_shifted; ///< (A+ + li - i lr)^{-1}  or  (A- - li + i lr)^{-1}
    MatrixXcd outer_inv; ///< (Schur - li + i lr)^{-1}  or  (Schur + li - i lr)^{-1}
    MatrixXcd K;         ///< perturbation term of the reduced equation
};

inline SchurPieces schur_pieces(const BlockSystem& s, cplx lambda)
{
    const double lr = lambda.real(), li = lambda.imag();
    SchurPieces p;
    p.eliminate_first = li > 0.0;
    if (p.eliminate_first) {
        p.r_shifted = shifted_inverse(s.A_plus, cplx(li, -lr));
        const MatrixXcd r0 = shifted_inverse(s.A_plus, cplx(li, 0.0));
        const MatrixXcd schur = s.A_minus - s.B.adjoint() * r0 * s.B;
        p.outer_inv = shifted_inverse(schur, cplx(-li, lr));
        p.K = I_unit * lr * p.outer_inv * s.B.adjoint() * p.r_shifted * r0 * s.B;
    } else {
        p.r_shifted = shifted_inverse(s.A_minus, cplx(-li, lr));
        const MatrixXcd r0 = shifted_inverse(s.A_minus, cplx(-li, 0.0));
        const MatrixXcd schur = s.A_plus - s.B * r0 * s.B.adjoint();
        p.outer_inv = shifted_inverse(schur, cplx(li, -lr));
        p.K = -I_unit * lr * p.outer_inv * s.B * p.r_shifted * r0 * s.B.adjoint();
    }
    return p;
}

inline double spectral_norm(const MatrixXcd& m) { return Eigen::BDCSVD<MatrixXcd>(m).singularValues()[0]; }

} // namespace detail

/// ||K|| at lambda: the contraction that must stay below 1/2 for the elimination.
inline double contraction_norm(const BlockSystem& s, cplx lambda)
{
    if (lambda.imag() == 0.0) throw std::invalid_argument("contraction_norm: Im lambda must be nonzero");
    return detail::spectral_norm(detail::schur_pieces(s, lambda).K);
}

///
/// Solves the block system by eliminating one unknown, inverting the reduced
/// self-adjoint operator and treating the remainder K as a perturbation of I.
///
inline BlockVector schur_high_frequency_solve(const BlockSystem& s, cplx lambda, const BlockVector& rhs)
{
    const double li = lambda.imag();
    if (lambda.real() == 0.0) throw std::invalid_argument("schur_high_frequency_solve: Re lambda must be nonzero");
    if (std::abs(li) < 2.0 * s.bound_gamma) {
        std::ostringstream os;
        os << "|Im lambda| = " << std::abs(li) << " is below 2 gamma = " << 2.0 * s.bound_gamma;
        throw FrequencyTooLow(os.str());
    }
    const detail::SchurPieces p = detail::schur_pieces(s, lambda);
    const double k_norm = detail::spectral_norm(p.K);
    if (k_norm >= 0.5) {
        std::ostringstream os;
        os << "contraction norm " << k_norm << " >= 1/2 at Im lambda = " << li;
        throw FrequencyTooLow(os.str());
    }
    MatrixXcd i_minus_k = -p.K;
    i_minus_k.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<MatrixXcd> lu(i_minus_k);
    if (p.eliminate_first) {
        const VectorXcd phi2 = lu.solve(p.outer_inv * (rhs.second - s.B.adjoint() * (p.r_shifted * rhs.first)));
        const VectorXcd phi1 = p.r_shifted * (rhs.first - s.B * phi2);
        return {phi1, phi2};
    }
    const VectorXcd phi1 = lu.solve(p.outer_inv * (rhs.first - s.B * (p.r_shifted * rhs.second)));
    const VectorXcd phi2 = p.r_shifted * (rhs.second - s.B.adjoint() * phi1);
    return {phi1, phi2};
}

///
/// Smallest Im lambda on a unit-spaced grid above 2 gamma beyond which every
/// sampled ||K|| stays below 1/2, up to im_max. Returns infinity if none.
///
inline double compute_rho(const BlockSystem& s, double lambda_r, double im_max = 200.0, double im_step = 1.0)
{
    if (lambda_r == 0.0) throw std::invalid_argument("compute_rho: Re lambda must be nonzero");
    const double start = std::max(2.0 * s.bound_gamma, im_step);
    double rho = start;
    bool ok_tail = false;
    for (double li = start; li <= im_max + 1e-12; li += im_step) {
        if (contraction_norm(s, cplx(lambda_r, li)) >= 0.5) {
            rho = li + im_step;
            ok_tail = false;
        } else {
            ok_tail = true;
        }
    }
    return ok_tail ? rho : std::numeric_limits<double>::infinity();
}

/// Operator norm of the block-system solution map at lambda.
inline double block_resolvent_norm(const BlockSystem& s, cplx lambda, const ResolventOptions& opt = {})
{
    const Eigen::PartialPivLU<MatrixXcd> lu(s.matrix(lambda));
    detail::check_conditioning(lu, lambda, opt);
    return detail::projected_inverse_norm(lu, nullptr, nullptr, opt);
}

struct ScalingRow {
    double lambda_r = 0.0;
    double norm = 0.0;
    double product = 0.0; ///< norm * lambda_r
};

///
/// Resolvent norm against Re lambda at fixed Im lambda: the product column is
/// flat when the norm scales like 1/Re lambda.
///
inline std::vector<ScalingRow> high_frequency_scaling_check(const BlockSystem& s, const std::vector<double>& re_values,
                                                            double im_value)
{
    std::vector<ScalingRow> rows;
    for (double lr : re_values) {
        if (lr == 0.0)
            throw std::invalid_argument("high_frequency_scaling_check: Re lambda = 0 is excluded, the 1/Re lambda "
                                        "scaling bound needs Re lambda != 0");
        const double nrm = block_resolvent_norm(s, cplx(lr, im_value));
        rows.push_back({lr, nrm, nrm * std::abs(lr)});
    }
    return rows;
}

} // namespace lle

#endif // LLE_RESOLVENT_HPP
