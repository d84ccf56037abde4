#ifndef LLE_LINOPS_HPP
#define LLE_LINOPS_HPP

//
// Dense discretizations of the linearization about a stationary wave.
//
// Perturbations are carried as doubled vectors (v, conj v) of length 2n, so the
// R-linear map v -> ... + u^2 conj(v) becomes an ordinary complex matrix:
//
//     L = [ -D2 + zeta - 2|u|^2      -u^2               ]      J = diag(-i, i)
//         [ -conj(u)^2               -D2 + zeta - 2|u|^2 ]
//
// and the evolution generator is  JL - eps.
//

#include <cmath>
#include <optional>
#include <sstream>

#include "continuation.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "lapack.hpp"
#include "soliton.hpp"

namespace lle {

struct OperatorPair {
    MatrixXcd L;
    MatrixXcd J;
    double epsilon = 0.0;
    BranchPoint about;

    Index half() const { return L.rows() / 2; }

    /// JL, the Hamiltonian part.
    MatrixXcd hamiltonian() const
    {
        const Index n = half();
        MatrixXcd m(2 * n, 2 * n);
        m.topRows(n) = -I_unit * L.topRows(n);
        m.bottomRows(n) = I_unit * L.bottomRows(n);
        return m;
    }

    /// JL - eps, the linearized evolution generator.
    MatrixXcd generator() const
    {
        MatrixXcd m = hamiltonian();
        m.diagonal().array() -= epsilon;
        return m;
    }
};

inline OperatorPair assemble(const ComplexField& u, const Params& p)
{
    const Grid& g = u.grid;
    const Index n = g.size();
    const MatrixXd d2 = second_derivative_matrix(g);

    OperatorPair ops{MatrixXcd::Zero(2 * n, 2 * n), MatrixXcd::Zero(2 * n, 2 * n), p.epsilon, BranchPoint{p, u}};
    ops.L.topLeftCorner(n, n) = (-d2).cast<cplx>();
    ops.L.bottomRightCorner(n, n) = (-d2).cast<cplx>();
    for (Index j = 0; j < n; ++j) {
        const cplx uj = u.values[j];
        const double diag = p.zeta - 2.0 * std::norm(uj);
        ops.L(j, j) += diag;
        ops.L(n + j, n + j) += diag;
        ops.L(j, n + j) = -uj * uj;
        ops.L(n + j, j) = std::conj(-uj * uj);
    }
    ops.J.diagonal().head(n).setConstant(-I_unit);
    ops.J.diagonal().tail(n).setConstant(I_unit);
    return ops;
}

inline OperatorPair assemble(const BranchPoint& point)
{
    OperatorPair ops = assemble(point.field, point.params);
    ops.about = point;
    return ops;
}

/// The doubled vector (v, conj v).
inline VectorXcd doubled(const ComplexField& v)
{
    VectorXcd out(2 * v.size());
    out << v.values, v.values.conjugate();
    return out;
}

/// The discretized translation mode (u', conj u').
inline VectorXcd translation_mode(const ComplexField& u) { return doubled(first_derivative(u)); }

// ---------------------------------------------------------------------------
// Real form

struct RealOperatorPair {
    MatrixXd J_tilde;
    MatrixXd L_tilde;
    double theta0 = 0.0;

    MatrixXd hamiltonian() const { return J_tilde * L_tilde; }
};

/// 2x2 map taking (v, conj v) to the real and imaginary parts of e^{-i theta0} v.
inline Eigen::Matrix2cd real_form_transform(double theta0)
{
    Eigen::Matrix2cd t1, t2;
    t1 << 0.5, 0.5, -0.5 * I_unit, 0.5 * I_unit;
    const double c = std::cos(theta0), s = std::sin(theta0);
    t2 << c, s, -s, c;
    return t2 * t1;
}

/// Applies the blockwise similarity  (S (x) I) M (S^{-1} (x) I).
inline MatrixXcd block_similarity(const Eigen::Matrix2cd& s, const MatrixXcd& m)
{
    const Index n = m.rows() / 2;
    const Eigen::Matrix2cd si = s.inverse();
    MatrixXcd out = MatrixXcd::Zero(2 * n, 2 * n);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    const cplx w = s(a, k) * si(l, b);
                    if (w != 0.0) out.block(a * n, b * n, n, n) += w * m.block(k * n, l * n, n, n);
                }
    return out;
}

/// Maps a doubled eigenvector into the real-form coordinates.
inline VectorXcd to_real_coordinates(const VectorXcd& v, double theta0)
{
    const Eigen::Matrix2cd s = real_form_transform(theta0);
    const Index n = v.size() / 2;
    VectorXcd out(2 * n);
    out.head(n) = s(0, 0) * v.head(n) + s(0, 1) * v.tail(n);
    out.tail(n) = s(1, 0) * v.head(n) + s(1, 1) * v.tail(n);
    return out;
}

inline RealOperatorPair to_real_form(const OperatorPair& ops, double theta0)
{
    const Eigen::Matrix2cd s = real_form_transform(theta0);
    const MatrixXcd lt = block_similarity(s, ops.L);
    const MatrixXcd jt = block_similarity(s, ops.J);
    const double residue = std::max(lt.imag().cwiseAbs().maxCoeff(), jt.imag().cwiseAbs().maxCoeff());
    if (residue > 1e-8) {
        std::ostringstream os;
        os << "real form has imaginary residue " << residue;
        throw ComplexResidue(os.str());
    }
    return {jt.real(), lt.real(), theta0};
}

/// The eps = 0 blocks  L+ = -D2 + zeta - 3 phi0^2  and  L- = -D2 + zeta - phi0^2.
inline std::pair<MatrixXd, MatrixXd> split_operators(const Params& p, const Grid& g)
{
    if (!(p.zeta > 0.0)) throw std::invalid_argument("split_operators: zeta must be positive");
    const MatrixXd d2 = second_derivative_matrix(g);
    const ComplexField phi = nls_soliton(p, g, 0.0);
    MatrixXd lp = -d2, lm = -d2;
    for (Index j = 0; j < g.size(); ++j) {
        const double q = std::norm(phi.values[j]);
        lp(j, j) += p.zeta - 3.0 * q;
        lm(j, j) += p.zeta - q;
    }
    return {lp, lm};
}

// ---------------------------------------------------------------------------
// Spectral projection onto the translational kernel of JL - eps

enum class DeflationKind { biorthogonal, orthogonal };

struct SpectralProjection {
    MatrixXcd P0;
    VectorXcd kernel_vector; ///< right null vector, scaled to match (u', conj u')
    VectorXcd left_vector;   ///< left null vector; left^* kernel = 1 for the biorthogonal kind
    DeflationKind kind = DeflationKind::biorthogonal;

    VectorXcd apply(const VectorXcd& v) const { return kernel_vector * left_vector.dot(v); }
};

namespace detail {

inline VectorXcd inverse_iteration(const Eigen::PartialPivLU<MatrixXcd>& lu, VectorXcd v, bool adjoint)
{
    for (int it = 0; it < 3; ++it) {
        v = adjoint ? VectorXcd(lu.adjoint().solve(v)) : VectorXcd(lu.solve(v));
        v.normalize();
    }
    return v;
}

} // namespace detail

///
/// Rank-one projection onto Ker(JL - eps). If eigenvalues of the generator are
/// supplied they are used for the dimension check, otherwise they are computed.
///
inline SpectralProjection spectral_projection(const OperatorPair& ops,
                                              const std::optional<VectorXcd>& generator_eigenvalues = std::nullopt,
                                              DeflationKind kind = DeflationKind::biorthogonal)
{
    if (ops.epsilon == 0.0) throw std::invalid_argument("spectral_projection: eps must be nonzero");
    const MatrixXcd a = ops.generator();
    const VectorXcd evals = generator_eigenvalues ? *generator_eigenvalues : general_eigen(a, false).values;
    int small = 0;
    for (Index i = 0; i < evals.size(); ++i) small += std::abs(evals[i]) < 1e-6;
    if (small != 1) {
        std::ostringstream os;
        os << "expected a one-dimensional kernel, found " << small << " eigenvalues of modulus < 1e-6";
        throw KernelDimensionMismatch(os.str());
    }

    // A tiny shift keeps the factorization regular.
    MatrixXcd shifted = a;
    shifted.diagonal().array() -= 1e-9;
    const Eigen::PartialPivLU<MatrixXcd> lu(shifted);

    // The spectral derivative of u is the kernel vector; inverse iteration on the
    // adjoint supplies the matching left vector.
    const VectorXcd right = translation_mode(ops.about.field);

    SpectralProjection proj;
    proj.kind = kind;
    proj.kernel_vector = right;
    if (kind == DeflationKind::biorthogonal) {
        VectorXcd left = detail::inverse_iteration(lu, right, true);
        left /= std::conj(left.dot(right));
        proj.left_vector = left;
    } else {
        proj.left_vector = right / right.squaredNorm();
    }
    proj.P0 = proj.kernel_vector * proj.left_vector.adjoint();
    return proj;
}

} // namespace lle

#endif // LLE_LINOPS_HPP
