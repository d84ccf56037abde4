#ifndef LLE_LAPACK_HPP
#define LLE_LAPACK_HPP

//
// Thin bridge to LAPACK's nonsymmetric eigensolver (zgeev).
//

#include <complex>
#include <string>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>

#include "errors.hpp"

namespace lle {

struct EigenDecomposition {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors; ///< right eigenvectors, unit 2-norm columns; empty if not requested
};

inline EigenDecomposition general_eigen(Eigen::MatrixXcd a, bool want_vectors = true)
{
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenDecomposition out;
    out.values.resize(n);
    if (want_vectors) out.vectors.resize(n, n);
    std::complex<double> dummy;
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', want_vectors ? 'V' : 'N', n, a.data(), n,
                                          out.values.data(), &dummy, 1,
                                          want_vectors ? out.vectors.data() : &dummy, want_vectors ? n : 1);
    if (info != 0) throw EigensolveFailure("zgeev failed with info = " + std::to_string(info));
    return out;
}

} // namespace lle

#endif // LLE_LAPACK_HPP
