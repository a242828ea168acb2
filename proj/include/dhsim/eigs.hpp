#ifndef DHSIM_EIGS_HPP
#define DHSIM_EIGS_HPP

#include "dhsim/common.hpp"

namespace dhsim {

struct EigenPairs {
    Vector values;   // ascending
    Matrix vectors;  // n x k, M-orthonormal columns
};

struct EigsOptions {
    double residual_tol = 1e-8;
    int max_subspace = 0;     // 0 = choose from k
    unsigned seed = 0x51e55u; // start-vector seed for the Krylov path
    bool force_dense = false;
    bool force_sparse = false;
};

/// Smallest k eigenpairs of the symmetric pencil L v = lambda M v with L
/// sparse positive semidefinite and M a positive diagonal (passed as its
/// diagonal vector). The pencil is scaled to a standard symmetric problem
/// via M^{-1/2}; small problems use a dense solver, large ones a
/// shift-inverted Lanczos iteration with full reorthogonalization.
/// Every returned pair is residual-checked:
///   ||L v - lambda M v|| <= residual_tol * ||v|| * max(1, lambda * max(M)).
EigenPairs generalized_eigs(const SparseMatrix& L, const Vector& M_diag, int k,
                            const EigsOptions& opts = {});

}  // namespace dhsim

#endif
