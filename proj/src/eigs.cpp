#include "dhsim/eigs.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace dhsim {

namespace {

constexpr int kDenseCutoff = 500;

Vector random_unit_vector(int n, std::mt19937_64& rng) {
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        // 53-bit uniform in [0,1); engine output used directly so the
        // sequence does not depend on library distribution internals.
        v[i] = static_cast<double>(rng() >> 11) * 0x1p-53 - 0.5;
    }
    double norm = v.norm();
    if (norm == 0.0) v[0] = 1.0; else v /= norm;
    return v;
}

/// Connected components of the matrix graph (via off-diagonal pattern).
std::vector<int> component_labels(const SparseMatrix& s) {
    const int n = static_cast<int>(s.rows());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) { parent[a] = parent[parent[a]]; a = parent[a]; }
        return a;
    };
    for (int col = 0; col < n; ++col) {
        for (SparseMatrix::InnerIterator it(s, col); it; ++it) {
            if (it.row() == col || it.value() == 0.0) continue;
            int a = find(static_cast<int>(it.row())), b = find(col);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        if (label[r] < 0) label[r] = next++;
        label[i] = label[r];
    }
    return label;
}

// Lanczos with full reorthogonalization against both the growing basis and
// a fixed deflation block (the known null space). Operates on the
// shift-inverted operator (S + shift I)^{-1}.
struct LanczosResult {
    Matrix basis;  // n x m
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples j and j+1
};

LanczosResult lanczos(const Eigen::SimplicialLDLT<SparseMatrix>& solver,
                      const Matrix& deflation, int n, int m, std::mt19937_64& rng) {
    LanczosResult r;
    r.basis.resize(n, m);
    r.alpha.resize(m, 0.0);
    r.beta.assign(m, 0.0);

    auto project_out = [&](Vector& w, int cols) {
        for (int pass = 0; pass < 2; ++pass) {
            if (deflation.cols() > 0) {
                w -= deflation * (deflation.transpose() * w);
            }
            if (cols > 0) {
                w -= r.basis.leftCols(cols) * (r.basis.leftCols(cols).transpose() * w);
            }
        }
    };

    Vector q = random_unit_vector(n, rng);
    project_out(q, 0);
    if (q.norm() < 1e-12) q = random_unit_vector(n, rng);
    r.basis.col(0) = q / q.norm();

    Vector prev = Vector::Zero(n);
    double beta_prev = 0.0;
    for (int j = 0; j < m; ++j) {
        Vector w = solver.solve(r.basis.col(j));
        r.alpha[j] = r.basis.col(j).dot(w);
        w -= r.alpha[j] * r.basis.col(j);
        if (j > 0) w -= beta_prev * prev;
        project_out(w, j + 1);
        if (j + 1 == m) break;
        double beta = w.norm();
        if (beta < 1e-12 * std::max(1.0, std::abs(r.alpha[j]))) {
            // Invariant subspace exhausted: restart with a fresh direction.
            Vector fresh = random_unit_vector(n, rng);
            project_out(fresh, j + 1);
            double norm = fresh.norm();
            if (norm < 1e-12) {
                // The basis spans everything reachable; truncate.
                r.basis.conservativeResize(n, j + 1);
                r.alpha.resize(j + 1);
                r.beta.resize(j + 1);
                break;
            }
            r.beta[j] = 0.0;
            prev = r.basis.col(j);
            beta_prev = 0.0;
            r.basis.col(j + 1) = fresh / norm;
            continue;
        }
        r.beta[j] = beta;
        prev = r.basis.col(j);
        beta_prev = beta;
        r.basis.col(j + 1) = w / beta;
    }
    return r;
}

}  // namespace

EigenPairs generalized_eigs(const SparseMatrix& L, const Vector& M_diag, int k,
                            const EigsOptions& opts) {
    const int n = static_cast<int>(L.rows());
    if (L.cols() != n) throw ValidationError("pencil matrix must be square");
    if (M_diag.size() != n) throw ValidationError("mass diagonal does not match pencil");
    if (k < 1 || k > n) throw ValidationError("eigenpair count k must be in [1, n]");
    for (int i = 0; i < n; ++i) {
        if (!(M_diag[i] > 0.0)) throw ValidationError("mass diagonal must be positive");
    }

    const Vector dinv = M_diag.cwiseSqrt().cwiseInverse();
    SparseMatrix S = dinv.asDiagonal() * L * dinv.asDiagonal();
    S.makeCompressed();

    const double scale = std::max(1.0, Vector(S.diagonal()).maxCoeff());

    Matrix y;  // eigenvectors of the scaled problem
    Vector values;

    const bool dense = !opts.force_sparse &&
                       (opts.force_dense || n < kDenseCutoff || 2 * k >= n);
    if (dense) {
        Eigen::SelfAdjointEigenSolver<Matrix> es{Matrix(S)};
        if (es.info() != Eigen::Success) {
            throw NumericalError("dense eigensolver failed");
        }
        values = es.eigenvalues().head(k);
        y = es.eigenvectors().leftCols(k);
    } else {
        // The null space is spanned by per-component indicators (scaled by
        // M^{1/2}); deflating it handles the zero eigenvalue and its
        // multiplicity exactly.
        std::vector<int> labels = component_labels(S);
        const int components = *std::max_element(labels.begin(), labels.end()) + 1;
        Matrix null_basis = Matrix::Zero(n, components);
        for (int i = 0; i < n; ++i) null_basis(i, labels[i]) = std::sqrt(M_diag[i]);
        for (int c = 0; c < components; ++c) null_basis.col(c).normalize();

        values.resize(k);
        y.resize(n, k);
        const int from_null = std::min(k, components);
        values.head(from_null).setZero();
        y.leftCols(from_null) = null_basis.leftCols(from_null);

        const int rest = k - from_null;
        if (rest > 0) {
            const double shift = 1e-6 * scale;
            SparseMatrix K = S;
            for (int i = 0; i < n; ++i) K.coeffRef(i, i) += shift;
            Eigen::SimplicialLDLT<SparseMatrix> solver;
            solver.compute(K);
            if (solver.info() != Eigen::Success) {
                throw NumericalError("factorization of the shifted pencil failed");
            }

            std::mt19937_64 rng(opts.seed);
            int m = opts.max_subspace > 0 ? opts.max_subspace
                                          : std::min(n, std::max(2 * rest + 40, 60));
            for (int attempt = 0;; ++attempt) {
                LanczosResult lz = lanczos(solver, null_basis, n, m, rng);
                const int steps = static_cast<int>(lz.alpha.size());
                if (steps < rest) {
                    throw NumericalError("Krylov space exhausted before finding " +
                                         std::to_string(k) + " eigenpairs");
                }
                Matrix t = Matrix::Zero(steps, steps);
                for (int j = 0; j < steps; ++j) {
                    t(j, j) = lz.alpha[j];
                    if (j + 1 < steps) t(j, j + 1) = t(j + 1, j) = lz.beta[j];
                }
                Eigen::SelfAdjointEigenSolver<Matrix> es(t);
                // Largest Ritz values of the inverse = smallest of S.
                for (int i = 0; i < rest; ++i) {
                    int col = steps - 1 - i;
                    values[from_null + i] = 1.0 / es.eigenvalues()[col] - shift;
                    y.col(from_null + i) = lz.basis * es.eigenvectors().col(col);
                    y.col(from_null + i).normalize();
                }

                bool ok = true;
                for (int i = from_null; i < k && ok; ++i) {
                    Vector resid = S * y.col(i) - values[i] * y.col(i);
                    ok = resid.norm() <= 0.5 * opts.residual_tol *
                                             std::max(1.0, std::abs(values[i]) * scale);
                }
                if (ok) break;
                if (attempt >= 3 || m >= n) {
                    throw NumericalError(
                        "Lanczos iteration did not reach the requested residual after " +
                        std::to_string(m) + " steps");
                }
                m = std::min(n, 2 * m);
            }
        }
    }

    // Back to pencil coordinates; M-orthonormal by construction.
    EigenPairs out;
    out.values = values;
    out.vectors = dinv.asDiagonal() * y;

    const double mass_max = M_diag.maxCoeff();
    for (int i = 0; i < k; ++i) {
        // The pencil is positive semidefinite; snap roundoff-negative values.
        if (std::abs(out.values[i]) < 1e-12 * scale) out.values[i] = 0.0;
        // Deterministic sign: largest-magnitude component positive.
        int arg = 0;
        out.vectors.col(i).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, i) < 0.0) out.vectors.col(i) = -out.vectors.col(i);

        Vector resid = L * out.vectors.col(i) -
                       out.values[i] * M_diag.cwiseProduct(out.vectors.col(i));
        double bound = opts.residual_tol * out.vectors.col(i).norm() *
                       std::max(1.0, out.values[i] * mass_max);
        if (resid.norm() > bound) {
            throw NumericalError("eigenpair " + std::to_string(i) +
                                 " failed the pencil residual check");
        }
    }
    return out;
}

}  // namespace dhsim
