#pragma once

#include <Eigen/Dense>

#include <vector>

namespace flis {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace numerics {

bool all_finite(const Eigen::Ref<const Mat>& m);

/// Batch orthogonal matching pursuit over the columns of Y.
///
/// Atoms are chosen greedily by largest |correlation| with the current
/// residual and the coefficients are refit by least squares after every
/// selection. Correlations within 1e-12 of each other resolve to the lowest
/// atom index. The Gram matrix D^T D is formed once and each column is coded
/// with an incremental Cholesky factorization, so columns may be processed in
/// parallel without affecting the result.
///
/// D must have unit-norm columns. Returns a K x n code matrix with at most L
/// nonzeros per column.
Mat omp_batch(const Mat& D, const Mat& Y, int L);

/// Same as omp_batch but with the Gram matrix supplied by the caller.
Mat omp_batch_gram(const Mat& gram, const Mat& DtY, int L);

struct LassoOptions {
    double tol = 1e-8;        // stop when a full sweep moves no coordinate by more than this
    int max_sweeps = 10000;
    bool nonneg = true;
};

/// Solver for min ||m - D a||^2 + lambda ||a||_1, optionally with a >= 0. Uses an
/// exact active-set method (the signed problem is split into two nonnegative
/// halves) and falls back to coordinate descent when a support system is singular.
/// The Gram matrix of the dictionary is computed once, so one solver serves many signals.
class LassoSolver {
public:
    LassoSolver(const Mat& D, double lambda, LassoOptions opts = {});

    Vec solve(const Eigen::Ref<const Vec>& m) const;
    // Takes D^T m instead of m; this is what the sweeps actually consume.
    Vec solve_correlations(const Eigen::Ref<const Vec>& dtm) const;
    Mat solve_batch(const Mat& Y) const;

    const Mat& dictionary() const { return dict_; }
    const Mat& gram() const { return gram_; }
    double lambda() const { return lambda_; }

private:
    Mat dict_;
    Mat gram_;
    Mat split_gram_; // [G -G; -G G] for the signed problem
    double lambda_;
    LassoOptions opts_;
};

/// argmin_{a >= 0} ||m - D a||^2 + lambda ||a||_1
Vec nonneg_lasso(const Mat& D, const Vec& m, double lambda);

double lasso_objective(const Mat& D, const Vec& m, const Vec& alpha, double lambda);

/// W = Hbar Xbar^T (Xbar Xbar^T + lambda1 I)^-1
Mat ridge_classifier(const Mat& Xbar, const Mat& Hbar, double lambda1);

struct EigExtremes {
    double min = 0.0;
    double max = 0.0;
};

/// Smallest and largest eigenvalue of a symmetric matrix.
EigExtremes eig_extremes(const Mat& S);

struct DictUpdateOptions {
    int max_sweeps = 200;
    double tol = 1e-12;  // relative change of the surrogate between sweeps
};

struct DictUpdateResult {
    Mat D;
    // Surrogate -2 tr(E D^T) + tr(D F D^T): entry 0 at D0, then one entry per sweep.
    std::vector<double> objective;
};

/// Block coordinate descent on -2 tr(E D^T) + tr(D F D^T) subject to ||d_j|| <= 1.
/// Columns whose F_jj < 1e-10 are left untouched. Throws NotPsd if
/// lambda_min(F) < -1e-8.
DictUpdateResult dict_update(const Mat& E, const Mat& F, const Mat& D0, const DictUpdateOptions& opts = {});

double trace_objective(const Mat& E, const Mat& F, const Mat& D);

/// Rescale every column to unit norm. Returns the indices of columns whose
/// norm was below `eps` (left untouched).
std::vector<Eigen::Index> normalize_columns(Mat& D, double eps = 1e-10);

} // namespace numerics
} // namespace flis
