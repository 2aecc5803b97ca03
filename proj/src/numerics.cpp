#include "flis/numerics.hpp"

#include "flis/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace flis::numerics {

namespace {

constexpr double kTieTol = 1e-12;

void require_finite(const Eigen::Ref<const Mat>& m, const char* what) {
    if (!all_finite(m)) {
        throw InvalidArgument(std::string(what) + ": non-finite input");
    }
}

} // namespace

bool all_finite(const Eigen::Ref<const Mat>& m) {
    return m.size() == 0 || m.allFinite();
}

Mat omp_batch(const Mat& D, const Mat& Y, int L) {
    if (D.rows() != Y.rows()) {
        throw InvalidArgument("omp_batch: dictionary and signal dimensions differ");
    }
    require_finite(D, "omp_batch");
    require_finite(Y, "omp_batch");
    const Mat gram = D.transpose() * D;
    const Mat dty = D.transpose() * Y;
    return omp_batch_gram(gram, dty, L);
}

Mat omp_batch_gram(const Mat& gram, const Mat& DtY, int L) {
    const Eigen::Index K = gram.rows();
    if (L < 1) {
        throw InvalidArgument("omp_batch: sparsity L must be >= 1");
    }
    if (L > K) {
        throw InvalidArgument("omp_batch: sparsity L=" + std::to_string(L) + " exceeds dictionary size " +
                              std::to_string(K));
    }
    if (DtY.rows() != K) {
        throw InvalidArgument("omp_batch: correlation matrix has wrong row count");
    }
    const Eigen::Index n = DtY.cols();
    Mat X = Mat::Zero(K, n);

#pragma omp parallel
    {
        Mat chol = Mat::Zero(L, L);
        Vec alpha(K);
        Vec coef;
        std::vector<Eigen::Index> support;
        std::vector<char> chosen(static_cast<size_t>(K));
        support.reserve(static_cast<size_t>(L));

#pragma omp for schedule(static)
        for (Eigen::Index col = 0; col < n; ++col) {
            alpha = DtY.col(col);
            support.clear();
            std::fill(chosen.begin(), chosen.end(), 0);
            coef.resize(0);

            for (int k = 0; k < L; ++k) {
                Eigen::Index pick = -1;
                double best = -1.0;
                for (Eigen::Index j = 0; j < K; ++j) {
                    if (chosen[static_cast<size_t>(j)]) continue;
                    const double v = std::abs(alpha[j]);
                    if (v > best + kTieTol) {
                        best = v;
                        pick = j;
                    }
                }
                if (pick < 0 || best < kTieTol) break;

                if (k == 0) {
                    chol(0, 0) = std::sqrt(gram(pick, pick));
                } else {
                    Vec g(k);
                    for (int t = 0; t < k; ++t) g[t] = gram(support[static_cast<size_t>(t)], pick);
                    Vec w = chol.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(g);
                    const double diag = gram(pick, pick) - w.squaredNorm();
                    // Atom lies in the span of the support already chosen.
                    if (diag <= 1e-12) break;
                    chol.row(k).head(k) = w.transpose();
                    chol(k, k) = std::sqrt(diag);
                }
                support.push_back(pick);
                chosen[static_cast<size_t>(pick)] = 1;

                const int s = k + 1;
                Vec rhs(s);
                for (int t = 0; t < s; ++t) rhs[t] = DtY(support[static_cast<size_t>(t)], col);
                const auto low = chol.topLeftCorner(s, s).triangularView<Eigen::Lower>();
                coef = low.solve(rhs);
                coef = low.transpose().solve(coef);

                alpha = DtY.col(col);
                for (int t = 0; t < s; ++t) alpha.noalias() -= coef[t] * gram.col(support[static_cast<size_t>(t)]);
            }
            for (size_t t = 0; t < support.size(); ++t) X(support[t], col) = coef[static_cast<Eigen::Index>(t)];
        }
    }
    return X;
}

LassoSolver::LassoSolver(const Mat& D, double lambda, LassoOptions opts)
    : dict_(D), lambda_(lambda), opts_(opts) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("lasso: lambda must be finite and >= 0");
    }
    require_finite(D, "lasso");
    gram_ = D.transpose() * D;
    if (!opts_.nonneg) {
        split_gram_.resize(2 * gram_.rows(), 2 * gram_.cols());
        split_gram_ << gram_, -gram_, -gram_, gram_;
    }
}

Vec LassoSolver::solve(const Eigen::Ref<const Vec>& m) const {
    if (m.size() != dict_.rows()) {
        throw InvalidArgument("lasso: signal dimension does not match dictionary");
    }
    if (!m.allFinite()) {
        throw InvalidArgument("lasso: non-finite input");
    }
    return solve_correlations(dict_.transpose() * m);
}

namespace {

// Lawson-Hanson active set on the Gram form of the nonnegative lasso:
// min a^T G a - 2 (b - lambda/2)^T a, a >= 0. Returns false when a
// passive-set system is numerically singular or the iteration cap is hit.
bool nonneg_active_set(const Mat& G, const Vec& b, double lambda, double tol, Vec& alpha) {
    const Eigen::Index K = G.rows();
    const Vec c = b.array() - 0.5 * lambda;
    alpha = Vec::Zero(K);
    std::vector<char> passive(static_cast<size_t>(K), 0), blocked(static_cast<size_t>(K), 0);
    std::vector<Eigen::Index> P;
    Vec w = c;
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    const double wtol = tol * scale;
    const int max_outer = static_cast<int>(3 * K + 10);

    auto solve_passive = [&](Vec& s) {
        const auto n = static_cast<Eigen::Index>(P.size());
        Mat Gp(n, n);
        Vec cp(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            cp[i] = c[P[static_cast<size_t>(i)]];
            for (Eigen::Index j = 0; j < n; ++j) Gp(i, j) = G(P[static_cast<size_t>(i)], P[static_cast<size_t>(j)]);
        }
        const double gscale = std::max(1.0, Gp.diagonal().maxCoeff());
        Eigen::LLT<Mat> llt(Gp);
        auto ill = [&] {
            return llt.info() != Eigen::Success ||
                   std::pow(Mat(llt.matrixL()).diagonal().minCoeff(), 2) < 1e-12 * gscale;
        };
        if (ill()) {
            // Dependent atoms in the support: a tiny ridge turns the flat
            // direction into a long step that the ratio test then clips.
            Gp.diagonal().array() += 1e-10 * gscale;
            llt.compute(Gp);
            if (llt.info() != Eigen::Success) return false;
        }
        s = llt.solve(cp);
        return s.allFinite();
    };

    for (int outer = 0; outer < max_outer; ++outer) {
        Eigen::Index best = -1;
        double wmax = wtol;
        for (Eigen::Index j = 0; j < K; ++j)
            if (!passive[static_cast<size_t>(j)] && !blocked[static_cast<size_t>(j)] && w[j] > wmax && G(j, j) > 0.0) {
                wmax = w[j];
                best = j;
            }
        if (best < 0) return true;
        passive[static_cast<size_t>(best)] = 1;
        P.push_back(best);
        for (int inner = 0; inner <= static_cast<int>(K); ++inner) {
            Vec s;
            if (!solve_passive(s)) return false;
            if (inner == 0 && s[s.size() - 1] <= 0.0) {
                // Rounding made the entering index look profitable; skip it
                // until another index enters.
                P.pop_back();
                passive[static_cast<size_t>(best)] = 0;
                blocked[static_cast<size_t>(best)] = 1;
                break;
            }
            if (inner == 0) std::fill(blocked.begin(), blocked.end(), 0);
            if (s.minCoeff() > 0.0) {
                for (size_t i = 0; i < P.size(); ++i) alpha[P[i]] = s[static_cast<Eigen::Index>(i)];
                break;
            }
            double t = 1.0;
            for (size_t i = 0; i < P.size(); ++i) {
                const double si = s[static_cast<Eigen::Index>(i)];
                if (si <= 0.0) t = std::min(t, alpha[P[i]] / (alpha[P[i]] - si));
            }
            for (size_t i = 0; i < P.size(); ++i)
                alpha[P[i]] += t * (s[static_cast<Eigen::Index>(i)] - alpha[P[i]]);
            std::vector<Eigen::Index> kept;
            for (Eigen::Index j : P) {
                if (alpha[j] <= 1e-14 * scale) {
                    alpha[j] = 0.0;
                    passive[static_cast<size_t>(j)] = 0;
                } else {
                    kept.push_back(j);
                }
            }
            P.swap(kept);
            if (P.empty()) break;
        }
        w = c - G * alpha;
    }
    return false;
}

} // namespace

Vec LassoSolver::solve_correlations(const Eigen::Ref<const Vec>& dtm) const {
    const Eigen::Index K = gram_.rows();
    Vec exact;
    if (opts_.nonneg) {
        if (nonneg_active_set(gram_, dtm, lambda_, 1e-12, exact)) return exact;
    } else {
        // a = u - v with u, v >= 0; an optimum never has u_j and v_j both positive.
        Vec b2(2 * K);
        b2 << dtm, -dtm;
        if (nonneg_active_set(split_gram_, b2, lambda_, 1e-12, exact)) return exact.head(K) - exact.tail(K);
    }
    Vec alpha = Vec::Zero(K);
    // grad_j = d_j^T (m - D alpha)
    Vec grad = dtm;
    const double half_lambda = 0.5 * lambda_;

    std::vector<Eigen::Index> active;
    active.reserve(static_cast<size_t>(K));

    auto update = [&](Eigen::Index j) {
        const double gjj = gram_(j, j);
        if (gjj <= 0.0) return 0.0;
        const double z = alpha[j] + grad[j] / gjj;
        const double thr = half_lambda / gjj;
        double next;
        if (opts_.nonneg) {
            next = std::max(0.0, z - thr);
        } else {
            next = z > thr ? z - thr : (z < -thr ? z + thr : 0.0);
        }
        const double delta = next - alpha[j];
        if (delta != 0.0) {
            grad.noalias() -= delta * gram_.col(j);
            alpha[j] = next;
        }
        return std::abs(delta);
    };

    int sweeps = 0;
    while (sweeps < opts_.max_sweeps) {
        // Full sweep over every coordinate.
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < K; ++j) max_delta = std::max(max_delta, update(j));
        ++sweeps;
        if (max_delta < opts_.tol) break;

        // Cheap sweeps restricted to the current support until it settles.
        active.clear();
        for (Eigen::Index j = 0; j < K; ++j)
            if (alpha[j] != 0.0) active.push_back(j);
        while (sweeps < opts_.max_sweeps) {
            double d = 0.0;
            for (Eigen::Index j : active) d = std::max(d, update(j));
            ++sweeps;
            if (d < opts_.tol) break;
        }
    }
    return alpha;
}

Mat LassoSolver::solve_batch(const Mat& Y) const {
    if (Y.rows() != dict_.rows()) {
        throw InvalidArgument("lasso: signal dimension does not match dictionary");
    }
    require_finite(Y, "lasso");
    const Mat dty = dict_.transpose() * Y;
    Mat out(gram_.rows(), Y.cols());
#pragma omp parallel for schedule(dynamic, 64)
    for (Eigen::Index c = 0; c < Y.cols(); ++c) out.col(c) = solve_correlations(dty.col(c));
    return out;
}

Vec nonneg_lasso(const Mat& D, const Vec& m, double lambda) {
    return LassoSolver(D, lambda).solve(m);
}

double lasso_objective(const Mat& D, const Vec& m, const Vec& alpha, double lambda) {
    return (m - D * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

Mat ridge_classifier(const Mat& Xbar, const Mat& Hbar, double lambda1) {
    if (Xbar.cols() != Hbar.cols()) {
        throw InvalidArgument("ridge_classifier: code and label matrices have different column counts");
    }
    if (!(lambda1 >= 0.0)) {
        throw InvalidArgument("ridge_classifier: lambda1 must be >= 0");
    }
    require_finite(Xbar, "ridge_classifier");
    require_finite(Hbar, "ridge_classifier");
    Mat A = Xbar * Xbar.transpose();
    A.diagonal().array() += lambda1;
    Eigen::LDLT<Mat> ldlt(A);
    const double scale = std::max(1.0, A.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14 ||
        ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
        throw SingularMatrix("ridge_classifier: Xbar Xbar^T + lambda1 I is singular");
    }
    const Mat rhs = Xbar * Hbar.transpose(); // K x C
    return ldlt.solve(rhs).transpose();
}

EigExtremes eig_extremes(const Mat& S) {
    if (S.rows() != S.cols()) {
        throw InvalidArgument("eig_extremes: matrix is not square");
    }
    if (S.size() == 0) return {};
    require_finite(S, "eig_extremes");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InvalidArgument("eig_extremes: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues(); // ascending
    return {ev[0], ev[ev.size() - 1]};
}

double trace_objective(const Mat& E, const Mat& F, const Mat& D) {
    return -2.0 * E.cwiseProduct(D).sum() + (D * F).cwiseProduct(D).sum();
}

DictUpdateResult dict_update(const Mat& E, const Mat& F, const Mat& D0, const DictUpdateOptions& opts) {
    const Eigen::Index K = D0.cols();
    if (E.rows() != D0.rows() || E.cols() != K || F.rows() != K || F.cols() != K) {
        throw InvalidArgument("dict_update: inconsistent dimensions");
    }
    require_finite(E, "dict_update");
    require_finite(F, "dict_update");
    require_finite(D0, "dict_update");
    const EigExtremes ext = eig_extremes(F);
    if (ext.min < -1e-8) {
        throw NotPsd("dict_update: F is not positive semidefinite (lambda_min=" + std::to_string(ext.min) + ")");
    }

    DictUpdateResult res{D0, {}};
    Mat& D = res.D;
    double prev = trace_objective(E, F, D);
    res.objective.push_back(prev);
    Vec u(D.rows());
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < K; ++j) {
            const double fjj = F(j, j);
            if (fjj < 1e-10) continue;
            u.noalias() = E.col(j) - D * F.col(j);
            u /= fjj;
            u += D.col(j);
            const double nrm = u.norm();
            D.col(j) = u / std::max(1.0, nrm);
        }
        const double obj = trace_objective(E, F, D);
        res.objective.push_back(obj);
        const bool done = std::abs(prev - obj) <= opts.tol * std::max(1.0, std::abs(prev));
        prev = obj;
        if (done) break;
    }
    return res;
}

std::vector<Eigen::Index> normalize_columns(Mat& D, double eps) {
    std::vector<Eigen::Index> degenerate;
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
        const double n = D.col(j).norm();
        if (n < eps) {
            degenerate.push_back(j);
        } else {
            D.col(j) /= n;
        }
    }
    return degenerate;
}

} // namespace flis::numerics
