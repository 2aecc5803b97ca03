#include "flis/flis_train.hpp"

#include "flis/error.hpp"
#include "flis/rng.hpp"
#include "flis_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace flis {

using namespace numerics;

namespace detail {

void renormalize_atoms(Mat& D, const Mat& source, Rng& rng) {
    const auto degenerate = normalize_columns(D);
    for (Eigen::Index j : degenerate) {
        bool placed = false;
        for (Eigen::Index attempt = 0; attempt < source.cols() && !placed; ++attempt) {
            const auto c = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(source.cols())));
            const double n = source.col(c).norm();
            if (n > 1e-10) {
                D.col(j) = source.col(c) / n;
                placed = true;
            }
        }
        if (!placed) {
            for (Eigen::Index i = 0; i < D.rows(); ++i) D(i, j) = rng.normal();
            D.col(j).normalize();
        }
    }
}

Mat hcat(const Mat& a, const Mat& b) {
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Mat vcat(const Mat& a, const Mat& b) {
    Mat out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

Mat gram_of(const Mat& X) {
    Mat G = X * X.transpose();
    return 0.5 * (G + G.transpose());
}

bool nonincreasing(const std::vector<double>& trace) {
    for (size_t s = 1; s < trace.size(); ++s)
        if (trace[s] > trace[s - 1] + 1e-9 * std::max(1.0, std::abs(trace[s - 1]))) return false;
    return true;
}

void split_stacked(const Mat& Dnew, Eigen::Index d, double beta, Mat& D, Mat& W) {
    D = Dnew.topRows(d);
    if (beta > 0) W = Dnew.bottomRows(Dnew.rows() - d) / std::sqrt(beta);
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
        const double n = D.col(j).norm();
        if (n > 1e-10) {
            D.col(j) /= n;
            if (beta > 0) W.col(j) /= n;
        }
    }
}

} // namespace detail

Mat unit_norm_columns(const Mat& Y) {
    Mat out = Y;
    normalize_columns(out);
    return out;
}

Mat one_hot(int cls, Eigen::Index count, int classes) {
    Mat H = Mat::Zero(classes, count);
    if (count > 0) H.row(cls).setOnes();
    return H;
}

OdlResult odl_init(const Mat& Y, int K, double lambda, uint64_t seed, int epochs, int batch) {
    const Eigen::Index N = Y.cols();
    if (K < 1 || K > N) {
        throw InvalidArgument("odl_init: need 1 <= K <= N (K=" + std::to_string(K) + ", N=" + std::to_string(N) + ")");
    }
    if (!(lambda > 0.0)) throw InvalidArgument("odl_init: lambda must be > 0");
    if (epochs < 0 || batch < 1) throw InvalidArgument("odl_init: invalid epoch/batch settings");
    if (!all_finite(Y)) throw InvalidArgument("odl_init: non-finite input");

    Rng rng(seed);
    LassoOptions signed_opts;
    signed_opts.nonneg = false;
    auto code_all = [&](const Mat& D) { return LassoSolver(D, lambda, signed_opts).solve_batch(Y); };
    auto cost = [&](const Mat& D, const Mat& X) {
        return (Y - D * X).squaredNorm() + lambda * X.cwiseAbs().sum();
    };

    std::vector<Eigen::Index> idx(static_cast<size_t>(N));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    rng.partial_shuffle(idx, static_cast<size_t>(K));
    Mat D(Y.rows(), K);
    for (int j = 0; j < K; ++j) D.col(j) = Y.col(idx[static_cast<size_t>(j)]);
    detail::renormalize_atoms(D, Y, rng);

    const Mat D_init = D;
    const Mat X_init = code_all(D_init);
    const double init_obj = cost(D_init, X_init);

    DictUpdateOptions upd_opts;
    upd_opts.max_sweeps = 3;
    std::vector<Eigen::Index> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        Mat A = Mat::Zero(K, K);
        Mat B = Mat::Zero(Y.rows(), K);
        // Worst-coded columns of the epoch, used to replace atoms nobody used.
        std::vector<std::pair<double, Eigen::Index>> worst;
        for (Eigen::Index start = 0; start < N; start += batch) {
            const Eigen::Index n = std::min<Eigen::Index>(batch, N - start);
            Mat Yb(Y.rows(), n);
            for (Eigen::Index c = 0; c < n; ++c) Yb.col(c) = Y.col(order[static_cast<size_t>(start + c)]);
            const Mat Xb = LassoSolver(D, lambda, signed_opts).solve_batch(Yb);
            const Vec res = (Yb - D * Xb).colwise().squaredNorm().transpose();
            for (Eigen::Index c = 0; c < n; ++c) worst.emplace_back(res[c], order[static_cast<size_t>(start + c)]);
            std::stable_sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
            if (worst.size() > static_cast<size_t>(K)) worst.resize(static_cast<size_t>(K));
            A += detail::gram_of(Xb);
            B += Yb * Xb.transpose();
            D = dict_update(B, A, D, upd_opts).D;
        }
        size_t next = 0;
        for (Eigen::Index j = 0; j < K; ++j) {
            if (A(j, j) >= 1e-10) continue;
            while (next < worst.size()) {
                const Vec cand = Y.col(worst[next++].second);
                const double n = cand.norm();
                if (n <= 1e-10) continue;
                if ((D.transpose() * cand).cwiseAbs().maxCoeff() > 0.99 * n) continue;
                D.col(j) = cand / n;
                break;
            }
        }
    }
    detail::renormalize_atoms(D, Y, rng);
    Mat X0 = code_all(D);
    const double obj = cost(D, X0);
    if (obj > init_obj) return {D_init, X_init, init_obj, init_obj};
    return {std::move(D), std::move(X0), obj, init_obj};
}

int estimate_sparsity(const Mat& X0) {
    const Eigen::Index K = X0.rows();
    if (X0.cols() == 0 || K == 0) return 1;
    const double nnz = static_cast<double>((X0.array().abs() > 1e-10).count());
    const long L = std::lround(nnz / static_cast<double>(X0.cols()));
    return static_cast<int>(std::clamp<long>(L, 1, K));
}

double rho_max(const Mat& X, const Mat& Xhat) {
    if (Xhat.cols() == 0 || X.cols() == 0) return std::numeric_limits<double>::infinity();
    const double lmax = eig_extremes(detail::gram_of(Xhat)).max;
    if (lmax <= 0.0) return std::numeric_limits<double>::infinity();
    const double lmin = std::max(0.0, eig_extremes(detail::gram_of(X)).min);
    return (static_cast<double>(Xhat.cols()) / static_cast<double>(X.cols())) * lmin / lmax;
}

double flis_objective(const Mat& Ynew, const Mat& Yhat_new, const Mat& Dnew, const Mat& X, const Mat& Xhat,
                      double rho) {
    double obj = (Ynew - Dnew * X).squaredNorm() / static_cast<double>(Ynew.cols());
    if (rho > 0.0 && Yhat_new.cols() > 0) {
        obj -= rho / static_cast<double>(Yhat_new.cols()) * (Yhat_new - Dnew * Xhat).squaredNorm();
    }
    return obj;
}

namespace {

void validate(const ClassTrainingSet& ts, const FlisHyperParams& hp) {
    const Eigen::Index d = ts.Y.rows(), N = ts.Y.cols(), Nh = ts.Yhat.cols();
    if (hp.K < 1) throw InvalidArgument("train_class: K must be >= 1");
    if (N < hp.K) {
        throw InvalidArgument("train_class: N=" + std::to_string(N) + " is smaller than K=" + std::to_string(hp.K));
    }
    if (Nh > 0 && ts.Yhat.rows() != d) throw InvalidArgument("train_class: Y and Yhat dimensions differ");
    if (ts.H.cols() != N || ts.Htilde.cols() != Nh) throw InvalidArgument("train_class: label column counts differ");
    if (Nh > 0 && ts.H.rows() != ts.Htilde.rows()) throw InvalidArgument("train_class: label row counts differ");
    if (hp.beta < 0 || hp.rho < 0 || hp.lambda1 < 0) throw InvalidArgument("train_class: negative weight");
    if (hp.max_iters < 0) throw InvalidArgument("train_class: max_iters must be >= 0");
    if (!all_finite(ts.Y) || !all_finite(ts.Yhat)) throw InvalidArgument("train_class: non-finite input");
}

} // namespace

ClassModel train_class(const ClassTrainingSet& ts, const FlisHyperParams& hp, uint64_t seed, TrainReport* report) {
    validate(ts, hp);
    const Eigen::Index d = ts.Y.rows();
    const Eigen::Index N = ts.Y.cols();
    const Eigen::Index Nh = ts.Yhat.cols();
    const double sb = std::sqrt(hp.beta);
    const bool stacked = hp.beta > 0.0;
    Rng rng(derive_seed(seed, {2}));

    const OdlResult odl = odl_init(unit_norm_columns(ts.Y), hp.K, hp.lambda, derive_seed(seed, {1}), hp.odl_epochs,
                                   hp.odl_batch);
    const int L = estimate_sparsity(odl.X0);

    const Mat Ybar = detail::hcat(ts.Y, Nh > 0 ? ts.Yhat : Mat(d, 0));
    const Mat Hbar = detail::hcat(ts.H, Nh > 0 ? ts.Htilde : Mat(ts.H.rows(), 0));
    const Mat Xbar = omp_batch(odl.D0, Ybar, L);
    const Mat W0 = ridge_classifier(Xbar, Hbar, hp.lambda1);

    const Mat Ynew = stacked ? detail::vcat(ts.Y, sb * ts.H) : ts.Y;
    const Mat Yhnew = Nh == 0 ? Mat(Ynew.rows(), 0) : (stacked ? detail::vcat(ts.Yhat, sb * ts.Htilde) : ts.Yhat);
    Mat Dnew = stacked ? detail::vcat(odl.D0, sb * W0) : odl.D0;
    detail::renormalize_atoms(Dnew, Ynew, rng);

    Mat X, Xh;
    auto recode = [&]() {
        const Mat gram = Dnew.transpose() * Dnew;
        X = omp_batch_gram(gram, Dnew.transpose() * Ynew, L);
        Xh = Nh > 0 ? omp_batch_gram(gram, Dnew.transpose() * Yhnew, L) : Mat(hp.K, 0);
    };
    auto effective_rho = [&](double* rmax_out) {
        const double rm = Nh > 0 ? rho_max(X, Xh) : std::numeric_limits<double>::infinity();
        if (rmax_out) *rmax_out = rm;
        if (Nh == 0 || hp.rho == 0.0) return 0.0;
        return std::min(hp.rho, 0.9 * rm);
    };
    recode();

    TrainReport rep;
    rep.L = L;
    rep.rho_objective = effective_rho(nullptr);
    rep.initial_objective = flis_objective(Ynew, Yhnew, Dnew, X, Xh, rep.rho_objective);
    Mat best = Dnew;
    double best_obj = rep.initial_objective;

    const double invN = 1.0 / static_cast<double>(N);
    for (int it = 1; it <= hp.max_iters; ++it) {
        IterationRecord rec;
        rec.rho_eff = effective_rho(&rec.rho_max);
        Mat E = Ynew * X.transpose() * invN;
        Mat F = detail::gram_of(X) * invN;
        if (rec.rho_eff > 0.0) {
            const double w = rec.rho_eff / static_cast<double>(Nh);
            E -= w * (Yhnew * Xh.transpose());
            F -= w * detail::gram_of(Xh);
        }
        rec.lambda_min_F = eig_extremes(F).min;
        DictUpdateResult upd = dict_update(E, F, Dnew);
        rec.surrogate_monotone = detail::nonincreasing(upd.objective);
        detail::renormalize_atoms(upd.D, Ynew, rng);
        rec.relative_change = (upd.D - Dnew).norm() / std::max(1e-300, Dnew.norm());
        Dnew = std::move(upd.D);
        recode();
        rec.objective = flis_objective(Ynew, Yhnew, Dnew, X, Xh, rep.rho_objective);
        if (rec.objective < best_obj) {
            best_obj = rec.objective;
            best = Dnew;
            rep.best_iteration = it;
        }
        rep.iterations.push_back(rec);
        if (rec.relative_change < hp.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.final_objective = best_obj;

    ClassModel model;
    model.L = L;
    detail::split_stacked(best, d, hp.beta, model.D, model.W);
    if (!stacked) model.W = ridge_classifier(omp_batch(model.D, Ybar, L), Hbar, hp.lambda1);
    if (report) *report = std::move(rep);
    return model;
}

PartitionModel assemble_partition_model(const ClassModel& brain, const ClassModel& csf, const ClassModel& subdural) {
    const Eigen::Index d = brain.D.rows(), K = brain.D.cols(), C = brain.W.rows();
    for (const ClassModel* m : {&brain, &csf, &subdural}) {
        if (m->D.rows() != d || m->D.cols() != K || m->W.rows() != C || m->W.cols() != K) {
            throw InvalidArgument("assemble_partition_model: class models have mismatched dimensions");
        }
    }
    PartitionModel pm;
    pm.D.resize(d, 3 * K);
    pm.W.resize(C, 3 * K);
    pm.D << brain.D, csf.D, subdural.D;
    pm.W << brain.W, csf.W, subdural.W;
    return pm;
}

} // namespace flis
