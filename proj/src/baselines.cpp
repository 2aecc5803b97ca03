#include "flis/baselines.hpp"

#include "flis/error.hpp"
#include "flis/rng.hpp"
#include "flis_internal.hpp"

#include <cmath>
#include <string>

namespace flis::baselines {

using namespace numerics;

Mat src_indicator(const SrcDictionary& dict) {
    if (static_cast<Eigen::Index>(dict.labels.size()) != dict.atoms.cols()) {
        throw InvalidArgument("src: one label per atom required");
    }
    Mat W = Mat::Zero(3, dict.atoms.cols());
    for (size_t i = 0; i < dict.labels.size(); ++i) {
        const int c = dict.labels[i];
        if (c < 0 || c > 2) throw InvalidArgument("src: atom label out of range");
        W(c, static_cast<Eigen::Index>(i)) = 1.0;
    }
    return W;
}

SrcResult src_decide(const Vec& alpha, const Mat& indicator) {
    const double total = alpha.sum();
    if (!(total > 1e-12)) throw UndecidablePixel("src: sparse code is zero");
    const Vec mass = indicator * alpha;
    SrcResult r;
    for (int c = 0; c < 3; ++c) r.probs[static_cast<size_t>(c)] = mass[c] / total;
    for (int c = 1; c < 3; ++c)
        if (r.probs[static_cast<size_t>(c)] > r.probs[static_cast<size_t>(r.label)]) r.label = c;
    return r;
}

SrcResult src_classify(const Vec& m, const SrcDictionary& dict, double lambda) {
    if (dict.atoms.cols() == 0) throw InvalidArgument("src: empty dictionary");
    if (!(lambda > 0.0)) throw InvalidArgument("src: lambda must be > 0");
    return src_decide(nonneg_lasso(dict.atoms, m, lambda), src_indicator(dict));
}

PartitionModel train_ddls(const ClassTrainingSet& merged, const FlisHyperParams& hp, uint64_t seed,
                          TrainReport* report) {
    const Mat& Y = merged.Y;
    const Mat& H = merged.H;
    const Eigen::Index d = Y.rows(), N = Y.cols();
    const int K = 3 * hp.K;
    if (hp.K < 1) throw InvalidArgument("train_ddls: K must be >= 1");
    if (merged.Yhat.cols() != 0) throw InvalidArgument("train_ddls: merged set takes no complementary samples");
    if (N < K) {
        throw InvalidArgument("train_ddls: N=" + std::to_string(N) + " is smaller than 3K=" + std::to_string(K));
    }
    if (H.cols() != N) throw InvalidArgument("train_ddls: label column count differs");
    if (hp.beta < 0 || hp.lambda1 < 0 || hp.max_iters < 0) throw InvalidArgument("train_ddls: invalid weights");
    if (!all_finite(Y)) throw InvalidArgument("train_ddls: non-finite input");

    Rng rng(derive_seed(seed, {2}));
    const OdlResult odl =
        odl_init(unit_norm_columns(Y), K, hp.lambda, derive_seed(seed, {1}), hp.odl_epochs, hp.odl_batch);
    const int L = estimate_sparsity(odl.X0);
    const Mat W0 = ridge_classifier(omp_batch(odl.D0, Y, L), H, hp.lambda1);

    // Stacked problem: A = [Y; sqrt(beta) H], B = [D; sqrt(beta) W].
    const bool stacked = hp.beta > 0.0;
    const double sb = std::sqrt(hp.beta);
    const Mat A = stacked ? detail::vcat(Y, sb * H) : Y;
    Mat B = stacked ? detail::vcat(odl.D0, sb * W0) : odl.D0;
    detail::renormalize_atoms(B, A, rng);

    auto code = [&](const Mat& dict) {
        const Mat gram = dict.transpose() * dict;
        return omp_batch_gram(gram, dict.transpose() * A, L);
    };
    const double invN = 1.0 / static_cast<double>(N);
    auto cost = [&](const Mat& dict, const Mat& X) { return (A - dict * X).squaredNorm() / static_cast<double>(N); };

    TrainReport rep;
    rep.L = L;
    Mat X = code(B);
    rep.initial_objective = cost(B, X);
    double best_cost = rep.initial_objective;
    Mat best = B;
    for (int it = 1; it <= hp.max_iters; ++it) {
        IterationRecord rec;
        const Mat E = A * X.transpose() * invN;
        const Mat F = detail::gram_of(X) * invN;
        rec.lambda_min_F = eig_extremes(F).min;
        DictUpdateResult upd = dict_update(E, F, B);
        rec.surrogate_monotone = detail::nonincreasing(upd.objective);
        detail::renormalize_atoms(upd.D, A, rng);
        rec.relative_change = (upd.D - B).norm() / std::max(1e-300, B.norm());
        B = std::move(upd.D);
        X = code(B);
        rec.objective = cost(B, X);
        if (rec.objective < best_cost) {
            best_cost = rec.objective;
            best = B;
            rep.best_iteration = it;
        }
        rep.iterations.push_back(rec);
        if (rec.relative_change < hp.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.final_objective = best_cost;

    PartitionModel pm;
    detail::split_stacked(best, d, hp.beta, pm.D, pm.W);
    if (!stacked) pm.W = ridge_classifier(omp_batch(pm.D, Y, L), H, hp.lambda1);
    if (report) *report = std::move(rep);
    return pm;
}

IntensityClassifier IntensityClassifier::fit(const std::array<std::vector<double>, 3>& samples) {
    IntensityClassifier ic;
    for (size_t c = 0; c < 3; ++c) {
        const auto& s = samples[c];
        if (s.size() < 2) throw DegenerateClass(-1, static_cast<int>(c), "intensity classifier: class has < 2 samples");
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size() - 1);
        ic.mean_[c] = mean;
        ic.sd_[c] = std::max(std::sqrt(var), 1e-6);
    }
    return ic;
}

int IntensityClassifier::classify(double v) const {
    int best = 0;
    double best_ll = -INFINITY;
    for (int c = 0; c < 3; ++c) {
        const double z = (v - mean_[static_cast<size_t>(c)]) / sd_[static_cast<size_t>(c)];
        const double ll = -0.5 * z * z - std::log(sd_[static_cast<size_t>(c)]);
        if (ll > best_ll) {
            best_ll = ll;
            best = c;
        }
    }
    return best;
}

} // namespace flis::baselines
