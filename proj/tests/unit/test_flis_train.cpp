#include "doctest.h"

#include "flis/error.hpp"
#include "flis/flis_train.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace flis;

namespace {

Mat orthonormal(std::mt19937_64& rng, Eigen::Index d, Eigen::Index k) {
    const Mat Q = Eigen::HouseholderQR<Mat>(oracle::random_normal(rng, d, d)).householderQ();
    return Q.leftCols(k);
}

// Samples from span(U): U * coefficients + small isotropic noise.
Mat subspace_samples(std::mt19937_64& rng, const Mat& U, Eigen::Index n, double noise) {
    return U * oracle::random_normal(rng, U.cols(), n) + noise * oracle::random_normal(rng, U.rows(), n);
}

FlisHyperParams small_params(int K) {
    FlisHyperParams hp;
    hp.K = K;
    hp.max_iters = 8;
    hp.odl_epochs = 5;
    hp.odl_batch = 64;
    return hp;
}

ClassTrainingSet two_subspace_set(std::mt19937_64& rng, const Mat& U1, const Mat& U2, Eigen::Index n) {
    ClassTrainingSet ts;
    ts.Y = subspace_samples(rng, U1, n, 0.01);
    ts.Yhat = subspace_samples(rng, U2, n, 0.01);
    ts.H = one_hot(0, n, 2);
    ts.Htilde = one_hot(0, n, 2);
    return ts;
}

} // namespace

TEST_CASE("odl_init: recovers orthonormal generators") {
    std::mt19937_64 rng(3);
    const Mat G = orthonormal(rng, 16, 6);
    Mat Y(16, 120);
    for (Eigen::Index c = 0; c < Y.cols(); ++c) Y.col(c) = G.col(c % 6);
    const OdlResult r = odl_init(Y, 6, 1e-3, 42, 10, 32);
    CHECK((Y - r.D0 * r.X0).squaredNorm() / Y.cols() < 1e-3);
    CHECK(r.objective <= r.initial_objective);
    for (Eigen::Index j = 0; j < r.D0.cols(); ++j) CHECK(r.D0.col(j).norm() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("odl_init: K = N on orthonormal data reconstructs exactly as lambda shrinks") {
    std::mt19937_64 rng(4);
    const Mat Y = orthonormal(rng, 10, 7);
    const OdlResult r = odl_init(Y, 7, 1e-8, 1);
    CHECK((Y - r.D0 * r.X0).squaredNorm() < 1e-10);
}

TEST_CASE("odl_init: deterministic and validates arguments") {
    std::mt19937_64 rng(5);
    const Mat Y = oracle::unit_columns(oracle::random_normal(rng, 12, 90));
    const OdlResult a = odl_init(Y, 10, 0.1, 9, 3, 32);
    const OdlResult b = odl_init(Y, 10, 0.1, 9, 3, 32);
    CHECK(a.D0 == b.D0);
    CHECK(a.X0 == b.X0);
    CHECK_THROWS_AS(odl_init(Y, 91, 0.1, 9), InvalidArgument);
    CHECK_THROWS_AS(odl_init(Y, 10, 0.0, 9), InvalidArgument);
}

TEST_CASE("estimate_sparsity: rounded mean support size") {
    Mat X = Mat::Zero(6, 3);
    X(0, 0) = 1;
    X(0, 1) = 1;
    X(3, 1) = -2;
    X(1, 2) = 1;
    X(2, 2) = 1;
    X(5, 2) = 1e-11; // below the nonzero threshold
    X(4, 2) = 0.5;
    CHECK(estimate_sparsity(X) == 2);

    Mat five = Mat::Zero(8, 4);
    five.topRows(5).setOnes();
    CHECK(estimate_sparsity(five) == 5);
    CHECK(estimate_sparsity(Mat::Zero(4, 4)) == 1);
}

TEST_CASE("rho_max: closed-form cases") {
    CHECK(rho_max(Mat::Identity(4, 4), Mat::Identity(4, 4)) == doctest::Approx(1.0));
    Mat X = Mat::Identity(4, 4);
    X(3, 3) = 0.0;
    CHECK(rho_max(X, Mat::Identity(4, 4)) == doctest::Approx(0.0));
    CHECK(std::isinf(rho_max(Mat::Identity(3, 3), Mat::Zero(3, 5))));
    CHECK(std::isinf(rho_max(Mat::Identity(3, 3), Mat(3, 0))));
}

TEST_CASE("rho_max: F stays definite below the bound") {
    std::mt19937_64 rng(6);
    for (int inst = 0; inst < 20; ++inst) {
        const Mat X = oracle::random_normal(rng, 4, 30);
        const Mat Xh = oracle::random_normal(rng, 4, 50);
        const double rm = rho_max(X, Xh);
        REQUIRE(rm > 0.0);
        Mat F = X * X.transpose() / 30.0 - 0.99 * rm / 50.0 * Xh * Xh.transpose();
        F = 0.5 * (F + F.transpose());
        const auto ev = oracle::symmetric_eigenvalues_by_roots(F);
        CHECK(*std::min_element(ev.begin(), ev.end()) > 0.0);
    }
}

TEST_CASE("rho_max: bound is tight when the extreme eigenvectors coincide") {
    // XX^T and XhXh^T share an eigenbasis and the weakest direction of X is
    // the strongest of Xh, so F turns indefinite right past the bound.
    std::mt19937_64 rng(16);
    for (int inst = 0; inst < 20; ++inst) {
        const Mat Q = orthonormal(rng, 4, 4);
        const Mat P = orthonormal(rng, 30, 30).topRows(4);
        const Mat Ph = orthonormal(rng, 50, 50).topRows(4);
        Vec a(4), b(4);
        a << 0.5, 1.0, 2.0, 3.0;
        b << 2.5, 1.5, 1.0, 0.5;
        const Mat X = Q * a.cwiseSqrt().asDiagonal() * P;
        const Mat Xh = Q * b.cwiseSqrt().asDiagonal() * Ph;
        const double rm = rho_max(X, Xh);
        CHECK(rm == doctest::Approx(50.0 / 30.0 * 0.5 / 2.5));
        auto F = [&](double rho) {
            Mat f = X * X.transpose() / 30.0 - rho / 50.0 * Xh * Xh.transpose();
            return Mat(0.5 * (f + f.transpose()));
        };
        const auto below = oracle::symmetric_eigenvalues_by_roots(F(0.99 * rm));
        const auto above = oracle::symmetric_eigenvalues_by_roots(F(1.01 * rm));
        CHECK(*std::min_element(below.begin(), below.end()) > 0.0);
        CHECK(*std::min_element(above.begin(), above.end()) < 0.0);
    }
}

TEST_CASE("flis_objective: complement term enters with negative weight") {
    std::mt19937_64 rng(7);
    const Mat D = oracle::unit_columns(oracle::random_normal(rng, 5, 4));
    const Mat Y = oracle::random_normal(rng, 5, 10);
    const Mat Yh = oracle::random_normal(rng, 5, 20);
    const Mat X = oracle::random_normal(rng, 4, 10);
    const Mat Xh = oracle::random_normal(rng, 4, 20);
    const double in = (Y - D * X).squaredNorm() / 10.0;
    const double out = (Yh - D * Xh).squaredNorm() / 20.0;
    CHECK(flis_objective(Y, Yh, D, X, Xh, 0.0) == doctest::Approx(in));
    CHECK(flis_objective(Y, Yh, D, X, Xh, 0.3) == doctest::Approx(in - 0.3 * out));

    // Scaling signals and codes together scales both terms by c^2.
    const double c = 3.5;
    CHECK(flis_objective(c * Y, c * Yh, D, c * X, c * Xh, 0.3) ==
          doctest::Approx(c * c * flis_objective(Y, Yh, D, X, Xh, 0.3)));
}

TEST_CASE("train_class: in-class residual well below out-of-class residual") {
    std::mt19937_64 rng(8);
    const Mat Q = orthonormal(rng, 20, 6);
    const Mat U1 = Q.leftCols(3), U2 = Q.rightCols(3);
    const ClassTrainingSet ts = two_subspace_set(rng, U1, U2, 200);
    TrainReport rep;
    const ClassModel m = train_class(ts, small_params(6), 11, &rep);
    REQUIRE(m.D.rows() == 20);
    REQUIRE(m.D.cols() == 6);
    REQUIRE(m.W.rows() == 2);
    for (Eigen::Index j = 0; j < m.D.cols(); ++j) CHECK(m.D.col(j).norm() == doctest::Approx(1.0).epsilon(1e-8));

    const Mat in = subspace_samples(rng, U1, 100, 0.01);
    const Mat out = subspace_samples(rng, U2, 100, 0.01);
    const double r_in = (in - m.D * numerics::omp_batch(m.D, in, m.L)).squaredNorm();
    const double r_out = (out - m.D * numerics::omp_batch(m.D, out, m.L)).squaredNorm();
    CHECK(r_out >= 2.0 * r_in);
}

TEST_CASE("train_class: admissible rho, convex subproblems, objective does not increase") {
    std::mt19937_64 rng(9);
    const Mat Q = orthonormal(rng, 16, 8);
    const ClassTrainingSet ts = two_subspace_set(rng, Q.leftCols(4), Q.rightCols(4), 150);
    TrainReport rep;
    train_class(ts, small_params(8), 3, &rep);
    REQUIRE(!rep.iterations.empty());
    for (const auto& it : rep.iterations) {
        CHECK(it.lambda_min_F >= -1e-8);
        CHECK(it.rho_eff <= it.rho_max);
        CHECK(it.rho_eff <= 0.5);
        CHECK(it.surrogate_monotone);
    }
    CHECK(rep.final_objective <= rep.initial_objective + 1e-6);
    CHECK(rep.L >= 1);
}

TEST_CASE("train_class: same seed gives a bitwise identical model") {
    std::mt19937_64 rng(10);
    const Mat Q = orthonormal(rng, 12, 6);
    const ClassTrainingSet ts = two_subspace_set(rng, Q.leftCols(3), Q.rightCols(3), 80);
    const ClassModel a = train_class(ts, small_params(5), 17);
    const ClassModel b = train_class(ts, small_params(5), 17);
    CHECK(a.D == b.D);
    CHECK(a.W == b.W);
    CHECK(a.L == b.L);
}

TEST_CASE("train_class: beta = 0 takes the classifier from a ridge fit on final codes") {
    std::mt19937_64 rng(12);
    const Mat Q = orthonormal(rng, 12, 6);
    const ClassTrainingSet ts = two_subspace_set(rng, Q.leftCols(3), Q.rightCols(3), 80);
    FlisHyperParams hp = small_params(5);
    hp.beta = 0.0;
    const ClassModel m = train_class(ts, hp, 1);
    Mat Ybar(12, 160), Hbar(2, 160);
    Ybar << ts.Y, ts.Yhat;
    Hbar << ts.H, ts.Htilde;
    const Mat W = numerics::ridge_classifier(numerics::omp_batch(m.D, Ybar, m.L), Hbar, hp.lambda1);
    CHECK((W - m.W).norm() < 1e-12);
}

TEST_CASE("train_class: argument validation") {
    std::mt19937_64 rng(13);
    ClassTrainingSet ts;
    ts.Y = oracle::random_normal(rng, 6, 5);
    ts.H = one_hot(1, 5);
    ts.Yhat = Mat(6, 0);
    ts.Htilde = Mat(3, 0);
    CHECK_THROWS_AS(train_class(ts, small_params(6), 1), InvalidArgument);
    FlisHyperParams neg = small_params(2);
    neg.rho = -1;
    CHECK_THROWS_AS(train_class(ts, neg, 1), InvalidArgument);
    ts.Yhat = oracle::random_normal(rng, 5, 4);
    ts.Htilde = one_hot(1, 4);
    CHECK_THROWS_AS(train_class(ts, small_params(2), 1), InvalidArgument);
}

TEST_CASE("assemble_partition_model: column layout") {
    ClassModel m[3];
    for (int c = 0; c < 3; ++c) {
        m[c].D = Mat::Constant(4, 2, c + 1.0);
        m[c].W = Mat::Constant(3, 2, 10.0 * (c + 1));
        m[c].D(0, 1) = -(c + 1.0);
    }
    const PartitionModel pm = assemble_partition_model(m[0], m[1], m[2]);
    REQUIRE(pm.D.cols() == 6);
    REQUIRE(pm.W.cols() == 6);
    for (Eigen::Index j = 0; j < 6; ++j) {
        CHECK(pm.D.col(j) == m[j / 2].D.col(j % 2));
        CHECK(pm.W.col(j) == m[j / 2].W.col(j % 2));
    }
    m[2].D = Mat::Zero(5, 2);
    CHECK_THROWS_AS(assemble_partition_model(m[0], m[1], m[2]), InvalidArgument);
}

TEST_CASE("one_hot and unit_norm_columns") {
    const Mat H = one_hot(2, 4);
    CHECK(H.rows() == 3);
    CHECK(H.row(2).sum() == 4.0);
    CHECK(H.topRows(2).sum() == 0.0);
    Mat Y(2, 3);
    Y << 3, 0, 1, 4, 0, 0;
    const Mat U = unit_norm_columns(Y);
    CHECK(U(0, 0) == doctest::Approx(0.6));
    CHECK(U.col(1).norm() == 0.0);
    CHECK(U(0, 2) == 1.0);
}
