#pragma once

#include "flis/numerics.hpp"

#include <cstdint>
#include <vector>

namespace flis {

/// Training data for one class: in-class features Y with one-hot labels H,
/// and the complementary features Yhat (the other classes) with labels
/// Htilde, which repeat the in-class label for every complementary column.
struct ClassTrainingSet {
    Mat Y;      // d x N
    Mat Yhat;   // d x Nhat (may be empty)
    Mat H;      // C x N
    Mat Htilde; // C x Nhat
};

struct FlisHyperParams {
    int K = 80;            // atoms per class
    double beta = 2.0;     // label-consistency weight
    double rho = 0.5;      // discrimination weight (upper bound; see rho_max)
    double lambda = 0.1;   // L1 weight of the initialization dictionary, on unit-norm features
    double lambda1 = 0.01; // ridge weight of the initial classifier
    int max_iters = 30;
    double tol = 1e-4;     // relative Frobenius change of the stacked dictionary
    int odl_epochs = 20;
    int odl_batch = 256;

    friend bool operator==(const FlisHyperParams&, const FlisHyperParams&) = default;
};

struct ClassModel {
    Mat D; // d x K, unit-norm columns
    Mat W; // C x K
    int L = 1;
};

struct PartitionModel {
    Mat D; // d x 3K, classes in brain, csf, subdural order
    Mat W; // 3 x 3K
    friend bool operator==(const PartitionModel& a, const PartitionModel& b) {
        return a.D.rows() == b.D.rows() && a.D.cols() == b.D.cols() && a.W.rows() == b.W.rows() &&
               a.W.cols() == b.W.cols() && a.D == b.D && a.W == b.W;
    }
};

struct IterationRecord {
    double rho_max = 0.0;
    double rho_eff = 0.0;
    double lambda_min_F = 0.0;     // smallest eigenvalue of F handed to dict_update
    bool surrogate_monotone = true;  // trace surrogate non-increasing over every sweep
    double relative_change = 0.0;
    double objective = 0.0;        // tracked cost after re-coding
};

struct TrainReport {
    int L = 0;
    double rho_objective = 0.0;    // discrimination weight used for the tracked cost
    double initial_objective = 0.0;
    double final_objective = 0.0;  // cost of the returned iterate
    int best_iteration = 0;        // 0 = the initialization
    bool converged = false;
    std::vector<IterationRecord> iterations;
};

struct OdlResult {
    Mat D0;
    Mat X0;
    double objective = 0.0;         // ||Y - D0 X0||^2 + lambda ||X0||_1
    double initial_objective = 0.0; // same cost at the random initialization
};

/// Online dictionary learning (mini-batch lasso coding + block coordinate
/// dictionary update), started from K random training columns.
OdlResult odl_init(const Mat& Y, int K, double lambda, uint64_t seed, int epochs = 20, int batch = 256);

/// Mean number of nonzeros (|x| > 1e-10) per column, rounded, clamped to [1, K].
int estimate_sparsity(const Mat& X0);

/// Largest discrimination weight keeping F = XX^T/N - rho XhXh^T/Nhat
/// positive semidefinite: (Nhat/N) lambda_min(XX^T) / lambda_max(XhXh^T).
/// +infinity when the complementary codes are all zero.
double rho_max(const Mat& X, const Mat& Xhat);

/// Cost minimised by the trainer, evaluated for the stacked dictionary
/// [D; sqrt(beta) W] and given codes:
///   (1/N)||Ynew - Dnew X||^2 - (rho/Nhat)||Yhat_new - Dnew Xhat||^2
double flis_objective(const Mat& Ynew, const Mat& Yhat_new, const Mat& Dnew, const Mat& X, const Mat& Xhat,
                      double rho);

/// Learns (D, W) for one class. See README for the iteration.
ClassModel train_class(const ClassTrainingSet& ts, const FlisHyperParams& hp, uint64_t seed,
                       TrainReport* report = nullptr);

/// D = [D_brain D_csf D_subdural], W = [W_brain W_csf W_subdural]
PartitionModel assemble_partition_model(const ClassModel& brain, const ClassModel& csf, const ClassModel& subdural);

/// Column-normalised copy of Y (zero columns stay zero).
Mat unit_norm_columns(const Mat& Y);

/// One-hot label matrix: `count` columns equal to e_cls in R^classes.
Mat one_hot(int cls, Eigen::Index count, int classes = 3);

} // namespace flis
