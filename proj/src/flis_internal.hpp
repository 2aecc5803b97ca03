#pragma once

#include "flis/numerics.hpp"
#include "flis/rng.hpp"

#include <vector>

namespace flis::detail {

/// Normalises columns of D; columns with (near) zero norm are replaced by a
/// random nonzero column of `source`, normalised.
void renormalize_atoms(Mat& D, const Mat& source, Rng& rng);

Mat hcat(const Mat& a, const Mat& b);
Mat vcat(const Mat& a, const Mat& b);

/// X X^T, explicitly symmetrised.
Mat gram_of(const Mat& X);

bool nonincreasing(const std::vector<double>& trace);

/// Splits a stacked [D; sqrt(beta) W] into unit-norm D and the matching W.
/// With beta == 0, W is left untouched.
void split_stacked(const Mat& Dnew, Eigen::Index d, double beta, Mat& D, Mat& W);

} // namespace flis::detail
