#pragma once

#include "flis/flis_train.hpp"

#include <array>
#include <vector>

namespace flis::baselines {

/// Pool of raw labelled training patches (intensity only).
struct SrcDictionary {
    Mat atoms;               // d' x N
    std::vector<int> labels; // class index 0..2 per atom
};

struct SrcResult {
    int label = 0;                // class index 0..2
    std::array<double, 3> probs{}; // sums to 1
};

/// Class indicator matrix (3 x N) of an SrcDictionary; the SRC class
/// likelihoods are Wa / sum(a) for a nonnegative code a.
Mat src_indicator(const SrcDictionary& dict);

/// Nonnegative lasso code against the pool, then per-class share of the code
/// mass. Throws UndecidablePixel when the code is (numerically) zero.
SrcResult src_classify(const Vec& m, const SrcDictionary& dict, double lambda);

/// Same rule from an already computed nonnegative code and indicator matrix.
SrcResult src_decide(const Vec& alpha, const Mat& indicator);

/// Joint label-consistent dictionary (3K atoms) over the merged training set
/// of all classes: ODL initialisation, OMP coding, ridge classifier, then
/// alternating OMP coding and trace-form dictionary updates on the stacked
/// problem ||Y - DX||^2 + beta ||H - WX||^2. `merged.Yhat` must be empty.
PartitionModel train_ddls(const ClassTrainingSet& merged, const FlisHyperParams& hp, uint64_t seed,
                          TrainReport* report = nullptr);

/// Intensity-only classifier: one Gaussian per class fitted to the training
/// pixel intensities, pixels assigned to the most likely class.
class IntensityClassifier {
public:
    /// samples[c] holds intensities of class c. Every class needs >= 2 samples.
    static IntensityClassifier fit(const std::array<std::vector<double>, 3>& samples);

    int classify(double v) const;

    const std::array<double, 3>& means() const { return mean_; }
    const std::array<double, 3>& sds() const { return sd_; }

private:
    std::array<double, 3> mean_{};
    std::array<double, 3> sd_{};
};

} // namespace flis::baselines
