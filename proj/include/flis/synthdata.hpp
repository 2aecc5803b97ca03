#pragma once

#include "flis/imaging.hpp"

#include <cstdint>
#include <vector>

namespace flis::synth {

struct Band {
    double lo = 0.0;
    double hi = 0.0;
};

/// Parameters of one synthetic hydrocephalic CT stack.
///
/// Each slice is an elliptical head (shrinking toward the base and top of the
/// stack) containing brain tissue, a thin CSF rim along the boundary, two
/// ventricles, and one or more subdural crescents attached to the boundary
/// that push the CSF rim inward. Tissue intensities are drawn once per
/// patient (per crescent for subdurals) from the bands below; Gaussian noise
/// is added everywhere and the result clipped to [0, 1].
struct PhantomSpec {
    uint64_t seed = 7;
    int slices = 24;
    int width = 128;
    int height = 128;

    Band brain{0.55, 0.65};
    Band csf{0.28, 0.38};
    // Overlaps the brain band: the hard case where intensity alone cannot
    // separate subdurals from tissue.
    Band subdural{0.45, 0.62};
    double noise_sigma = 0.05;

    double head_semi_x = 0.38;  // fraction of width
    double head_semi_y = 0.31;  // fraction of height
    double head_jitter = 0.06;  // relative per-patient size variation
    double rim_thickness = 2.0; // pixels
    double ventricle_scale = 0.30;

    int min_crescents = 1;
    int max_crescents = 2;
    double crescent_min_thickness = 3.0; // pixels, at the crescent centre
    double crescent_max_thickness = 7.0;
    double crescent_min_halfwidth = 0.5; // radians
    double crescent_max_halfwidth = 1.1;
};

struct Phantom {
    CtStack images;
    LabelStack labels;
    MaskStack masks; // ground-truth head region
};

/// Deterministic for a given spec. Throws InvalidArgument when the geometry
/// does not fit in the image or a parameter is out of range.
Phantom generate(const PhantomSpec& spec);

struct Suite {
    std::vector<Phantom> train;
    std::vector<Phantom> test;
};

/// `train` + `test` patients; patient i uses seed derive_seed(base.seed, {i}).
Suite generate_suite(const PhantomSpec& base, int train, int test);

} // namespace flis::synth
