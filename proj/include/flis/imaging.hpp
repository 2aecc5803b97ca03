#pragma once

#include "flis/numerics.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace flis {

// Pixel classes as stored in label maps. Learners use class index = label - 1.
enum class Tissue : uint8_t { background = 0, brain = 1, csf = 2, subdural = 3 };

inline constexpr int kNumClasses = 3;

template <class T, class Tag>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    size_t size() const { return data.size(); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

struct SliceTag;
struct MaskTag;
struct LabelTag;
struct DistanceTag;

/// Grayscale slice, intensities in [0, 1].
using Slice = Grid<double, SliceTag>;
/// Binary candidate region (1 = eligible for classification).
using Mask = Grid<uint8_t, MaskTag>;
/// Per-pixel Tissue values 0..3.
using LabelMap = Grid<uint8_t, LabelTag>;
/// Per-pixel distance to the nearest pixel outside the candidate region.
using DistanceMap = Grid<double, DistanceTag>;

using CtStack = std::vector<Slice>;
using LabelStack = std::vector<LabelMap>;
using MaskStack = std::vector<Mask>;

struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

namespace imaging {

/// Otsu threshold over a 256-bin histogram of [0, 1]. Pixels at or above
/// the returned value are foreground.
double otsu_threshold(const Slice& s);

/// Two thresholds splitting the histogram into three classes with maximal
/// between-class variance (lower, upper).
std::pair<double, double> otsu_thresholds3(const Slice& s);

/// Head region: lower three-class Otsu threshold (air vs any tissue, so dark
/// tissue on the boundary is kept), largest 8-connected component, 3x3
/// closing applied twice, then hole filling. An all-zero slice gives an
/// empty mask.
Mask candidate_region(const Slice& s);

Mask largest_component(const Mask& m);
Mask fill_holes(const Mask& m);
Mask dilate3x3(const Mask& m);
Mask erode3x3(const Mask& m);

/// Exact Euclidean distance transform: for each mask pixel, the distance to
/// the nearest pixel with mask 0; zero outside the mask. If the mask has no
/// zero pixel at all, distances are measured to the ring just outside the
/// image border instead.
DistanceMap distance_transform(const Mask& m);

/// Largest distance over a stack of maps (0 for an empty stack).
double max_distance(const std::vector<DistanceMap>& maps);

/// Copy of `dm` with every value multiplied by `scale`.
DistanceMap scaled(const DistanceMap& dm, double scale);

/// Intensity patch (w*w, row-major) followed by the matching distance patch.
/// Out-of-image pixels contribute 0. w must be odd.
Vec extract_feature(const Slice& s, const DistanceMap& dm, Pixel z, int w);

/// Intensity-only variant used by the baselines (w*w entries).
Vec extract_intensity_feature(const Slice& s, Pixel z, int w);

/// Writes the same vector as extract_feature/extract_intensity_feature into
/// `out`, which must already have the right length.
void fill_feature(const Slice& s, const DistanceMap* dm, Pixel z, int w, Eigen::Ref<Vec> out);

/// floor(t * P / T)
int partition_index(int t, int T, int P);

/// Draws up to `quota` pixels of `label` so that the range of their distances
/// is covered evenly: the [min, max] range is split into `bins` equal bins and
/// the quota is dealt round-robin over bins that still have pixels left.
/// Deterministic for a given seed.
std::vector<Pixel> select_patches(const LabelMap& labels, const DistanceMap& dm, Tissue label, int quota,
                                  int bins, uint64_t seed);

} // namespace imaging
} // namespace flis
