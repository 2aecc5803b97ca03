#include "flis/synthdata.hpp"

#include "flis/error.hpp"
#include "flis/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace flis::synth {

namespace {

struct Crescent {
    double angle;
    double halfwidth;
    double thickness;
    int first_slice;
    int last_slice;
    double intensity;
};

void check_band(const Band& b, const char* name) {
    if (!(b.lo >= 0.0 && b.hi <= 1.0 && b.lo <= b.hi)) {
        throw InvalidArgument(std::string("phantom: ") + name + " band must satisfy 0 <= lo <= hi <= 1");
    }
}

double slice_scale(int t, int T) {
    return 0.55 + 0.45 * std::sin(std::numbers::pi * (t + 0.5) / T);
}

void validate(const PhantomSpec& s) {
    if (s.slices < 1) throw InvalidArgument("phantom: slices must be >= 1");
    if (s.width < 16 || s.height < 16) throw InvalidArgument("phantom: image must be at least 16x16");
    check_band(s.brain, "brain");
    check_band(s.csf, "csf");
    check_band(s.subdural, "subdural");
    if (s.noise_sigma < 0) throw InvalidArgument("phantom: noise sigma must be >= 0");
    if (s.head_semi_x <= 0 || s.head_semi_y <= 0 || s.head_jitter < 0 || s.head_jitter >= 0.5) {
        throw InvalidArgument("phantom: invalid head geometry");
    }
    const double ax = s.head_semi_x * s.width * (1 + s.head_jitter) + 3.0;
    const double ay = s.head_semi_y * s.height * (1 + s.head_jitter) + 3.0;
    if (ax >= 0.5 * s.width - 1 || ay >= 0.5 * s.height - 1) {
        throw InvalidArgument("phantom: head does not fit inside the image");
    }
    if (s.min_crescents < 0 || s.max_crescents < s.min_crescents) {
        throw InvalidArgument("phantom: invalid crescent count range");
    }
    if (s.crescent_min_thickness < 1.0 || s.crescent_max_thickness < s.crescent_min_thickness ||
        s.crescent_min_halfwidth <= 0 || s.crescent_max_halfwidth < s.crescent_min_halfwidth ||
        s.crescent_max_halfwidth > std::numbers::pi) {
        throw InvalidArgument("phantom: invalid crescent geometry");
    }
    if (s.rim_thickness < 0 || s.ventricle_scale < 0 || s.ventricle_scale > 0.45) {
        throw InvalidArgument("phantom: invalid rim or ventricle size");
    }
    // The smallest head semi-axis (end slices, smallest patient) must leave
    // room for the crescent, the rim and some tissue.
    const double min_semi = std::min(s.head_semi_x * s.width, s.head_semi_y * s.height) * (1 - s.head_jitter) *
                            slice_scale(0, std::max(1, s.slices));
    if (s.crescent_max_thickness + s.rim_thickness >= 0.5 * min_semi) {
        throw InvalidArgument("phantom: crescent thickness " + std::to_string(s.crescent_max_thickness) +
                              " exceeds the available head radius");
    }
}

double wrap_angle(double a) {
    while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
    while (a < -std::numbers::pi) a += 2 * std::numbers::pi;
    return a;
}

} // namespace

Phantom generate(const PhantomSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const int T = spec.slices;
    const int W = spec.width, H = spec.height;

    const double semi_x = spec.head_semi_x * W * (1 + spec.head_jitter * rng.uniform(-1, 1));
    const double semi_y = spec.head_semi_y * H * (1 + spec.head_jitter * rng.uniform(-1, 1));
    const double cx = 0.5 * (W - 1) + rng.uniform(-2, 2);
    const double cy = 0.5 * (H - 1) + rng.uniform(-2, 2);
    const double tilt = rng.uniform(-0.15, 0.15);
    const double brain_i = rng.uniform(spec.brain.lo, spec.brain.hi);
    const double csf_i = rng.uniform(spec.csf.lo, spec.csf.hi);
    const double vent_factor = rng.uniform(0.8, 1.3);

    const int n_cres = spec.min_crescents +
                       static_cast<int>(rng.below(static_cast<uint64_t>(spec.max_crescents - spec.min_crescents + 1)));
    std::vector<Crescent> crescents;
    for (int c = 0; c < n_cres; ++c) {
        Crescent cr;
        cr.angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
        cr.halfwidth = rng.uniform(spec.crescent_min_halfwidth, spec.crescent_max_halfwidth);
        cr.thickness = rng.uniform(spec.crescent_min_thickness, spec.crescent_max_thickness);
        const int span = std::max(1, static_cast<int>(std::lround(T * rng.uniform(0.5, 0.9))));
        cr.first_slice = static_cast<int>(rng.below(static_cast<uint64_t>(T - span + 1)));
        cr.last_slice = cr.first_slice + span - 1;
        cr.intensity = rng.uniform(spec.subdural.lo, spec.subdural.hi);
        crescents.push_back(cr);
    }

    Phantom out;
    out.images.reserve(static_cast<size_t>(T));
    const double ct = std::cos(tilt), st = std::sin(tilt);
    for (int t = 0; t < T; ++t) {
        const double scale = slice_scale(t, T);
        const double a = semi_x * scale, b = semi_y * scale;

        Mask mask(W, H, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
                if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) mask.at(x, y) = 1;
            }
        const DistanceMap dt = imaging::distance_transform(mask);

        const double vprof = std::pow(std::sin(std::numbers::pi * (t + 0.5) / T), 1.5);
        const double vx = spec.ventricle_scale * a * 0.5 * vent_factor * vprof;
        const double vy = 1.6 * vx;
        const bool has_vent = vx >= 1.5;

        LabelMap labels(W, H, 0);
        Slice img(W, H, 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (!mask.at(x, y)) continue;
                const double dx = x - cx, dy = y - cy;
                const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
                const double theta = std::atan2(dy, dx);

                double thick = 0.0;
                double sd_intensity = 0.0;
                for (const auto& cr : crescents) {
                    if (t < cr.first_slice || t > cr.last_slice) continue;
                    const double off = std::abs(wrap_angle(theta - cr.angle)) / cr.halfwidth;
                    if (off >= 1.0) continue;
                    const double span = cr.last_slice - cr.first_slice + 1;
                    const double taper = 0.6 + 0.4 * std::sin(std::numbers::pi * (t - cr.first_slice + 0.5) / span);
                    const double th = cr.thickness * taper * (1.0 - off * off);
                    if (th > thick) {
                        thick = th;
                        sd_intensity = cr.intensity;
                    }
                }

                const double d = dt.at(x, y);
                Tissue lab = Tissue::brain;
                double val = brain_i;
                if (thick >= 1.0 && d <= thick) {
                    lab = Tissue::subdural;
                    val = sd_intensity;
                } else if (d <= (thick >= 1.0 ? thick : 0.0) + spec.rim_thickness) {
                    lab = Tissue::csf;
                    val = csf_i;
                } else if (has_vent) {
                    const double vu = std::abs(u) - 0.22 * a, vv = v + 0.05 * b;
                    if ((vu * vu) / (vx * vx) + (vv * vv) / (vy * vy) <= 1.0) {
                        lab = Tissue::csf;
                        val = csf_i;
                    }
                }
                labels.at(x, y) = static_cast<uint8_t>(lab);
                img.at(x, y) = val;
            }
        if (spec.noise_sigma > 0)
            for (double& p : img.data) p = std::clamp(p + spec.noise_sigma * rng.normal(), 0.0, 1.0);

        out.images.push_back(std::move(img));
        out.labels.push_back(std::move(labels));
        out.masks.push_back(std::move(mask));
    }
    return out;
}

Suite generate_suite(const PhantomSpec& base, int train, int test) {
    if (train < 0 || test < 0) throw InvalidArgument("phantom suite: counts must be >= 0");
    Suite s;
    for (int i = 0; i < train + test; ++i) {
        PhantomSpec spec = base;
        spec.seed = derive_seed(base.seed, {static_cast<uint64_t>(i)});
        (i < train ? s.train : s.test).push_back(generate(spec));
    }
    return s;
}

} // namespace flis::synth
