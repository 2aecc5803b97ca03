#include "flis/imaging.hpp"

#include "flis/error.hpp"
#include "flis/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace flis::imaging {

namespace {

constexpr int kBins = 256;

int intensity_bin(double v) {
    const int b = static_cast<int>(std::floor(v * kBins));
    return std::clamp(b, 0, kBins - 1);
}

// 1D squared distance transform of sampled function f (lower envelope of
// parabolas). Infinite samples are skipped; all-infinite input stays infinite.
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        auto meet = [&](int p) {
            return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
        };
        double s = meet(v[k]);
        // z[0] is -inf, so this stops at k == 0
        while (s <= z[k]) s = meet(v[--k]);
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

Grid<double, DistanceTag> squared_edt(const Mask& m) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int W = m.width, H = m.height;
    DistanceMap out(W, H, 0.0);
    const int n = std::max(W, H);
    std::vector<double> f, d;
    std::vector<int> v(static_cast<size_t>(n) + 1);
    std::vector<double> z(static_cast<size_t>(n) + 2);

    f.resize(static_cast<size_t>(H));
    d.resize(static_cast<size_t>(H));
    for (int x = 0; x < W; ++x) {
        for (int y = 0; y < H; ++y) f[y] = m.at(x, y) ? inf : 0.0;
        dt1d(f, d, v, z);
        for (int y = 0; y < H; ++y) out.at(x, y) = d[y];
    }
    f.resize(static_cast<size_t>(W));
    d.resize(static_cast<size_t>(W));
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) f[x] = out.at(x, y);
        dt1d(f, d, v, z);
        for (int x = 0; x < W; ++x) out.at(x, y) = d[x];
    }
    return out;
}

} // namespace

double otsu_threshold(const Slice& s) {
    std::array<double, kBins> hist{};
    for (double v : s.data) hist[static_cast<size_t>(intensity_bin(v))] += 1.0;
    const double total = static_cast<double>(s.size());
    if (total == 0) return 1.0;
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * hist[static_cast<size_t>(i)];

    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_t = kBins - 1;
    for (int t = 0; t < kBins - 1; ++t) {
        w0 += hist[static_cast<size_t>(t)];
        sum0 += t * hist[static_cast<size_t>(t)];
        const double w1 = total - w0;
        if (w0 == 0 || w1 == 0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best) {
            best = var;
            best_t = t;
        }
    }
    return static_cast<double>(best_t + 1) / kBins;
}

Mask largest_component(const Mask& m) {
    Mask out(m.width, m.height, 0);
    std::vector<int> comp(m.size(), -1);
    std::vector<int> stack;
    int best_id = -1;
    size_t best_size = 0;
    int id = 0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const size_t idx = static_cast<size_t>(y) * m.width + x;
            if (!m.data[idx] || comp[idx] >= 0) continue;
            size_t count = 0;
            stack.assign(1, static_cast<int>(idx));
            comp[idx] = id;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++count;
                const int cx = cur % m.width, cy = cur / m.width;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if ((dx == 0 && dy == 0) || !m.contains(nx, ny)) continue;
                        const size_t nidx = static_cast<size_t>(ny) * m.width + nx;
                        if (m.data[nidx] && comp[nidx] < 0) {
                            comp[nidx] = id;
                            stack.push_back(static_cast<int>(nidx));
                        }
                    }
            }
            if (count > best_size) {
                best_size = count;
                best_id = id;
            }
            ++id;
        }
    }
    if (best_id >= 0)
        for (size_t i = 0; i < comp.size(); ++i) out.data[i] = comp[i] == best_id ? 1 : 0;
    return out;
}

Mask fill_holes(const Mask& m) {
    // Background reachable from the border (4-connected) stays background.
    Mask outside(m.width, m.height, 0);
    std::vector<int> stack;
    auto seed = [&](int x, int y) {
        if (!m.at(x, y) && !outside.at(x, y)) {
            outside.at(x, y) = 1;
            stack.push_back(y * m.width + x);
        }
    };
    for (int x = 0; x < m.width; ++x) {
        seed(x, 0);
        seed(x, m.height - 1);
    }
    for (int y = 0; y < m.height; ++y) {
        seed(0, y);
        seed(m.width - 1, y);
    }
    constexpr int off[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % m.width, cy = cur / m.width;
        for (const auto& o : off) {
            const int nx = cx + o[0], ny = cy + o[1];
            if (m.contains(nx, ny)) seed(nx, ny);
        }
    }
    Mask out(m.width, m.height, 0);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = outside.data[i] ? 0 : 1;
    return out;
}

Mask dilate3x3(const Mask& m) {
    Mask out(m.width, m.height, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            uint8_t v = 0;
            for (int dy = -1; dy <= 1 && !v; ++dy)
                for (int dx = -1; dx <= 1 && !v; ++dx)
                    if (m.contains(x + dx, y + dy) && m.at(x + dx, y + dy)) v = 1;
            out.at(x, y) = v;
        }
    return out;
}

Mask erode3x3(const Mask& m) {
    Mask out(m.width, m.height, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            uint8_t v = m.at(x, y);
            for (int dy = -1; dy <= 1 && v; ++dy)
                for (int dx = -1; dx <= 1 && v; ++dx)
                    if (m.contains(x + dx, y + dy) && !m.at(x + dx, y + dy)) v = 0;
            out.at(x, y) = v;
        }
    return out;
}

std::pair<double, double> otsu_thresholds3(const Slice& s) {
    std::array<double, kBins + 1> w{}, m{}; // prefix counts and first moments
    for (double v : s.data) {
        const int b = intensity_bin(v);
        w[static_cast<size_t>(b) + 1] += 1.0;
        m[static_cast<size_t>(b) + 1] += b;
    }
    for (size_t i = 1; i <= kBins; ++i) {
        w[i] += w[i - 1];
        m[i] += m[i - 1];
    }
    // Class over bins [a, b): w^2-weighted mean term; the total is constant.
    auto term = [&](int a, int b) {
        const double cw = w[static_cast<size_t>(b)] - w[static_cast<size_t>(a)];
        if (cw <= 0) return 0.0;
        const double cm = m[static_cast<size_t>(b)] - m[static_cast<size_t>(a)];
        return cm * cm / cw;
    };
    double best = -1.0;
    int t1 = 1, t2 = 2;
    for (int a = 1; a < kBins - 1; ++a)
        for (int b = a + 1; b < kBins; ++b) {
            const double v = term(0, a) + term(a, b) + term(b, kBins);
            if (v > best) {
                best = v;
                t1 = a;
                t2 = b;
            }
        }
    return {static_cast<double>(t1) / kBins, static_cast<double>(t2) / kBins};
}

Mask candidate_region(const Slice& s) {
    const double thr = otsu_thresholds3(s).first;
    Mask fg(s.width, s.height, 0);
    for (size_t i = 0; i < s.size(); ++i) fg.data[i] = s.data[i] >= thr ? 1 : 0;
    Mask m = largest_component(fg);
    m = dilate3x3(dilate3x3(m));
    m = erode3x3(erode3x3(m));
    return fill_holes(m);
}

DistanceMap distance_transform(const Mask& m) {
    const bool has_exterior = std::any_of(m.data.begin(), m.data.end(), [](uint8_t v) { return v == 0; });
    DistanceMap out;
    if (has_exterior || m.size() == 0) {
        out = squared_edt(m);
    } else {
        Mask padded(m.width + 2, m.height + 2, 0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) padded.at(x + 1, y + 1) = 1;
        const DistanceMap big = squared_edt(padded);
        out = DistanceMap(m.width, m.height, 0.0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) out.at(x, y) = big.at(x + 1, y + 1);
    }
    for (double& v : out.data) v = std::sqrt(v);
    return out;
}

double max_distance(const std::vector<DistanceMap>& maps) {
    double mx = 0.0;
    for (const auto& m : maps)
        for (double v : m.data) mx = std::max(mx, v);
    return mx;
}

DistanceMap scaled(const DistanceMap& dm, double scale) {
    DistanceMap out = dm;
    for (double& v : out.data) v *= scale;
    return out;
}

void fill_feature(const Slice& s, const DistanceMap* dm, Pixel z, int w, Eigen::Ref<Vec> out) {
    const int r = w / 2;
    Eigen::Index i = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const int x = z.x + dx, y = z.y + dy;
            out[i++] = s.contains(x, y) ? s.at(x, y) : 0.0;
        }
    if (!dm) return;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const int x = z.x + dx, y = z.y + dy;
            out[i++] = dm->contains(x, y) ? dm->at(x, y) : 0.0;
        }
}

Vec extract_feature(const Slice& s, const DistanceMap& dm, Pixel z, int w) {
    if (w < 1 || w % 2 == 0) {
        throw InvalidArgument("extract_feature: patch width must be odd, got " + std::to_string(w));
    }
    if (dm.width != s.width || dm.height != s.height) {
        throw InvalidArgument("extract_feature: distance map and slice sizes differ");
    }
    Vec out(2 * w * w);
    fill_feature(s, &dm, z, w, out);
    return out;
}

Vec extract_intensity_feature(const Slice& s, Pixel z, int w) {
    if (w < 1 || w % 2 == 0) {
        throw InvalidArgument("extract_feature: patch width must be odd, got " + std::to_string(w));
    }
    Vec out(w * w);
    fill_feature(s, nullptr, z, w, out);
    return out;
}

int partition_index(int t, int T, int P) {
    if (P < 1 || P > T) {
        throw InvalidArgument("partition_index: need 1 <= P <= T (P=" + std::to_string(P) +
                              ", T=" + std::to_string(T) + ")");
    }
    if (t < 0 || t >= T) {
        throw InvalidArgument("partition_index: slice index out of range");
    }
    return static_cast<int>((static_cast<int64_t>(t) * P) / T);
}

std::vector<Pixel> select_patches(const LabelMap& labels, const DistanceMap& dm, Tissue label, int quota,
                                  int bins, uint64_t seed) {
    if (quota < 0) throw InvalidArgument("select_patches: quota must be >= 0");
    if (bins < 1) throw InvalidArgument("select_patches: bins must be >= 1");
    if (dm.width != labels.width || dm.height != labels.height) {
        throw InvalidArgument("select_patches: label and distance map sizes differ");
    }
    std::vector<Pixel> candidates;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x)
            if (labels.at(x, y) == static_cast<uint8_t>(label)) {
                candidates.push_back({x, y});
                lo = std::min(lo, dm.at(x, y));
                hi = std::max(hi, dm.at(x, y));
            }
    if (quota == 0 || candidates.empty()) return {};

    const int nbins = (hi - lo) > 1e-12 ? bins : 1;
    std::vector<std::vector<Pixel>> binned(static_cast<size_t>(nbins));
    for (const Pixel& p : candidates) {
        int b = 0;
        if (nbins > 1) {
            b = static_cast<int>(std::floor((dm.at(p.x, p.y) - lo) / (hi - lo) * nbins));
            b = std::clamp(b, 0, nbins - 1);
        }
        binned[static_cast<size_t>(b)].push_back(p);
    }

    std::vector<size_t> take(static_cast<size_t>(nbins), 0);
    size_t remaining = std::min<size_t>(static_cast<size_t>(quota), candidates.size());
    while (remaining > 0) {
        for (size_t b = 0; b < take.size() && remaining > 0; ++b) {
            if (take[b] < binned[b].size()) {
                ++take[b];
                --remaining;
            }
        }
    }

    Rng rng(seed);
    std::vector<Pixel> out;
    out.reserve(static_cast<size_t>(quota));
    for (size_t b = 0; b < binned.size(); ++b) {
        rng.partial_shuffle(binned[b], take[b]);
        out.insert(out.end(), binned[b].begin(), binned[b].begin() + static_cast<std::ptrdiff_t>(take[b]));
    }
    return out;
}

} // namespace flis::imaging
