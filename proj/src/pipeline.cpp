#include "flis/pipeline.hpp"

#include "flis/error.hpp"
#include "flis/pgm.hpp"
#include "flis/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>

namespace flis {

namespace {

const char* const kClassNames[3] = {"brain", "csf", "subdural"};

// floor(t * P / T); also used when the stack has fewer slices than partitions.
int slice_partition(int t, int T, int P) {
    if (T >= P) return imaging::partition_index(t, T, P);
    return static_cast<int>((static_cast<int64_t>(t) * P) / T);
}

void check_stack(const PatientStack& s, size_t index, bool need_labels) {
    const std::string where = "stack " + std::to_string(index);
    if (s.images.empty()) throw InvalidArgument(where + ": no slices");
    if (need_labels && s.labels.size() != s.images.size()) throw InvalidArgument(where + ": label count differs");
    if (!s.masks.empty() && s.masks.size() != s.images.size()) throw InvalidArgument(where + ": mask count differs");
    for (size_t t = 0; t < s.images.size(); ++t) {
        const int w = s.images[t].width, h = s.images[t].height;
        if ((need_labels && (s.labels[t].width != w || s.labels[t].height != h)) ||
            (!s.masks.empty() && (s.masks[t].width != w || s.masks[t].height != h))) {
            throw InvalidArgument(where + ": slice " + std::to_string(t) + " dimensions differ");
        }
    }
}

uint64_t slice_fingerprint(const Slice& s, const LabelMap& l) {
    uint64_t h = 1469598103934665603ULL;
    auto eat = [&](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
    };
    eat(&s.width, sizeof s.width);
    eat(&s.height, sizeof s.height);
    eat(s.data.data(), s.data.size() * sizeof(double));
    eat(l.data.data(), l.data.size());
    return h;
}

struct SliceRef {
    size_t stack;
    size_t t;
};

// Distributes `total` over slots with the given capacities one unit at a
// time in slot order.
std::vector<int> water_fill(const std::vector<int>& caps, int total) {
    std::vector<int> take(caps.size(), 0);
    int remaining = total;
    while (remaining > 0) {
        bool progressed = false;
        for (size_t i = 0; i < caps.size() && remaining > 0; ++i) {
            if (take[i] < caps[i]) {
                ++take[i];
                --remaining;
                progressed = true;
            }
        }
        if (!progressed) break;
    }
    return take;
}

int argmax_lowest(const Vec& h) {
    int best = 0;
    for (int c = 1; c < h.size(); ++c)
        if (h[c] > h[best]) best = c;
    return best;
}

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::flis: return "flis";
    case Method::ddls: return "ddls";
    case Method::src: return "src";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "flis") return Method::flis;
    if (s == "ddls") return Method::ddls;
    if (s == "src") return Method::src;
    throw InvalidArgument("unknown method '" + s + "' (expected flis, ddls or src)");
}

std::string to_string(MaskSource m) { return m == MaskSource::truth ? "truth" : "candidate"; }

MaskSource parse_mask_source(const std::string& s) {
    if (s == "candidate") return MaskSource::candidate;
    if (s == "truth") return MaskSource::truth;
    throw InvalidArgument("unknown mask source '" + s + "' (expected candidate or truth)");
}

Eigen::Index feature_length(Method m, int w) {
    return m == Method::flis ? 2 * static_cast<Eigen::Index>(w) * w : static_cast<Eigen::Index>(w) * w;
}

void validate(const TrainConfig& cfg) {
    if (cfg.w < 1 || cfg.w % 2 == 0) throw InvalidArgument("w must be a positive odd number");
    if (cfg.P < 1) throw InvalidArgument("P must be >= 1");
    if (cfg.hp.K < 1) throw InvalidArgument("K must be >= 1");
    if (cfg.quota < 1) throw InvalidArgument("quota must be >= 1");
    if (cfg.bins < 1) throw InvalidArgument("bins must be >= 1");
    if (cfg.hp.beta < 0 || cfg.hp.rho < 0) throw InvalidArgument("beta and rho must be >= 0");
    if (!(cfg.hp.lambda > 0)) throw InvalidArgument("lambda must be > 0");
    if (cfg.hp.lambda1 < 0) throw InvalidArgument("lambda1 must be >= 0");
    if (!(cfg.lambda_infer > 0)) throw InvalidArgument("lambda_infer must be > 0");
    if (cfg.hp.max_iters < 0 || !(cfg.hp.tol >= 0)) throw InvalidArgument("max_iters and tol must be >= 0");
    if (cfg.hp.odl_epochs < 0 || cfg.hp.odl_batch < 1) throw InvalidArgument("invalid odl settings");
    if (cfg.src_atoms < 1) throw InvalidArgument("src_atoms must be >= 1");
}

MaskStack stack_masks(const PatientStack& s, MaskSource source) {
    MaskStack out;
    out.reserve(s.images.size());
    for (size_t t = 0; t < s.images.size(); ++t) {
        Mask m;
        if (source == MaskSource::truth) {
            if (s.masks.size() != s.images.size()) throw InputError("truth masks requested but not available");
            m = s.masks[t];
        } else {
            m = imaging::candidate_region(s.images[t]);
        }
        if (t < s.labels.size())
            for (size_t i = 0; i < m.size(); ++i)
                if (s.labels[t].data[i]) m.data[i] = 1;
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<DistanceMap> stack_distances(const MaskStack& masks, bool normalize) {
    std::vector<DistanceMap> out;
    out.reserve(masks.size());
    for (const Mask& m : masks) out.push_back(imaging::distance_transform(m));
    if (normalize) {
        const double mx = imaging::max_distance(out);
        if (mx > 0)
            for (auto& d : out) d = imaging::scaled(d, 1.0 / mx);
    }
    return out;
}

Model train(const std::vector<PatientStack>& stacks, const TrainConfig& cfg, TrainingLog* log) {
    validate(cfg);
    if (stacks.empty()) throw InvalidArgument("train: no training stacks");
    for (size_t i = 0; i < stacks.size(); ++i) check_stack(stacks[i], i, true);

    const bool with_distance = cfg.method == Method::flis;
    std::vector<std::vector<DistanceMap>> dists;
    for (const auto& s : stacks) dists.push_back(stack_distances(stack_masks(s, cfg.mask_source), cfg.normalize_distance));

    // Unique slices per partition; identical (image, label) pairs are used once.
    std::vector<std::vector<SliceRef>> by_part(static_cast<size_t>(cfg.P));
    std::vector<std::pair<uint64_t, SliceRef>> seen;
    for (size_t si = 0; si < stacks.size(); ++si) {
        const int T = static_cast<int>(stacks[si].images.size());
        for (int t = 0; t < T; ++t) {
            const Slice& img = stacks[si].images[static_cast<size_t>(t)];
            const LabelMap& lab = stacks[si].labels[static_cast<size_t>(t)];
            const uint64_t fp = slice_fingerprint(img, lab);
            bool dup = false;
            for (const auto& [h, ref] : seen) {
                if (h == fp && stacks[ref.stack].images[ref.t] == img && stacks[ref.stack].labels[ref.t] == lab) {
                    dup = true;
                    break;
                }
            }
            if (dup) continue;
            seen.push_back({fp, {si, static_cast<size_t>(t)}});
            by_part[static_cast<size_t>(slice_partition(t, T, cfg.P))].push_back({si, static_cast<size_t>(t)});
        }
    }

    const Eigen::Index d = feature_length(cfg.method, cfg.w);
    Model model;
    model.config = cfg;
    model.parts.resize(static_cast<size_t>(cfg.P));
    if (log) log->partitions.assign(static_cast<size_t>(cfg.P), {});

    for (int p = 0; p < cfg.P; ++p) {
        const auto& slices = by_part[static_cast<size_t>(p)];
        std::array<Mat, 3> Y;
        Eigen::Index n_per_class = cfg.quota;
        std::array<std::vector<int>, 3> caps;
        for (int c = 0; c < 3; ++c) {
            int total = 0;
            for (const SliceRef& r : slices) {
                const auto& lab = stacks[r.stack].labels[r.t].data;
                const int k = static_cast<int>(std::count(lab.begin(), lab.end(), static_cast<uint8_t>(c + 1)));
                caps[static_cast<size_t>(c)].push_back(k);
                total += k;
            }
            if (total == 0) {
                throw DegenerateClass(p, c, std::string("class ") + kClassNames[c] + " absent from partition " +
                                                std::to_string(p));
            }
            n_per_class = std::min<Eigen::Index>(n_per_class, total);
        }
        const int min_needed = cfg.method == Method::src ? 1 : cfg.hp.K;
        if (n_per_class < min_needed) {
            throw InvalidArgument("partition " + std::to_string(p) + ": only " + std::to_string(n_per_class) +
                                  " samples per class, fewer than K=" + std::to_string(cfg.hp.K));
        }

        for (int c = 0; c < 3; ++c) {
            const auto take = water_fill(caps[static_cast<size_t>(c)], static_cast<int>(n_per_class));
            Mat& Yc = Y[static_cast<size_t>(c)];
            Yc.resize(d, n_per_class);
            Eigen::Index col = 0;
            for (size_t k = 0; k < slices.size(); ++k) {
                if (take[k] == 0) continue;
                const SliceRef& r = slices[k];
                const auto& dm = dists[r.stack][r.t];
                const auto picks =
                    imaging::select_patches(stacks[r.stack].labels[r.t], dm, static_cast<Tissue>(c + 1), take[k],
                                            cfg.bins, derive_seed(cfg.seed, {static_cast<uint64_t>(p), k,
                                                                             static_cast<uint64_t>(c)}));
                for (const Pixel& px : picks)
                    imaging::fill_feature(stacks[r.stack].images[r.t], with_distance ? &dm : nullptr, px, cfg.w,
                                          Yc.col(col++));
            }
            numerics::normalize_columns(Yc);
        }

        PartitionModel& pm = model.parts[static_cast<size_t>(p)];
        PartitionLog plog;
        plog.partition = p;
        plog.samples_per_class = n_per_class;
        if (cfg.method == Method::flis) {
            std::array<ClassModel, 3> cm;
            std::array<TrainReport, 3> reps;
#pragma omp parallel for schedule(dynamic, 1)
            for (int c = 0; c < 3; ++c) {
                const int o1 = (c + 1) % 3, o2 = (c + 2) % 3;
                ClassTrainingSet ts;
                ts.Y = Y[static_cast<size_t>(c)];
                ts.Yhat.resize(d, 2 * n_per_class);
                ts.Yhat << Y[static_cast<size_t>(std::min(o1, o2))], Y[static_cast<size_t>(std::max(o1, o2))];
                ts.H = one_hot(c, n_per_class);
                ts.Htilde = one_hot(c, ts.Yhat.cols());
                cm[static_cast<size_t>(c)] = train_class(ts, cfg.hp,
                                                         derive_seed(cfg.seed, {1000u + static_cast<uint64_t>(p),
                                                                                static_cast<uint64_t>(c)}),
                                                         &reps[static_cast<size_t>(c)]);
            }
            pm = assemble_partition_model(cm[0], cm[1], cm[2]);
            plog.reports.assign(reps.begin(), reps.end());
        } else if (cfg.method == Method::ddls) {
            ClassTrainingSet merged;
            merged.Y.resize(d, 3 * n_per_class);
            merged.Y << Y[0], Y[1], Y[2];
            merged.H.resize(3, 3 * n_per_class);
            merged.H << one_hot(0, n_per_class), one_hot(1, n_per_class), one_hot(2, n_per_class);
            merged.Yhat = Mat(d, 0);
            merged.Htilde = Mat(3, 0);
            TrainReport rep;
            pm = baselines::train_ddls(merged, cfg.hp, derive_seed(cfg.seed, {1000u + static_cast<uint64_t>(p)}),
                                       &rep);
            plog.reports.push_back(std::move(rep));
        } else {
            const Eigen::Index n = std::min<Eigen::Index>(cfg.src_atoms, n_per_class);
            pm.D.resize(d, 3 * n);
            pm.W = Mat::Zero(3, 3 * n);
            for (int c = 0; c < 3; ++c)
                for (Eigen::Index i = 0; i < n; ++i) {
                    // Evenly spaced picks keep the distance-bin coverage of the sample.
                    const Eigen::Index src = i * n_per_class / n;
                    pm.D.col(c * n + i) = Y[static_cast<size_t>(c)].col(src);
                    pm.W(c, c * n + i) = 1.0;
                }
        }
        if (log) (*log).partitions[static_cast<size_t>(p)] = std::move(plog);
    }
    return model;
}

Segmentation segment(const Model& model, const CtStack& stack, const MaskStack* masks) {
    if (stack.empty()) throw InvalidArgument("segment: empty stack");
    if (model.parts.empty()) throw InvalidArgument("segment: model has no partitions");
    const TrainConfig& cfg = model.config;
    const int T = static_cast<int>(stack.size());
    const int P = model.P();
    if (masks && masks->size() != stack.size()) throw InvalidArgument("segment: mask count differs from slice count");
    const Eigen::Index d = feature_length(cfg.method, cfg.w);
    if (model.feature_dim() != d) throw InvalidArgument("segment: model feature length does not match its patch width");

    PatientStack ps;
    ps.images = stack;
    if (masks) ps.masks = *masks;
    const MaskStack ms = stack_masks(ps, masks ? MaskSource::truth : MaskSource::candidate);
    const auto dists = stack_distances(ms, cfg.normalize_distance);
    const bool with_distance = cfg.method == Method::flis;

    std::vector<numerics::LassoSolver> solvers;
    solvers.reserve(static_cast<size_t>(P));
    for (const auto& pm : model.parts) solvers.emplace_back(pm.D, cfg.lambda_infer);

    Segmentation out;
    out.remapped = T < P;
    out.labels.reserve(stack.size());
    for (int t = 0; t < T; ++t) {
        const Slice& img = stack[static_cast<size_t>(t)];
        const Mask& m = ms[static_cast<size_t>(t)];
        const int p = slice_partition(t, T, P);
        const auto& solver = solvers[static_cast<size_t>(p)];
        const Mat& W = model.parts[static_cast<size_t>(p)].W;
        LabelMap lab(img.width, img.height, 0);
        std::vector<Pixel> pixels;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (m.at(x, y)) pixels.push_back({x, y});
        size_t undecidable = 0;
#pragma omp parallel reduction(+ : undecidable)
        {
            Vec feat(d);
#pragma omp for schedule(dynamic, 256)
            for (size_t i = 0; i < pixels.size(); ++i) {
                const Pixel px = pixels[i];
                imaging::fill_feature(img, with_distance ? &dists[static_cast<size_t>(t)] : nullptr, px, cfg.w, feat);
                const double norm = feat.norm();
                if (norm > 1e-10) feat /= norm;
                const Vec alpha = solver.solve(feat);
                uint8_t label;
                if (cfg.method == Method::src) {
                    try {
                        label = static_cast<uint8_t>(baselines::src_decide(alpha, W).label + 1);
                    } catch (const UndecidablePixel&) {
                        label = 0;
                        ++undecidable;
                    }
                } else {
                    label = static_cast<uint8_t>(argmax_lowest(W * alpha) + 1);
                }
                lab.at(px.x, px.y) = label;
            }
        }
        out.undecidable += undecidable;
        out.labels.push_back(std::move(lab));
    }
    return out;
}

baselines::IntensityClassifier fit_intensity(const std::vector<PatientStack>& stacks) {
    std::array<std::vector<double>, 3> samples;
    for (size_t i = 0; i < stacks.size(); ++i) {
        check_stack(stacks[i], i, true);
        for (size_t t = 0; t < stacks[i].images.size(); ++t)
            for (size_t k = 0; k < stacks[i].images[t].size(); ++k) {
                const uint8_t l = stacks[i].labels[t].data[k];
                if (l >= 1 && l <= 3) samples[l - 1].push_back(stacks[i].images[t].data[k]);
            }
    }
    return baselines::IntensityClassifier::fit(samples);
}

LabelStack segment_intensity(const baselines::IntensityClassifier& ic, const CtStack& stack, const MaskStack* masks) {
    LabelStack out;
    for (size_t t = 0; t < stack.size(); ++t) {
        const Slice& img = stack[t];
        const Mask m = masks ? (*masks)[t] : imaging::candidate_region(img);
        LabelMap lab(img.width, img.height, 0);
        for (size_t i = 0; i < img.size(); ++i)
            if (m.data[i]) lab.data[i] = static_cast<uint8_t>(ic.classify(img.data[i]) + 1);
        out.push_back(std::move(lab));
    }
    return out;
}

PatientStack load_patient(const std::filesystem::path& dir, bool need_labels) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir / "images")) throw InputError("images not found in " + dir.string());
    PatientStack s;
    for (const auto& f : pgm::list_slices(dir / "images")) s.images.push_back(pgm::to_slice(pgm::read(f)));
    if (s.images.empty()) throw InputError("images not found in " + dir.string());
    if (fs::is_directory(dir / "labels")) {
        for (const auto& f : pgm::list_slices(dir / "labels")) s.labels.push_back(pgm::to_labels(pgm::read(f)));
    }
    if (need_labels && s.labels.empty()) throw InputError("labels not found");
    if (!s.labels.empty() && s.labels.size() != s.images.size()) {
        throw InputError("label count " + std::to_string(s.labels.size()) + " does not match slice count " +
                         std::to_string(s.images.size()) + " in " + dir.string());
    }
    if (fs::is_directory(dir / "mask")) {
        for (const auto& f : pgm::list_slices(dir / "mask")) s.masks.push_back(pgm::to_mask(pgm::read(f)));
        if (s.masks.size() != s.images.size()) throw InputError("mask count does not match slice count");
    }
    check_stack(s, 0, !s.labels.empty());
    return s;
}

namespace {

std::string slice_name(size_t t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slice_%03zu.pgm", t);
    return buf;
}

} // namespace

void save_labels(const std::filesystem::path& dir, const LabelStack& labels) {
    std::filesystem::create_directories(dir);
    for (size_t t = 0; t < labels.size(); ++t) pgm::write(dir / slice_name(t), pgm::from_labels(labels[t]));
}

void save_patient(const std::filesystem::path& dir, const PatientStack& s) {
    std::filesystem::create_directories(dir / "images");
    for (size_t t = 0; t < s.images.size(); ++t) pgm::write(dir / "images" / slice_name(t), pgm::from_slice(s.images[t]));
    if (!s.labels.empty()) save_labels(dir / "labels", s.labels);
    if (!s.masks.empty()) {
        std::filesystem::create_directories(dir / "mask");
        for (size_t t = 0; t < s.masks.size(); ++t) pgm::write(dir / "mask" / slice_name(t), pgm::from_mask(s.masks[t]));
    }
}

} // namespace flis
