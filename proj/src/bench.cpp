#include "flis/bench.hpp"

#include "flis/error.hpp"
#include "flis/evaluation.hpp"
#include "flis/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace flis::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void score(MethodScores& s, const LabelStack& predicted, const LabelStack& truth) {
    for (int c = 0; c < 3; ++c) {
        double v = std::nan("");
        try {
            v = eval::dice(predicted, truth, static_cast<uint8_t>(c + 1));
        } catch (const UndefinedMetric&) {
        }
        s.dice[static_cast<size_t>(c)].push_back(v);
    }
}

const MaskStack* test_masks(const PatientStack& p, MaskSource src) {
    if (src == MaskSource::truth) {
        if (p.masks.size() != p.images.size()) throw InputError("bench: truth masks requested but not available");
        return &p.masks;
    }
    return nullptr;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

const MethodScores* Comparison::find(const std::string& name) const {
    for (const auto& m : methods)
        if (m.method == name) return &m;
    return nullptr;
}

std::vector<PatientStack> to_stacks(const std::vector<synth::Phantom>& phantoms) {
    std::vector<PatientStack> out;
    for (const auto& p : phantoms) out.push_back({p.images, p.labels, p.masks});
    return out;
}

double mean_dice(const MethodScores& s, int cls) { return eval::mean_sd(s.dice[static_cast<size_t>(cls)]).mean; }

Comparison compare(const std::vector<PatientStack>& train_set, const std::vector<PatientStack>& test,
                   const BenchOptions& opts) {
    Comparison out;
    if (opts.intensity_reference) {
        MethodScores s;
        s.method = "intensity";
        auto t0 = Clock::now();
        const auto ic = fit_intensity(train_set);
        s.train_seconds = seconds_since(t0);
        t0 = Clock::now();
        for (const auto& p : test) score(s, segment_intensity(ic, p.images, test_masks(p, opts.test_masks)), p.labels);
        s.segment_seconds = seconds_since(t0);
        out.methods.push_back(std::move(s));
    }
    for (Method m : opts.methods) {
        TrainConfig cfg = opts.base;
        cfg.method = m;
        MethodScores s;
        s.method = to_string(m);
        auto t0 = Clock::now();
        const Model model = train(train_set, cfg);
        s.train_seconds = seconds_since(t0);
        t0 = Clock::now();
        for (const auto& p : test) score(s, segment(model, p.images, test_masks(p, opts.test_masks)).labels, p.labels);
        s.segment_seconds = seconds_since(t0);
        out.methods.push_back(std::move(s));
    }
    return out;
}

std::string format_table(const Comparison& c) {
    std::ostringstream o;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-10s %-16s %-16s %-16s %10s %10s\n", "method", "brain", "csf", "subdural",
                  "train_s", "segment_s");
    o << buf;
    for (const auto& m : c.methods) {
        std::snprintf(buf, sizeof buf, "%-10s %-16s %-16s %-16s %10.2f %10.2f\n", m.method.c_str(),
                      eval::format_mean_sd(eval::mean_sd(m.dice[0])).c_str(),
                      eval::format_mean_sd(eval::mean_sd(m.dice[1])).c_str(),
                      eval::format_mean_sd(eval::mean_sd(m.dice[2])).c_str(), m.train_seconds, m.segment_seconds);
        o << buf;
    }
    return o.str();
}

std::vector<SweepRow> sweep(const std::string& name, const std::vector<double>& values,
                            const std::vector<PatientStack>& train_pool, const std::vector<PatientStack>& test,
                            const BenchOptions& opts, int splits) {
    if (name != "w" && name != "K" && name != "train_size") {
        throw InvalidArgument("sweep: unknown parameter '" + name + "' (expected w, K or train_size)");
    }
    if (splits < 1) throw InvalidArgument("sweep: splits must be >= 1");
    std::vector<SweepRow> rows;
    for (double v : values) {
        BenchOptions o = opts;
        o.intensity_reference = false;
        const int iv = static_cast<int>(std::lround(v));
        int runs = 1;
        if (name == "w") o.base.w = iv;
        if (name == "K") o.base.hp.K = iv;
        if (name == "train_size") {
            if (iv < 1 || iv > static_cast<int>(train_pool.size())) {
                throw InvalidArgument("sweep: training size " + std::to_string(iv) + " outside 1.." +
                                      std::to_string(train_pool.size()));
            }
            runs = splits;
        }
        for (int split = 0; split < runs; ++split) {
            std::vector<PatientStack> train_set = train_pool;
            if (name == "train_size") {
                std::vector<size_t> idx(train_pool.size());
                std::iota(idx.begin(), idx.end(), size_t{0});
                Rng rng(derive_seed(opts.base.seed, {static_cast<uint64_t>(iv), static_cast<uint64_t>(split)}));
                rng.partial_shuffle(idx, static_cast<size_t>(iv));
                train_set.clear();
                for (int i = 0; i < iv; ++i) train_set.push_back(train_pool[idx[static_cast<size_t>(i)]]);
            }
            const Comparison c = compare(train_set, test, o);
            for (const auto& m : c.methods) {
                SweepRow r;
                r.sweep = name;
                r.value = v;
                r.method = m.method;
                r.split = split;
                for (int k = 0; k < 3; ++k) r.dice[static_cast<size_t>(k)] = mean_dice(m, k);
                rows.push_back(r);
            }
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "sweep,value,method,split,brain,csf,subdural\n";
    for (const auto& r : rows) {
        out << r.sweep << ',' << fmt(r.value) << ',' << r.method << ',' << r.split;
        for (double d : r.dice) out << ',' << (std::isnan(d) ? std::string("NA") : fmt(d));
        out << '\n';
    }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "sweep,value,method,split,brain,csf,subdural") {
        throw FormatError("sweep csv: unexpected header");
    }
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw FormatError("sweep csv: expected 7 fields in '" + line + "'");
        SweepRow r;
        r.sweep = f[0];
        r.value = std::strtod(f[1].c_str(), nullptr);
        r.method = f[2];
        r.split = std::atoi(f[3].c_str());
        for (int k = 0; k < 3; ++k)
            r.dice[static_cast<size_t>(k)] = f[4 + k] == "NA" ? std::nan("") : std::strtod(f[4 + k].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

} // namespace flis::bench
