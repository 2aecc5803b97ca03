#pragma once

#include "flis/pipeline.hpp"
#include "flis/synthdata.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace flis::bench {

struct BenchOptions {
    TrainConfig base;                                   // method is overridden per run
    std::vector<Method> methods{Method::flis, Method::ddls, Method::src};
    bool intensity_reference = true;                    // also score the intensity-only classifier
    MaskSource test_masks = MaskSource::candidate;
};

/// Per-class dice of every test patient for one method.
struct MethodScores {
    std::string method;                    // "flis", "ddls", "src" or "intensity"
    std::array<std::vector<double>, 3> dice; // brain, csf, subdural; NaN where undefined
    double train_seconds = 0.0;
    double segment_seconds = 0.0;
};

struct Comparison {
    std::vector<MethodScores> methods;
    const MethodScores* find(const std::string& name) const;
};

std::vector<PatientStack> to_stacks(const std::vector<synth::Phantom>& phantoms);

/// Trains every requested method on `train` and scores it on `test`.
Comparison compare(const std::vector<PatientStack>& train, const std::vector<PatientStack>& test,
                   const BenchOptions& opts);

/// Mean+-SD dice table, one row per method.
std::string format_table(const Comparison& c);

struct SweepRow {
    std::string sweep;  // "w", "K" or "train_size"
    double value = 0;
    std::string method;
    int split = 0;
    std::array<double, 3> dice{}; // mean over test patients
};

/// One training run per value of `sweep` ("w", "K" or "train_size"). For
/// train_size, `splits` random subsets of the training pool are drawn per
/// value (seeded from opts.base.seed); other sweeps use the full pool once.
std::vector<SweepRow> sweep(const std::string& sweep, const std::vector<double>& values,
                            const std::vector<PatientStack>& train_pool, const std::vector<PatientStack>& test,
                            const BenchOptions& opts, int splits = 10);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

/// Mean dice of a method's class over test patients.
double mean_dice(const MethodScores& s, int cls);

} // namespace flis::bench
