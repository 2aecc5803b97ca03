#pragma once

#include "flis/imaging.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace flis::eval {

/// 2|A n B| / (|A| + |B|) from set sizes. Throws UndefinedMetric when both
/// sets are empty.
double dice(size_t intersection, size_t size_a, size_t size_b);

/// Dice of the pixels carrying `label` in two maps of equal size.
double dice(const LabelMap& a, const LabelMap& b, uint8_t label);

/// Same over all slices of a stack (one pooled volume).
double dice(const LabelStack& a, const LabelStack& b, uint8_t label);

struct DiceRow {
    int slice = 0;
    int label = 1;              // 1 brain, 2 csf, 3 subdural
    std::optional<double> dice; // empty when both sets are empty
};

/// One row per slice and class.
std::vector<DiceRow> dice_rows(const LabelStack& predicted, const LabelStack& truth);

/// "slice,class,dice" with class names and NA for undefined entries.
void write_dice_csv(std::ostream& out, const std::vector<DiceRow>& rows);

std::string class_name(int label);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation (n - 1), 0 for n < 2
    size_t n = 0;
};

/// NaN entries are skipped.
MeanSd mean_sd(const std::vector<double>& values);

std::string format_mean_sd(const MeanSd& m, int digits = 3);

/// Symbols of the complexity and memory estimators.
struct CostParams {
    double N = 4700;  // training patches per class
    double K = 120;   // per-class dictionary size
    double d = 242;   // feature length
    double L = 5;     // sparsity
    double Ix = 512;
    double Iy = 512;
    double Nt = 15;   // training patients
};

/// Per-pixel FLIS operation count: 9NK(2(d+3) + L^2) / (Ix Iy).
double ops_flis(const CostParams& p);
/// DDLS operation count per pixel: 9NK(2(d/2+3) + L^2).
double ops_ddls(const CostParams& p);
/// Bytes per partition: (d+3) 3K 16.
double mem_flis(const CostParams& p);
/// (d/2+3) 3K 16 Ix Iy.
double mem_ddls(const CostParams& p);
/// (d/2)^2 Nt Ix Iy 16.
double mem_src(const CostParams& p);

/// Text table of all estimators: operation counts at `ops`, memory at `mem`
/// (both FLIS feature-length readings), scaled by P when P > 1.
std::string estimate_report(const CostParams& ops, const CostParams& mem, int P = 1);

} // namespace flis::eval
