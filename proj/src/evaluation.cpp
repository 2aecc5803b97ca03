#include "flis/evaluation.hpp"

#include "flis/error.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace flis::eval {

double dice(size_t intersection, size_t size_a, size_t size_b) {
    if (size_a + size_b == 0) throw UndefinedMetric("dice: both sets are empty");
    if (intersection > size_a || intersection > size_b) throw InvalidArgument("dice: intersection exceeds a set size");
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(size_a + size_b);
}

namespace {

void count(const LabelMap& a, const LabelMap& b, uint8_t label, size_t& inter, size_t& na, size_t& nb) {
    if (a.width != b.width || a.height != b.height) throw InvalidArgument("dice: label maps differ in size");
    for (size_t i = 0; i < a.size(); ++i) {
        const bool in_a = a.data[i] == label, in_b = b.data[i] == label;
        na += in_a;
        nb += in_b;
        inter += in_a && in_b;
    }
}

} // namespace

double dice(const LabelMap& a, const LabelMap& b, uint8_t label) {
    size_t inter = 0, na = 0, nb = 0;
    count(a, b, label, inter, na, nb);
    return dice(inter, na, nb);
}

double dice(const LabelStack& a, const LabelStack& b, uint8_t label) {
    if (a.size() != b.size()) throw InvalidArgument("dice: stacks differ in length");
    size_t inter = 0, na = 0, nb = 0;
    for (size_t t = 0; t < a.size(); ++t) count(a[t], b[t], label, inter, na, nb);
    return dice(inter, na, nb);
}

std::vector<DiceRow> dice_rows(const LabelStack& predicted, const LabelStack& truth) {
    if (predicted.size() != truth.size()) throw InvalidArgument("dice: stacks differ in length");
    std::vector<DiceRow> rows;
    for (size_t t = 0; t < truth.size(); ++t)
        for (int label = 1; label <= 3; ++label) {
            DiceRow r;
            r.slice = static_cast<int>(t);
            r.label = label;
            try {
                r.dice = dice(predicted[t], truth[t], static_cast<uint8_t>(label));
            } catch (const UndefinedMetric&) {
            }
            rows.push_back(r);
        }
    return rows;
}

std::string class_name(int label) {
    switch (label) {
    case 0: return "background";
    case 1: return "brain";
    case 2: return "csf";
    case 3: return "subdural";
    }
    return "unknown";
}

void write_dice_csv(std::ostream& out, const std::vector<DiceRow>& rows) {
    out << "slice,class,dice\n";
    char buf[32];
    for (const auto& r : rows) {
        out << r.slice << ',' << class_name(r.label) << ',';
        if (r.dice) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.dice);
            out << buf;
        } else {
            out << "NA";
        }
        out << '\n';
    }
}

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd m;
    double sum = 0.0;
    for (double v : values)
        if (!std::isnan(v)) {
            sum += v;
            ++m.n;
        }
    if (m.n == 0) {
        m.mean = std::nan("");
        return m;
    }
    m.mean = sum / static_cast<double>(m.n);
    if (m.n > 1) {
        double ss = 0.0;
        for (double v : values)
            if (!std::isnan(v)) ss += (v - m.mean) * (v - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(m.n - 1));
    }
    return m;
}

std::string format_mean_sd(const MeanSd& m, int digits) {
    if (m.n == 0) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f+-%.*f", digits, m.mean, digits, m.sd);
    return buf;
}

double ops_flis(const CostParams& p) {
    return 9.0 * p.N * p.K * (2.0 * (p.d + 3.0) + p.L * p.L) / (p.Ix * p.Iy);
}

double ops_ddls(const CostParams& p) { return 9.0 * p.N * p.K * (2.0 * (p.d / 2.0 + 3.0) + p.L * p.L); }

double mem_flis(const CostParams& p) { return (p.d + 3.0) * 3.0 * p.K * 16.0; }

double mem_ddls(const CostParams& p) { return (p.d / 2.0 + 3.0) * 3.0 * p.K * 16.0 * p.Ix * p.Iy; }

double mem_src(const CostParams& p) { return (p.d / 2.0) * (p.d / 2.0) * p.Nt * p.Ix * p.Iy * 16.0; }

std::string estimate_report(const CostParams& ops, const CostParams& mem, int P) {
    std::ostringstream out;
    char buf[160];
    auto line = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%-22s %.6g\n", key, v);
        out << buf;
    };
    std::snprintf(buf, sizeof buf, "# operations per pixel: N=%g K=%g d=%g L=%g image=%gx%g\n", ops.N, ops.K, ops.d,
                  ops.L, ops.Ix, ops.Iy);
    out << buf;
    line("C_FLIS", ops_flis(ops));
    line("C_DDLS", ops_ddls(ops));
    const double scale = P > 1 ? P : 1;
    std::snprintf(buf, sizeof buf, "# memory in bytes%s: K=%g d=%g Nt=%g image=%gx%g\n",
                  P > 1 ? (" for P=" + std::to_string(P) + " partitions").c_str() : " per partition", mem.K, mem.d,
                  mem.Nt, mem.Ix, mem.Iy);
    out << buf;
    CostParams half = mem;
    half.d = mem.d / 2.0;
    line("M_FLIS", scale * mem_flis(mem));
    line("M_FLIS_intensity_only", scale * mem_flis(half));
    line("M_DDLS", scale * mem_ddls(mem));
    line("M_SRC", scale * mem_src(mem));
    out << "note: M_FLIS counts the full feature length d (intensity and distance halves); "
           "M_FLIS_intensity_only evaluates the same formula with d/2. The two readings differ by "
           "roughly a factor of two and both are reported.\n";
    return out.str();
}

} // namespace flis::eval
