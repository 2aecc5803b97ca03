#include "doctest.h"

#include "flis/error.hpp"
#include "flis/evaluation.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace flis;
using namespace flis::eval;

TEST_CASE("dice on set sizes") {
    CHECK(dice(4, 4, 4) == 1.0);
    CHECK(dice(0, 3, 5) == 0.0);
    CHECK(dice(2, 4, 4) == 0.5);
    CHECK(dice(0, 0, 3) == 0.0);
    CHECK_THROWS_AS(dice(0, 0, 0), UndefinedMetric);
    CHECK_THROWS_AS(dice(5, 4, 6), InvalidArgument);
}

TEST_CASE("dice on label maps matches a set-based count") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> lab(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        LabelMap a(13, 9, 0), b(13, 9, 0);
        for (auto& v : a.data) v = static_cast<uint8_t>(lab(rng));
        for (auto& v : b.data) v = static_cast<uint8_t>(lab(rng));
        for (uint8_t c = 1; c <= 3; ++c) {
            std::set<size_t> A, B, I;
            for (size_t i = 0; i < a.size(); ++i) {
                if (a.data[i] == c) A.insert(i);
                if (b.data[i] == c) B.insert(i);
                if (a.data[i] == c && b.data[i] == c) I.insert(i);
            }
            if (A.empty() && B.empty()) continue;
            CHECK(dice(a, b, c) == doctest::Approx(2.0 * I.size() / (A.size() + B.size())).epsilon(1e-15));
        }
        CHECK(dice(a, a, 1) == 1.0);
    }
}

TEST_CASE("dice over a stack pools slices; rows mark empty classes") {
    LabelMap t0(2, 1, 0), t1(2, 1, 0), p0(2, 1, 0), p1(2, 1, 0);
    t0.data = {1, 1};
    p0.data = {1, 0};
    t1.data = {2, 0};
    p1.data = {2, 1};
    const LabelStack truth{t0, t1}, pred{p0, p1};
    // brain: inter 1, |pred| 2, |truth| 2
    CHECK(dice(pred, truth, 1) == 0.5);
    const auto rows = dice_rows(pred, truth);
    REQUIRE(rows.size() == 6);
    CHECK_FALSE(rows[2].dice.has_value());
    std::ostringstream csv;
    write_dice_csv(csv, rows);
    CHECK(csv.str() ==
          "slice,class,dice\n0,brain,0.666667\n0,csf,NA\n0,subdural,NA\n"
          "1,brain,0.000000\n1,csf,1.000000\n1,subdural,NA\n");
    CHECK_THROWS_AS(dice(pred, LabelStack{t0}, 1), InvalidArgument);
}

TEST_CASE("mean and sample deviation skip NaN") {
    const MeanSd m = mean_sd({1.0, 2.0, std::nan(""), 4.0});
    CHECK(m.n == 3);
    CHECK(m.mean == doctest::Approx(7.0 / 3));
    const double mu = 7.0 / 3;
    const double var = ((1 - mu) * (1 - mu) + (2 - mu) * (2 - mu) + (4 - mu) * (4 - mu)) / 2;
    CHECK(m.sd == doctest::Approx(std::sqrt(var)));
    CHECK(mean_sd({5.0}).sd == 0.0);
    CHECK(format_mean_sd({0.91234, 0.0456, 3}) == "0.912+-0.046");
}

TEST_CASE("cost formulas at the reference setting") {
    CostParams p;
    // hand-expanded: 9 * 4700 * 120 * (2 * 245 + 25) / 512^2
    CHECK(ops_flis(p) == doctest::Approx(9.0 * 4700 * 120 * 515 / 262144.0).epsilon(1e-14));
    CHECK(ops_flis(p) == doctest::Approx(9972.2).epsilon(1e-5));
    CHECK(ops_ddls(p) == doctest::Approx(9.0 * 4700 * 120 * (2 * 124 + 25)).epsilon(1e-14));
    CostParams m = p;
    m.K = 80;
    CHECK(mem_flis(m) == 940800.0);
    m.d = 121;
    CHECK(mem_flis(m) == 476160.0);
    m.d = 242;
    CHECK(mem_ddls(m) == doctest::Approx(124.0 * 240 * 16 * 262144).epsilon(1e-14));
    CHECK(mem_src(m) == doctest::Approx(121.0 * 121 * 15 * 262144 * 16).epsilon(1e-14));
}

TEST_CASE("estimate report lists every quantity and scales memory by P") {
    CostParams ops, mem;
    mem.K = 80;
    const std::string one = estimate_report(ops, mem);
    for (const char* key : {"C_FLIS", "C_DDLS", "M_FLIS ", "M_FLIS_intensity_only", "M_DDLS", "M_SRC", "note:"})
        CHECK(one.find(key) != std::string::npos);
    CHECK(one.find("940800") != std::string::npos);
    CHECK(one.find("476160") != std::string::npos);
    const std::string twelve = estimate_report(ops, mem, 12);
    CHECK(twelve.find("1.12896e+07") != std::string::npos);
    CHECK(class_name(3) == "subdural");
}
