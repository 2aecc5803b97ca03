// flis: train, segment, estimate, phantom, bench.

#include "CLI11.hpp"

#include "flis/bench.hpp"
#include "flis/config.hpp"
#include "flis/error.hpp"
#include "flis/evaluation.hpp"
#include "flis/model_io.hpp"
#include "flis/pipeline.hpp"
#include "flis/synthdata.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace flis;

namespace {

enum Exit { kOk = 0, kInternal = 1, kInput = 2, kFormat = 3 };

std::vector<PatientStack> load_training_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("training directory not found: " + dir.string());
    std::vector<fs::path> patients;
    if (fs::is_directory(dir / "images")) {
        patients.push_back(dir);
    } else {
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory()) patients.push_back(e.path());
        std::sort(patients.begin(), patients.end());
    }
    if (patients.empty()) throw InputError("no patient directories in " + dir.string());
    std::vector<PatientStack> out;
    for (const auto& p : patients) out.push_back(load_patient(p, true));
    return out;
}

void print_training_log(const TrainingLog& log) {
    static const char* names[3] = {"brain", "csf", "subdural"};
    for (const auto& p : log.partitions) {
        std::printf("partition %d: %lld samples per class\n", p.partition, static_cast<long long>(p.samples_per_class));
        for (size_t k = 0; k < p.reports.size(); ++k) {
            const TrainReport& r = p.reports[k];
            double rmin = 0, rmax = 0;
            if (!r.iterations.empty()) {
                rmin = rmax = r.iterations.front().rho_eff;
                for (const auto& it : r.iterations) {
                    rmin = std::min(rmin, it.rho_eff);
                    rmax = std::max(rmax, it.rho_eff);
                }
            }
            std::printf("  %-8s L=%d rho_eff=[%.4g, %.4g] objective %.6g -> %.6g (best iter %d of %zu%s)\n",
                        p.reports.size() == 3 ? names[k] : "joint", r.L, rmin, rmax, r.initial_objective,
                        r.final_objective, r.best_iteration, r.iterations.size(),
                        r.converged ? ", converged" : ", not converged");
            std::printf("    trace:");
            for (const auto& it : r.iterations) std::printf(" %.6g", it.objective);
            std::printf("\n");
        }
    }
}

eval::CostParams read_params(const fs::path& path, eval::CostParams p, double& k_mem, int& P) {
    std::ifstream in(path);
    if (!in) throw InputError("params file not found: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) throw InvalidArgument("params: expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        val.erase(std::remove_if(val.begin(), val.end(), ::isspace), val.end());
        char* end = nullptr;
        const double v = std::strtod(val.c_str(), &end);
        if (val.empty() || *end) throw InvalidArgument("params: '" + key + "' expects a number");
        if (key == "N") p.N = v;
        else if (key == "K") p.K = v;
        else if (key == "d") p.d = v;
        else if (key == "L") p.L = v;
        else if (key == "Ix") p.Ix = v;
        else if (key == "Iy") p.Iy = v;
        else if (key == "Nt") p.Nt = v;
        else if (key == "K_mem") k_mem = v;
        else if (key == "P") P = static_cast<int>(v);
        else throw InvalidArgument("params: unknown key '" + key + "'");
    }
    return p;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            // a..b steps by 2 for odd patch widths, by 1 otherwise
            const int a = std::stoi(item.substr(0, dots)), b = std::stoi(item.substr(dots + 2));
            const int step = (a % 2 == 1 && b % 2 == 1) ? 2 : 1;
            for (int v = a; v <= b; v += step) out.push_back(v);
        } else {
            out.push_back(std::stod(item));
        }
    }
    if (out.empty()) throw InvalidArgument("empty value list");
    return out;
}

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    int threads = 0;
};

RunConfig resolve(const CommonOpts& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    for (const auto& s : c.sets) apply_override(cfg, s);
    if (c.threads > 0) cfg.threads = c.threads;
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config, "key=value config file");
    cmd->add_option("--set", c.sets, "override one config key (key=value), repeatable");
    cmd->add_option("--threads", c.threads, "worker threads (results do not depend on it)");
}

int run(int argc, char** argv) {
    CLI::App app{"Dictionary-learning segmentation of CT brain stacks"};
    app.require_subcommand(1);

    // train
    CommonOpts train_common;
    std::string train_dir, model_out, train_method;
    long long train_seed = -1;
    auto* train_cmd = app.add_subcommand("train", "learn a model from labelled stacks");
    add_common(train_cmd, train_common);
    train_cmd->add_option("--train-dir", train_dir, "directory of patient directories (or a single patient)");
    train_cmd->add_option("--model,-o", model_out, "output model file");
    train_cmd->add_option("--method", train_method, "flis, ddls or src");
    train_cmd->add_option("--seed", train_seed, "random seed");

    // segment
    std::string seg_model, seg_stack, seg_out, seg_method, seg_csv;
    bool seg_truth = false, seg_truth_mask = false;
    int seg_threads = 0;
    auto* seg_cmd = app.add_subcommand("segment", "label a stack with a trained model");
    seg_cmd->add_option("--model,-m", seg_model, "model file")->required();
    seg_cmd->add_option("--stack", seg_stack, "patient directory (images/, optional labels/ and mask/)")->required();
    seg_cmd->add_option("--out,-o", seg_out, "output directory for label PGMs")->required();
    seg_cmd->add_option("--method", seg_method, "expected method of the model (flis, ddls, src)");
    seg_cmd->add_flag("--truth", seg_truth, "score against the stack's labels and write a dice CSV");
    seg_cmd->add_option("--dice-csv", seg_csv, "dice CSV path (default <out>/dice.csv)");
    seg_cmd->add_flag("--truth-mask", seg_truth_mask, "use the stack's mask/ instead of the candidate region");
    seg_cmd->add_option("--threads", seg_threads, "worker threads");

    // estimate
    eval::CostParams est;
    double k_mem = 80;
    int est_P = 1;
    std::string est_params;
    auto* est_cmd = app.add_subcommand("estimate", "print operation-count and memory estimates");
    est_cmd->add_option("--N", est.N, "training patches per class")->capture_default_str();
    est_cmd->add_option("--K", est.K, "per-class dictionary size for operation counts")->capture_default_str();
    est_cmd->add_option("--K-mem", k_mem, "per-class dictionary size for memory")->capture_default_str();
    est_cmd->add_option("--d", est.d, "feature length")->capture_default_str();
    est_cmd->add_option("--L", est.L, "sparsity")->capture_default_str();
    est_cmd->add_option("--Ix", est.Ix, "image width")->capture_default_str();
    est_cmd->add_option("--Iy", est.Iy, "image height")->capture_default_str();
    est_cmd->add_option("--Nt", est.Nt, "training patients")->capture_default_str();
    est_cmd->add_option("--P", est_P, "multiply memory by the number of partitions")->capture_default_str();
    est_cmd->add_option("--params", est_params, "key=value file (N, K, K_mem, d, L, Ix, Iy, Nt, P)");

    // phantom
    synth::PhantomSpec ph;
    int ph_train = 15, ph_test = 5, ph_size = 128;
    std::string ph_out;
    auto* ph_cmd = app.add_subcommand("phantom", "write a synthetic train/test suite");
    ph_cmd->add_option("--out,-o", ph_out, "output directory")->required();
    ph_cmd->add_option("--train", ph_train, "training patients")->capture_default_str();
    ph_cmd->add_option("--test", ph_test, "test patients")->capture_default_str();
    ph_cmd->add_option("--seed", ph.seed, "suite seed")->capture_default_str();
    ph_cmd->add_option("--slices", ph.slices, "slices per stack")->capture_default_str();
    ph_cmd->add_option("--size", ph_size, "slice width and height")->capture_default_str();
    ph_cmd->add_option("--noise", ph.noise_sigma, "noise sigma")->capture_default_str();
    ph_cmd->add_option("--subdural-lo", ph.subdural.lo, "subdural intensity band low end")->capture_default_str();
    ph_cmd->add_option("--subdural-hi", ph.subdural.hi, "subdural intensity band high end")->capture_default_str();

    // bench
    CommonOpts bench_common;
    int b_train = 15, b_test = 5;
    uint64_t b_seed = 7;
    std::string b_methods = "flis,ddls,src", b_sweep, b_csv;
    int b_splits = 10;
    auto* bench_cmd = app.add_subcommand("bench", "compare methods on the phantom suite");
    add_common(bench_cmd, bench_common);
    bench_cmd->add_option("--train", b_train, "training patients")->capture_default_str();
    bench_cmd->add_option("--test", b_test, "test patients")->capture_default_str();
    bench_cmd->add_option("--phantom-seed", b_seed, "phantom suite seed")->capture_default_str();
    bench_cmd->add_option("--methods", b_methods, "comma separated methods")->capture_default_str();
    bench_cmd->add_option("--sweep", b_sweep, "PARAM=v1,v2,... with PARAM in w, K, train_size (a..b allowed)");
    bench_cmd->add_option("--splits", b_splits, "random splits per training size")->capture_default_str();
    bench_cmd->add_option("--csv", b_csv, "write sweep rows to this CSV file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    if (*train_cmd) {
        RunConfig cfg = resolve(train_common);
        if (!train_dir.empty()) cfg.train_dir = train_dir;
        if (!model_out.empty()) cfg.model = model_out;
        if (!train_method.empty()) cfg.train.method = parse_method(train_method);
        if (train_seed >= 0) cfg.train.seed = static_cast<uint64_t>(train_seed);
        if (cfg.train_dir.empty()) throw InvalidArgument("train: --train-dir (or train_dir in the config) is required");
        if (cfg.model.empty()) throw InvalidArgument("train: --model (or model in the config) is required");
        const auto stacks = load_training_dir(cfg.train_dir);
        TrainingLog log;
        const Model model = train(stacks, cfg.train, &log);
        print_training_log(log);
        const std::string bytes = model_io::serialize(model);
        model_io::save_model(model, cfg.model);
        std::printf("model %s (%zu bytes)\nchecksum %s\n", cfg.model.c_str(), bytes.size(),
                    model_io::checksum(bytes).c_str());
        return kOk;
    }

    if (*seg_cmd) {
        if (seg_threads > 0) omp_set_num_threads(seg_threads);
        const Model model = model_io::load_model(seg_model);
        if (!seg_method.empty() && parse_method(seg_method) != model.method()) {
            throw InvalidArgument("segment: model was trained with method " + to_string(model.method()) +
                                  ", not " + seg_method);
        }
        const PatientStack stack = load_patient(seg_stack, seg_truth);
        if (seg_truth_mask && stack.masks.empty()) throw InputError("mask not found");
        const Segmentation seg = segment(model, stack.images, seg_truth_mask ? &stack.masks : nullptr);
        save_labels(seg_out, seg.labels);
        if (seg.remapped) {
            std::fprintf(stderr, "warning: stack has %zu slices, fewer than P=%d; slices spread over partitions\n",
                         stack.images.size(), model.P());
        }
        if (seg.undecidable) std::fprintf(stderr, "warning: %zu undecidable pixels left as background\n", seg.undecidable);
        std::printf("segmented %zu slices -> %s\n", seg.labels.size(), seg_out.c_str());
        if (seg_truth) {
            const fs::path csv = seg_csv.empty() ? fs::path(seg_out) / "dice.csv" : fs::path(seg_csv);
            std::ofstream out(csv);
            if (!out) throw InputError("cannot write " + csv.string());
            eval::write_dice_csv(out, eval::dice_rows(seg.labels, stack.labels));
            for (int c = 1; c <= 3; ++c) {
                try {
                    std::printf("dice %-8s %.4f\n", eval::class_name(c).c_str(),
                                eval::dice(seg.labels, stack.labels, static_cast<uint8_t>(c)));
                } catch (const UndefinedMetric&) {
                    std::printf("dice %-8s NA\n", eval::class_name(c).c_str());
                }
            }
            std::printf("dice report %s\n", csv.string().c_str());
        }
        return kOk;
    }

    if (*est_cmd) {
        int P = est_P;
        if (!est_params.empty()) est = read_params(est_params, est, k_mem, P);
        eval::CostParams mem = est;
        mem.K = k_mem;
        std::fputs(eval::estimate_report(est, mem, P).c_str(), stdout);
        return kOk;
    }

    if (*ph_cmd) {
        ph.width = ph.height = ph_size;
        const synth::Suite suite = synth::generate_suite(ph, ph_train, ph_test);
        char name[32];
        for (size_t i = 0; i < suite.train.size(); ++i) {
            std::snprintf(name, sizeof name, "patient_%02zu", i);
            const auto& p = suite.train[i];
            save_patient(fs::path(ph_out) / "train" / name, {p.images, p.labels, p.masks});
        }
        for (size_t i = 0; i < suite.test.size(); ++i) {
            std::snprintf(name, sizeof name, "patient_%02zu", i);
            const auto& p = suite.test[i];
            save_patient(fs::path(ph_out) / "test" / name, {p.images, p.labels, p.masks});
        }
        std::printf("wrote %d training and %d test stacks to %s\n", ph_train, ph_test, ph_out.c_str());
        return kOk;
    }

    if (*bench_cmd) {
        const RunConfig cfg = resolve(bench_common);
        synth::PhantomSpec spec;
        spec.seed = b_seed;
        const synth::Suite suite = synth::generate_suite(spec, b_train, b_test);
        const auto train_pool = bench::to_stacks(suite.train);
        const auto test = bench::to_stacks(suite.test);
        bench::BenchOptions opts;
        opts.base = cfg.train;
        opts.methods.clear();
        std::stringstream ms(b_methods);
        std::string m;
        while (std::getline(ms, m, ',')) opts.methods.push_back(parse_method(m));

        if (b_sweep.empty()) {
            const auto cmp = bench::compare(train_pool, test, opts);
            std::fputs(bench::format_table(cmp).c_str(), stdout);
            return kOk;
        }
        const auto eq = b_sweep.find('=');
        if (eq == std::string::npos) throw InvalidArgument("bench: --sweep expects PARAM=values");
        const auto rows =
            bench::sweep(b_sweep.substr(0, eq), parse_list(b_sweep.substr(eq + 1)), train_pool, test, opts, b_splits);
        if (!b_csv.empty()) {
            std::ofstream out(b_csv);
            if (!out) throw InputError("cannot write " + b_csv);
            bench::write_sweep_csv(out, rows);
        }
        bench::write_sweep_csv(std::cout, rows);
        return kOk;
    }
    return kInternal;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFormat;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInput;
    } catch (const DegenerateClass& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInput;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInternal;
    }
}
