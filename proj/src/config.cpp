#include "flis/config.hpp"

#include "flis/error.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace flis {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end || x < -2147483647L || x > 2147483647L) {
        throw InvalidArgument("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    return static_cast<int>(x);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || *end || v[0] == '-') {
        throw InvalidArgument("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
    return x;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end) throw InvalidArgument("config: '" + key + "' expects a number, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw InvalidArgument("config: '" + key + "' expects 0 or 1, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    TrainConfig& t = cfg.train;
    if (key == "method") t.method = parse_method(value);
    else if (key == "w") t.w = to_int(key, value);
    else if (key == "P") t.P = to_int(key, value);
    else if (key == "K") t.hp.K = to_int(key, value);
    else if (key == "beta") t.hp.beta = to_double(key, value);
    else if (key == "rho") t.hp.rho = to_double(key, value);
    else if (key == "lambda") t.hp.lambda = to_double(key, value);
    else if (key == "lambda1") t.hp.lambda1 = to_double(key, value);
    else if (key == "max_iters") t.hp.max_iters = to_int(key, value);
    else if (key == "tol") t.hp.tol = to_double(key, value);
    else if (key == "odl_epochs") t.hp.odl_epochs = to_int(key, value);
    else if (key == "odl_batch") t.hp.odl_batch = to_int(key, value);
    else if (key == "quota") t.quota = to_int(key, value);
    else if (key == "bins") t.bins = to_int(key, value);
    else if (key == "seed") t.seed = to_u64(key, value);
    else if (key == "normalize_distance") t.normalize_distance = to_bool(key, value);
    else if (key == "lambda_infer") t.lambda_infer = to_double(key, value);
    else if (key == "src_atoms") t.src_atoms = to_int(key, value);
    else if (key == "mask_source") t.mask_source = parse_mask_source(value);
    else if (key == "train_dir") cfg.train_dir = value;
    else if (key == "model") cfg.model = value;
    else if (key == "threads") cfg.threads = to_int(key, value);
    else throw InvalidArgument("config: unknown key '" + key + "'");
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config: expected key=value, got '" + assignment + "'");
    apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string::npos) {
            throw InvalidArgument("config: line " + std::to_string(lineno) + " is not key=value");
        }
        apply_override(cfg, line);
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    apply_text(cfg, ss.str());
    return cfg;
}

std::string to_text(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    std::ostringstream o;
    o << "method = " << to_string(t.method) << '\n'
      << "w = " << t.w << '\n'
      << "P = " << t.P << '\n'
      << "K = " << t.hp.K << '\n'
      << "beta = " << fmt(t.hp.beta) << '\n'
      << "rho = " << fmt(t.hp.rho) << '\n'
      << "lambda = " << fmt(t.hp.lambda) << '\n'
      << "lambda1 = " << fmt(t.hp.lambda1) << '\n'
      << "max_iters = " << t.hp.max_iters << '\n'
      << "tol = " << fmt(t.hp.tol) << '\n'
      << "odl_epochs = " << t.hp.odl_epochs << '\n'
      << "odl_batch = " << t.hp.odl_batch << '\n'
      << "quota = " << t.quota << '\n'
      << "bins = " << t.bins << '\n'
      << "seed = " << t.seed << '\n'
      << "normalize_distance = " << (t.normalize_distance ? 1 : 0) << '\n'
      << "lambda_infer = " << fmt(t.lambda_infer) << '\n'
      << "src_atoms = " << t.src_atoms << '\n'
      << "mask_source = " << to_string(t.mask_source) << '\n'
      << "threads = " << cfg.threads << '\n';
    if (!cfg.train_dir.empty()) o << "train_dir = " << cfg.train_dir << '\n';
    if (!cfg.model.empty()) o << "model = " << cfg.model << '\n';
    return o.str();
}

} // namespace flis
