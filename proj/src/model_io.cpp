#include "flis/model_io.hpp"

#include "flis/error.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace flis::model_io {

namespace {

constexpr char kMagic[5] = {'F', 'L', 'I', 'S', '\x01'};

static_assert(std::endian::native == std::endian::little, "model files are written on little-endian hosts only");

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string header_text(const Model& m) {
    const TrainConfig& c = m.config;
    std::ostringstream h;
    h << "version=" << kFormatVersion << '\n'
      << "method=" << to_string(c.method) << '\n'
      << "P=" << m.P() << '\n'
      << "w=" << c.w << '\n'
      << "K=" << c.hp.K << '\n'
      << "d=" << m.feature_dim() << '\n'
      << "cols=" << m.atoms() << '\n'
      << "beta=" << fmt_double(c.hp.beta) << '\n'
      << "rho=" << fmt_double(c.hp.rho) << '\n'
      << "lambda=" << fmt_double(c.hp.lambda) << '\n'
      << "lambda1=" << fmt_double(c.hp.lambda1) << '\n'
      << "max_iters=" << c.hp.max_iters << '\n'
      << "tol=" << fmt_double(c.hp.tol) << '\n'
      << "odl_epochs=" << c.hp.odl_epochs << '\n'
      << "odl_batch=" << c.hp.odl_batch << '\n'
      << "quota=" << c.quota << '\n'
      << "bins=" << c.bins << '\n'
      << "seed=" << c.seed << '\n'
      << "normalize_distance=" << (c.normalize_distance ? 1 : 0) << '\n'
      << "lambda_infer=" << fmt_double(c.lambda_infer) << '\n'
      << "src_atoms=" << c.src_atoms << '\n'
      << "mask_source=" << to_string(c.mask_source) << '\n';
    return h.str();
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_matrix(std::string& out, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const auto bits = std::bit_cast<uint64_t>(m(r, c));
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
}

Mat get_matrix(const std::string& in, size_t& pos, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
            m(r, c) = std::bit_cast<double>(bits);
            pos += 8;
        }
    return m;
}

class HeaderFields {
public:
    explicit HeaderFields(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError("model header: malformed line '" + line + "'");
            kv_[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }

    const std::string& str(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw FormatError("model header: missing key '" + key + "'");
        return it->second;
    }

    long long integer(const std::string& key) const {
        const std::string& v = str(key);
        char* end = nullptr;
        const long long x = std::strtoll(v.c_str(), &end, 10);
        if (v.empty() || *end) throw FormatError("model header: '" + key + "' is not an integer");
        return x;
    }

    uint64_t u64(const std::string& key) const {
        const std::string& v = str(key);
        char* end = nullptr;
        const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
        if (v.empty() || *end) throw FormatError("model header: '" + key + "' is not an integer");
        return x;
    }

    double real(const std::string& key) const {
        const std::string& v = str(key);
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || *end) throw FormatError("model header: '" + key + "' is not a number");
        return x;
    }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace

std::string serialize(const Model& model) {
    const std::string header = header_text(model);
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, static_cast<uint32_t>(header.size()));
    out += header;
    for (const auto& pm : model.parts) {
        if (pm.D.rows() != model.feature_dim() || pm.D.cols() != model.atoms() || pm.W.rows() != 3 ||
            pm.W.cols() != model.atoms()) {
            throw InvalidArgument("serialize: partition matrices have inconsistent dimensions");
        }
        put_matrix(out, pm.D);
        put_matrix(out, pm.W);
    }
    return out;
}

size_t partition_offset(const Model& model, int p) {
    const size_t per = static_cast<size_t>((model.feature_dim() + 3) * model.atoms()) * 8;
    return sizeof kMagic + 4 + header_text(model).size() + per * static_cast<size_t>(p);
}

Model deserialize(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic("model: bad magic");
    if (bytes.size() < sizeof kMagic) throw Truncated(-1, "model: truncated header");
    if (bytes[4] != kMagic[4]) throw VersionMismatch("model: unsupported format revision");
    if (bytes.size() < sizeof kMagic + 4) throw Truncated(-1, "model: truncated header");
    uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[5 + i])) << (8 * i);
    size_t pos = sizeof kMagic + 4;
    if (bytes.size() - pos < hlen) throw Truncated(-1, "model: truncated header");
    const HeaderFields h(bytes.substr(pos, hlen));
    pos += hlen;

    const long long version = h.integer("version");
    if (version != kFormatVersion) {
        throw VersionMismatch("model: format version " + std::to_string(version) + ", expected " +
                              std::to_string(kFormatVersion));
    }
    Model m;
    TrainConfig& c = m.config;
    try {
        c.method = parse_method(h.str("method"));
        c.mask_source = parse_mask_source(h.str("mask_source"));
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
    const long long P = h.integer("P");
    c.P = static_cast<int>(P);
    c.w = static_cast<int>(h.integer("w"));
    c.hp.K = static_cast<int>(h.integer("K"));
    c.hp.beta = h.real("beta");
    c.hp.rho = h.real("rho");
    c.hp.lambda = h.real("lambda");
    c.hp.lambda1 = h.real("lambda1");
    c.hp.max_iters = static_cast<int>(h.integer("max_iters"));
    c.hp.tol = h.real("tol");
    c.hp.odl_epochs = static_cast<int>(h.integer("odl_epochs"));
    c.hp.odl_batch = static_cast<int>(h.integer("odl_batch"));
    c.quota = static_cast<int>(h.integer("quota"));
    c.bins = static_cast<int>(h.integer("bins"));
    c.seed = h.u64("seed");
    c.normalize_distance = h.integer("normalize_distance") != 0;
    c.lambda_infer = h.real("lambda_infer");
    c.src_atoms = static_cast<int>(h.integer("src_atoms"));
    const long long d = h.integer("d"), cols = h.integer("cols");
    if (P < 1 || P > 100000 || d < 1 || d > 1000000 || cols < 1 || cols > 10000000) {
        throw FormatError("model header: implausible dimensions");
    }
    if (d != feature_length(c.method, c.w)) throw FormatError("model header: d does not match method and w");

    const size_t per = static_cast<size_t>((d + 3) * cols) * 8;
    for (int p = 0; p < c.P; ++p) {
        if (bytes.size() - pos < per) {
            throw Truncated(p, "model: file truncated inside partition " + std::to_string(p));
        }
        PartitionModel pm;
        pm.D = get_matrix(bytes, pos, d, cols);
        pm.W = get_matrix(bytes, pos, 3, cols);
        m.parts.push_back(std::move(pm));
    }
    if (pos != bytes.size()) throw FormatError("model: trailing bytes after last partition");
    return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    const std::string bytes = serialize(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

std::string checksum(const std::string& bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace flis::model_io
