#include "flis/pgm.hpp"

#include "flis/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace flis::pgm {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
int header_int(const std::string& buf, size_t& pos, const std::string& path) {
    while (pos < buf.size()) {
        if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
            ++pos;
        } else if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    size_t start = pos;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos || pos - start > 9) throw FormatError("pgm: bad header in " + path);
    return std::stoi(buf.substr(start, pos - start));
}

} // namespace

Image read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') throw FormatError("pgm: not a binary graymap: " + path.string());
    size_t pos = 2;
    Image img;
    img.width = header_int(buf, pos, path.string());
    img.height = header_int(buf, pos, path.string());
    img.maxval = header_int(buf, pos, path.string());
    if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 65535) {
        throw FormatError("pgm: invalid dimensions or maxval in " + path.string());
    }
    if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
        throw FormatError("pgm: bad header in " + path.string());
    }
    ++pos;
    const size_t n = static_cast<size_t>(img.width) * img.height;
    const size_t bytes = img.maxval > 255 ? 2 : 1;
    if (buf.size() - pos < n * bytes) throw FormatError("pgm: truncated pixel data in " + path.string());
    img.pixels.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    for (size_t i = 0; i < n; ++i) {
        img.pixels[i] = bytes == 2 ? static_cast<uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
        if (img.pixels[i] > img.maxval) throw FormatError("pgm: sample exceeds maxval in " + path.string());
    }
    return img;
}

void write(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
    std::string data;
    data.reserve(img.pixels.size() * 2);
    for (uint16_t v : img.pixels) {
        if (img.maxval > 255) data.push_back(static_cast<char>(v >> 8));
        data.push_back(static_cast<char>(v & 0xff));
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw InputError("write failed: " + path.string());
}

Slice to_slice(const Image& img) {
    Slice s(img.width, img.height, 0.0);
    for (size_t i = 0; i < s.size(); ++i) s.data[i] = static_cast<double>(img.pixels[i]) / img.maxval;
    return s;
}

LabelMap to_labels(const Image& img) {
    LabelMap l(img.width, img.height, 0);
    for (size_t i = 0; i < l.size(); ++i) {
        if (img.pixels[i] > 3) throw FormatError("pgm: label value " + std::to_string(img.pixels[i]) + " outside 0..3");
        l.data[i] = static_cast<uint8_t>(img.pixels[i]);
    }
    return l;
}

Mask to_mask(const Image& img) {
    Mask m(img.width, img.height, 0);
    for (size_t i = 0; i < m.size(); ++i) m.data[i] = img.pixels[i] ? 1 : 0;
    return m;
}

Image from_slice(const Slice& s, int maxval) {
    Image img{s.width, s.height, maxval, std::vector<uint16_t>(s.size())};
    for (size_t i = 0; i < s.size(); ++i)
        img.pixels[i] = static_cast<uint16_t>(std::lround(std::clamp(s.data[i], 0.0, 1.0) * maxval));
    return img;
}

Image from_labels(const LabelMap& labels) {
    Image img{labels.width, labels.height, 255, std::vector<uint16_t>(labels.size())};
    std::copy(labels.data.begin(), labels.data.end(), img.pixels.begin());
    return img;
}

Image from_mask(const Mask& m) {
    Image img{m.width, m.height, 255, std::vector<uint16_t>(m.size())};
    for (size_t i = 0; i < m.size(); ++i) img.pixels[i] = m.data[i] ? 255 : 0;
    return img;
}

std::vector<std::filesystem::path> list_slices(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace flis::pgm
