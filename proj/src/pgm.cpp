#include "thermalnet/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace thermalnet {

namespace {

// Skips whitespace and '#' comments, then parses a decimal token.
long parse_header_int(const std::vector<uint8_t>& bytes, size_t& pos) {
    while (pos < bytes.size()) {
        const uint8_t c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
        throw std::runtime_error("pgm: malformed header");
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        value = value * 10 + (bytes[pos] - '0');
        if (value > 1000000000L) throw std::runtime_error("pgm: header value out of range");
        ++pos;
    }
    return value;
}

} // namespace

Image decode_pgm(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw std::runtime_error("pgm: bad magic number (binary P5 required)");
    }
    size_t pos = 2;
    const long width = parse_header_int(bytes, pos);
    const long height = parse_header_int(bytes, pos);
    const long maxval = parse_header_int(bytes, pos);
    if (width < 1 || height < 1) throw std::runtime_error("pgm: invalid dimensions");
    if (maxval < 1 || maxval > 65535) throw std::runtime_error("pgm: maxval out of range [1,65535]");
    // exactly one whitespace byte separates header and raster
    if (pos >= bytes.size()) throw std::runtime_error("pgm: truncated header");
    const uint8_t sep = bytes[pos];
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
        throw std::runtime_error("pgm: missing whitespace after maxval");
    }
    ++pos;

    const size_t count = static_cast<size_t>(width) * static_cast<size_t>(height);
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    if (bytes.size() - pos < count * bytes_per_sample) throw std::runtime_error("pgm: truncated payload");

    Image img(static_cast<int>(width), static_cast<int>(height));
    const double scale = 1.0 / static_cast<double>(maxval);
    for (size_t i = 0; i < count; ++i) {
        uint32_t raw;
        if (bytes_per_sample == 1) {
            raw = bytes[pos + i];
        } else {
            raw = (static_cast<uint32_t>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
        }
        img.pixels[i] = raw * scale;
    }
    return img;
}

std::vector<uint8_t> encode_pgm(const Image& img, int maxval) {
    if (maxval < 1 || maxval > 65535) throw std::invalid_argument("pgm: maxval out of range [1,65535]");
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                         std::to_string(maxval) + "\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.size() * (maxval > 255 ? 2 : 1));
    for (double v : img.pixels) {
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        const uint32_t q = static_cast<uint32_t>(std::lround(v * maxval));
        if (maxval > 255) {
            out.push_back(static_cast<uint8_t>((q >> 8) & 0xFF));
            out.push_back(static_cast<uint8_t>(q & 0xFF));
        } else {
            out.push_back(static_cast<uint8_t>(q));
        }
    }
    return out;
}

Image read_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

void write_pgm_file(const Image& img, const std::string& path, int maxval) {
    const std::vector<uint8_t> bytes = encode_pgm(img, maxval);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

} // namespace thermalnet
