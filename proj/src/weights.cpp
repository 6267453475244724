#include "thermalnet/weights.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace thermalnet {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'C', 'W'};
constexpr uint16_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw std::runtime_error("weight file truncated");
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

} // namespace

uint32_t crc32_ieee(const uint8_t* data, size_t len, uint32_t seed) {
    static uint32_t table[256];
    static bool built = false;
    if (!built) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        built = true;
    }
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void save_weights(Model& m, const std::string& path, WeightScope scope) {
    std::vector<ParamRef> refs = m.named_params();
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);

    uint32_t count = 0;
    for (const ParamRef& ref : refs) {
        if (scope == WeightScope::kBase && !ref.base) continue;
        if (!ref.value) throw std::logic_error("save_weights: model not initialized");
        ++count;
    }
    put_u32(out, count);

    for (const ParamRef& ref : refs) {
        if (scope == WeightScope::kBase && !ref.base) continue;
        if (ref.name.size() > 0xFFFF) throw std::runtime_error("tensor name too long");
        put_u16(out, static_cast<uint16_t>(ref.name.size()));
        out.insert(out.end(), ref.name.begin(), ref.name.end());
        const Tensor& t = *ref.value;
        if (t.rank() > 0xFF) throw std::runtime_error("tensor rank too large");
        out.push_back(static_cast<uint8_t>(t.rank()));
        for (size_t d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
        for (size_t i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
    }
    put_u32(out, crc32_ieee(out.data(), out.size()));

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + path);
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("short write to " + path);
}

LoadReport load_weights(Model& m, const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    if (bytes.size() < 14) throw std::runtime_error("weight file truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw std::runtime_error("weight file: bad magic");
    const uint32_t stored_crc = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
    if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored_crc) {
        throw std::runtime_error("weight file: CRC mismatch (corrupt file)");
    }

    Reader r{bytes};
    r.pos = 4;
    const uint16_t version = r.u16();
    if (version != kVersion) throw std::runtime_error("weight file: unsupported version " + std::to_string(version));
    const uint32_t count = r.u32();

    std::map<std::string, Tensor> incoming;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        const uint8_t rank = r.u8();
        std::vector<size_t> shape;
        size_t total = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            shape.push_back(r.u32());
            total *= shape.back();
        }
        Tensor t(shape);
        for (size_t e = 0; e < total; ++e) t[e] = static_cast<double>(r.f32());
        incoming.emplace(std::move(name), std::move(t));
    }
    if (r.pos != bytes.size() - 4) throw std::runtime_error("weight file: trailing bytes before CRC");

    if (!m.initialized()) m.initialize(0);
    std::vector<ParamRef> refs = m.named_params();

    // validate everything before touching the model; the error carries the
    // full tensor-name diff
    std::map<std::string, Tensor*> model_tensors;
    for (const ParamRef& ref : refs) model_tensors.emplace(ref.name, ref.value);
    std::string unknown, mismatched;
    for (const auto& [name, tensor] : incoming) {
        auto it = model_tensors.find(name);
        if (it == model_tensors.end()) {
            unknown += " " + name;
        } else if (it->second->shape() != tensor.shape()) {
            mismatched += " " + name + " (file " + tensor.shape_str() + ", model " +
                          it->second->shape_str() + ")";
        }
    }
    if (!unknown.empty() || !mismatched.empty()) {
        std::string msg = "weight file does not match the model:";
        if (!unknown.empty()) msg += " tensors not present in model:" + unknown + ";";
        if (!mismatched.empty()) msg += " shape mismatch for" + mismatched;
        throw std::runtime_error(msg);
    }

    LoadReport report;
    for (const ParamRef& ref : refs) {
        auto it = incoming.find(ref.name);
        if (it == incoming.end()) {
            report.left_at_init.push_back(ref.name);
        } else {
            *ref.value = std::move(it->second);
            report.loaded.push_back(ref.name);
        }
    }
    return report;
}

} // namespace thermalnet
