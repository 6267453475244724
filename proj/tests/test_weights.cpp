#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "thermalnet/model.hpp"
#include "thermalnet/weights.hpp"

using namespace thermalnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("save, load, save is byte-identical and parameters round-trip") {
    TempDir dir("thermalnet_weights_test");
    Model a = build_small_cnn(16, 2);
    a.initialize(11);
    save_weights(a, dir.file("a.tmc"));

    Model b = build_small_cnn(16, 2);
    const LoadReport report = load_weights(b, dir.file("a.tmc"));
    CHECK(report.left_at_init.empty());
    CHECK(report.loaded.size() == b.named_params().size());

    save_weights(b, dir.file("b.tmc"));
    CHECK(slurp(dir.file("a.tmc")) == slurp(dir.file("b.tmc")));

    // loaded values equal the f32-quantized originals, bit for bit
    auto a_refs = a.named_params();
    auto b_refs = b.named_params();
    REQUIRE(a_refs.size() == b_refs.size());
    for (size_t i = 0; i < a_refs.size(); ++i) {
        for (size_t e = 0; e < a_refs[i].value->size(); ++e) {
            CHECK((*b_refs[i].value)[e] == static_cast<double>(static_cast<float>((*a_refs[i].value)[e])));
        }
    }
}

TEST_CASE("base-only transfer leaves the head at its own initialization") {
    TempDir dir("thermalnet_transfer_test");
    Model donor = build_small_cnn(16, 2);
    donor.initialize(3);
    save_weights(donor, dir.file("base.tmc"), WeightScope::kBase);

    Model receiver = build_small_cnn(16, 2);
    receiver.initialize(17);
    std::map<std::string, Tensor> head_before;
    for (const ParamRef& ref : receiver.named_params()) {
        if (!ref.base) head_before.emplace(ref.name, *ref.value);
    }

    const LoadReport report = load_weights(receiver, dir.file("base.tmc"));
    CHECK(!report.left_at_init.empty());
    for (const std::string& name : report.left_at_init) {
        CHECK(name.find("dense") != std::string::npos);
    }
    for (const ParamRef& ref : receiver.named_params()) {
        if (ref.base) continue;
        const Tensor& before = head_before.at(ref.name);
        for (size_t e = 0; e < before.size(); ++e) CHECK((*ref.value)[e] == before[e]);
    }
}

TEST_CASE("corrupt magic leaves the model untouched") {
    TempDir dir("thermalnet_magic_test");
    Model m = build_small_cnn(16, 2);
    m.initialize(5);
    save_weights(m, dir.file("w.tmc"));

    std::vector<uint8_t> bytes = slurp(dir.file("w.tmc"));
    bytes[0] = 'X';
    spit(dir.file("bad.tmc"), bytes);

    const Tensor snapshot = *m.named_params()[0].value;
    CHECK_THROWS_WITH_AS(load_weights(m, dir.file("bad.tmc")), "weight file: bad magic", std::runtime_error);
    const Tensor& after = *m.named_params()[0].value;
    for (size_t i = 0; i < snapshot.size(); ++i) CHECK(after[i] == snapshot[i]);
}

TEST_CASE("crc catches single-bit corruption anywhere") {
    TempDir dir("thermalnet_crc_test");
    Model m = build_small_cnn(16, 2);
    m.initialize(5);
    save_weights(m, dir.file("w.tmc"));
    const std::vector<uint8_t> original = slurp(dir.file("w.tmc"));

    Rng rng(1);
    for (int trial = 0; trial < 16; ++trial) {
        std::vector<uint8_t> bytes = original;
        const size_t byte = 4 + rng.below(bytes.size() - 4);  // keep the magic intact
        bytes[byte] ^= static_cast<uint8_t>(1u << rng.below(8));
        spit(dir.file("flip.tmc"), bytes);
        Model victim = build_small_cnn(16, 2);
        CHECK_THROWS_AS(load_weights(victim, dir.file("flip.tmc")), std::runtime_error);
    }
}

TEST_CASE("truncated file is rejected") {
    TempDir dir("thermalnet_trunc_test");
    Model m = build_small_cnn(16, 2);
    m.initialize(5);
    save_weights(m, dir.file("w.tmc"));
    std::vector<uint8_t> bytes = slurp(dir.file("w.tmc"));
    bytes.resize(bytes.size() / 2);
    spit(dir.file("half.tmc"), bytes);
    CHECK_THROWS_AS(load_weights(m, dir.file("half.tmc")), std::runtime_error);
}

TEST_CASE("architecture mismatches are reported by tensor name") {
    TempDir dir("thermalnet_mismatch_test");
    Model donor = build_small_cnn(16, 2);
    donor.initialize(5);
    save_weights(donor, dir.file("w.tmc"));

    // same tensor names, different head width: shape mismatch named
    Model narrow = build_small_cnn(16, 2, 16);
    CHECK_THROWS_WITH_AS(load_weights(narrow, dir.file("w.tmc")),
                         doctest::Contains("shape mismatch for dense."), std::runtime_error);

    // different architecture: unknown tensor names listed in the diff
    Model vgg = build_vgg19(32, 2);
    CHECK_THROWS_WITH_AS(load_weights(vgg, dir.file("w.tmc")), doctest::Contains("not present in model: conv1."),
                         std::runtime_error);
}
