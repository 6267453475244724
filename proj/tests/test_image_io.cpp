#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "thermalnet/dataset.hpp"
#include "thermalnet/image.hpp"
#include "thermalnet/pgm.hpp"
#include "thermalnet/rng.hpp"

using namespace thermalnet;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("decode_pgm basics") {
    std::vector<uint8_t> data = bytes_of("P5\n2 2\n255\n");
    data.insert(data.end(), {0, 255, 128, 64});
    const Image img = decode_pgm(data);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.pixels[0] == doctest::Approx(0.0));
    CHECK(img.pixels[1] == doctest::Approx(1.0));
    CHECK(img.pixels[2] == doctest::Approx(0.50196).epsilon(1e-4));
    CHECK(img.pixels[3] == doctest::Approx(0.25098).epsilon(1e-4));
}

TEST_CASE("decode_pgm rejects bad input") {
    CHECK_THROWS(decode_pgm(bytes_of("P3\n2 2\n255\n0 0 0 0")));
    CHECK_THROWS(decode_pgm(bytes_of("P5\n2 2\n255\nab")));  // truncated payload
    std::vector<uint8_t> zero_max = bytes_of("P5\n1 1\n0\n");
    zero_max.push_back(0);
    CHECK_THROWS(decode_pgm(zero_max));
}

TEST_CASE("decode handles comments and 16-bit samples") {
    std::vector<uint8_t> data = bytes_of("P5\n# a comment\n1 1\n65535\n");
    data.insert(data.end(), {0xFF, 0xFF});
    const Image img = decode_pgm(data);
    CHECK(img.pixels[0] == doctest::Approx(1.0));
}

TEST_CASE("pgm round trip on quantized images") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Image img(7, 5);
        for (auto& p : img.pixels) p = std::round(rng.uniform() * 255.0) / 255.0;
        const Image back = decode_pgm(encode_pgm(img));
        REQUIRE(back.size() == img.size());
        for (size_t i = 0; i < img.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
    }
}

TEST_CASE("resize_bilinear") {
    Image constant(6, 4, 0.37);
    const Image bigger = resize_bilinear(constant, 11, 9);
    for (double v : bigger.pixels) CHECK(v == doctest::Approx(0.37));

    Image ramp(2, 2);
    ramp.at(0, 0) = 0.0;
    ramp.at(0, 1) = 1.0;
    ramp.at(1, 0) = 0.0;
    ramp.at(1, 1) = 1.0;
    const Image wide = resize_bilinear(ramp, 4, 2);
    for (int y = 0; y < 2; ++y) {
        CHECK(wide.at(y, 0) == doctest::Approx(0.0));
        CHECK(wide.at(y, 1) == doctest::Approx(1.0 / 3.0));
        CHECK(wide.at(y, 2) == doctest::Approx(2.0 / 3.0));
        CHECK(wide.at(y, 3) == doctest::Approx(1.0));
    }

    Rng rng(9);
    Image noise(8, 8);
    for (auto& p : noise.pixels) p = rng.uniform();
    const Image same = resize_bilinear(noise, 8, 8);
    for (size_t i = 0; i < noise.size(); ++i) CHECK(same.pixels[i] == doctest::Approx(noise.pixels[i]));

    CHECK_THROWS_AS(resize_bilinear(noise, 0, 4), std::invalid_argument);
}

TEST_CASE("to_input_tensor") {
    Image img(2, 2);
    img.pixels = {0.1, 0.2, 0.3, 0.4};
    const Tensor three = to_input_tensor(img, 3);
    CHECK(three.shape() == std::vector<size_t>{3, 2, 2});
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) CHECK(three[c * 4 + i] == img.pixels[i]);
    }
    const Tensor one = to_input_tensor(img, 1);
    CHECK(one.shape() == std::vector<size_t>{1, 2, 2});

    double img_sum = 0.0;
    for (double v : img.pixels) img_sum += v;
    double t_sum = 0.0;
    for (size_t i = 0; i < three.size(); ++i) t_sum += three[i];
    CHECK(t_sum == doctest::Approx(3.0 * img_sum));
}

TEST_CASE("load_image_folder") {
    TempDir dir("thermalnet_folder_test");
    fs::create_directories(dir.path / "a");
    fs::create_directories(dir.path / "b");
    Image img(4, 4, 0.5);
    write_pgm_file(img, (dir.path / "a" / "one.pgm").string());
    write_pgm_file(img, (dir.path / "a" / "two.pgm").string());
    write_pgm_file(img, (dir.path / "b" / "only.pgm").string());

    const LabeledDataset ds = load_image_folder(dir.path.string(), 4);
    CHECK(ds.size() == 3);
    CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.items[0].label == 0);
    CHECK(ds.items[2].label == 1);

    // oversized files are resized to the target
    write_pgm_file(Image(8, 8, 0.5), (dir.path / "b" / "big.pgm").string());
    const LabeledDataset resized = load_image_folder(dir.path.string(), 4);
    CHECK(resized.size() == 4);
    for (const Sample& s : resized.items) {
        CHECK(s.image.width == 4);
        CHECK(s.image.height == 4);
    }

    TempDir empty("thermalnet_empty_test");
    CHECK_THROWS(load_image_folder(empty.path.string(), 4));
}

TEST_CASE("load_image_folder with 109 classes") {
    TempDir dir("thermalnet_109_test");
    Image img(4, 4, 0.25);
    for (int k = 0; k < 109; ++k) {
        char name[16];
        std::snprintf(name, sizeof(name), "s%03d", k);
        fs::create_directories(dir.path / name);
        write_pgm_file(img, (dir.path / name / "face.pgm").string());
    }
    const LabeledDataset ds = load_image_folder(dir.path.string(), 4);
    CHECK(ds.num_classes() == 109);
    CHECK(ds.size() == 109);
}

TEST_CASE("undecodable files: skip flag vs fatal") {
    TempDir dir("thermalnet_baddata_test");
    fs::create_directories(dir.path / "a");
    write_pgm_file(Image(4, 4, 0.5), (dir.path / "a" / "good.pgm").string());
    std::ofstream bad(dir.path / "a" / "bad.pgm", std::ios::binary);
    bad << "not a pgm";
    bad.close();

    CHECK_THROWS(load_image_folder(dir.path.string(), 4, false));
    const LabeledDataset ds = load_image_folder(dir.path.string(), 4, true);
    CHECK(ds.size() == 1);
}

TEST_CASE("synth_thermal determinism") {
    const LabeledDataset a = synth_thermal(2, 10, 32, 0.0, 7);
    const LabeledDataset b = synth_thermal(2, 10, 32, 0.0, 7);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.items[i].label == b.items[i].label);
        CHECK(a.items[i].image.pixels == b.items[i].image.pixels);
    }
    // zero noise makes all items of one class identical
    CHECK(a.items[0].image.pixels == a.items[1].image.pixels);

    const LabeledDataset c = synth_thermal(2, 10, 32, 0.05, 7);
    const LabeledDataset d = synth_thermal(2, 10, 32, 0.05, 7);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c.items[i].image.pixels == d.items[i].image.pixels);
}

TEST_CASE("synth_thermal separability via nearest centroid") {
    const LabeledDataset ds = synth_thermal(2, 50, 32, 0.05, 123);
    const size_t plane = ds.items[0].image.size();
    std::vector<std::vector<double>> centroids(2, std::vector<double>(plane, 0.0));
    std::vector<int> counts(2, 0);
    for (const Sample& s : ds.items) {
        for (size_t i = 0; i < plane; ++i) centroids[s.label][i] += s.image.pixels[i];
        ++counts[s.label];
    }
    for (int k = 0; k < 2; ++k) {
        for (auto& v : centroids[k]) v /= counts[k];
    }
    int correct = 0;
    for (const Sample& s : ds.items) {
        double d0 = 0.0, d1 = 0.0;
        for (size_t i = 0; i < plane; ++i) {
            const double a = s.image.pixels[i] - centroids[0][i];
            const double b = s.image.pixels[i] - centroids[1][i];
            d0 += a * a;
            d1 += b * b;
        }
        const int pred = d0 <= d1 ? 0 : 1;
        if (pred == s.label) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.95);
}

TEST_CASE("synth_thermal output stays in [0,1] under extreme noise") {
    const LabeledDataset ds = synth_thermal(3, 5, 16, 5.0, 99);
    for (const Sample& s : ds.items) {
        for (double v : s.image.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}
