#include "thermalnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include "thermalnet/pgm.hpp"
#include "thermalnet/rng.hpp"

namespace fs = std::filesystem;

namespace thermalnet {

LabeledDataset load_image_folder(const std::string& root, int target, bool skip_undecodable) {
    if (!fs::is_directory(root)) throw std::runtime_error("dataset root is not a directory: " + root);

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw std::runtime_error("dataset root has no class subdirectories: " + root);

    LabeledDataset ds;
    ds.class_names = class_dirs;
    for (size_t k = 0; k < class_dirs.size(); ++k) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[k])) {
            if (entry.is_regular_file()) files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            try {
                Image img = read_pgm_file(file);
                if (img.width != target || img.height != target) img = resize_bilinear(img, target, target);
                ds.items.push_back({std::move(img), static_cast<int>(k)});
            } catch (const std::exception& e) {
                if (!skip_undecodable) throw std::runtime_error(std::string(e.what()) + " (" + file + ")");
                std::cerr << "skipping undecodable file " << file << ": " << e.what() << "\n";
            }
        }
    }
    if (ds.items.empty()) throw std::runtime_error("no decodable images under " + root);
    return ds;
}

LabeledDataset synth_thermal(int num_classes, int per_class, int side, double noise_sd, uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("synth_thermal needs >= 2 classes");
    if (per_class < 1) throw std::invalid_argument("synth_thermal needs >= 1 item per class");
    if (side < 4) throw std::invalid_argument("synth_thermal side must be >= 4");

    // Zero-padded names keep lexicographic order equal to numeric order.
    const size_t digits = std::to_string(num_classes - 1).size();
    LabeledDataset ds;
    ds.class_names.reserve(num_classes);
    for (int k = 0; k < num_classes; ++k) {
        std::string num = std::to_string(k);
        ds.class_names.push_back("class_" + std::string(digits - num.size(), '0') + num);
    }

    Rng rng(seed);
    const double two_pi = 6.283185307179586476925286766559;
    const double ring = side / 4.0;
    const double sigma = side / 6.0;
    const double cx0 = (side - 1) / 2.0;
    const double cy0 = (side - 1) / 2.0;

    for (int k = 0; k < num_classes; ++k) {
        const double angle = two_pi * k / num_classes;
        const double cx = cx0 + ring * std::cos(angle);
        const double cy = cy0 + ring * std::sin(angle);
        for (int i = 0; i < per_class; ++i) {
            Image img(side, side);
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    const double dx = x - cx;
                    const double dy = y - cy;
                    double v = 0.1 + 0.8 * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    if (noise_sd > 0.0) v += noise_sd * rng.normal();
                    if (v < 0.0) v = 0.0;
                    if (v > 1.0) v = 1.0;
                    img.at(y, x) = v;
                }
            }
            ds.items.push_back({std::move(img), k});
        }
    }
    return ds;
}

} // namespace thermalnet
