#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermalnet/image.hpp"

namespace thermalnet {

struct Sample {
    Image image;
    int label = 0;
};

/// Images plus class indices. class_names is sorted lexicographically and
/// every label indexes into it.
struct LabeledDataset {
    std::vector<Sample> items;
    std::vector<std::string> class_names;

    size_t size() const { return items.size(); }
    size_t num_classes() const { return class_names.size(); }
};

/// Ingests a directory-per-class tree of binary PGM files. Classes are the
/// subdirectory names in lexicographic order; files within a class are taken
/// in filename order; every image is resized to target x target.
/// With skip_undecodable, a file that fails to decode is reported to stderr
/// and skipped; otherwise it is fatal.
LabeledDataset load_image_folder(const std::string& root, int target, bool skip_undecodable = false);

/// Deterministic synthetic thermal-like dataset: class k is a Gaussian
/// hot-spot at a class-specific position plus Gaussian pixel noise, clamped
/// to [0,1]. Identical arguments produce a bit-identical dataset.
LabeledDataset synth_thermal(int num_classes, int per_class, int side, double noise_sd, uint64_t seed);

} // namespace thermalnet
