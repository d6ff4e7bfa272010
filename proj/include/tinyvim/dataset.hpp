#pragma once

#include <string>
#include <vector>

#include "tinyvim/tensor.hpp"

namespace tinyvim {

// Synthetic 10-class corpus. Each class is a band-limited oriented cosine
// with random phase and amplitude plus white noise, so class means vanish on
// raw pixels (a linear probe stays near chance) while the frequency
// signature separates the classes cleanly.
struct ToyDatasetSpec {
    uint64_t seed = 7;
    int classes = 10;
    int per_class = 200;
    int image_size = 32;
    int channels = 3;
    double noise = 0.3;
};

struct ToyDataset {
    Tensor<float> images;     // (N, channels, H, W)
    std::vector<int> labels;  // size N
};

ToyDataset generate_toy_dataset(const ToyDatasetSpec& spec);

// One TVMT file per sample plus labels.csv (filename,label).
void write_dataset(const ToyDataset& ds, const std::string& dir);
ToyDataset load_dataset(const std::string& dir);

}  // namespace tinyvim
