#include "tinyvim/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tinyvim/io.hpp"

namespace tinyvim {

namespace {

// Class signatures: ten distinct orientations over [0, pi), alternating
// between a mid and a high frequency band. Integer-ish cycle counts keep the
// spectra concentrated.
void class_frequency(int k, int classes, double* fx, double* fy) {
    const double theta = M_PI * double(k) / double(classes);
    const double radius = (k % 2 == 0) ? 4.0 : 7.0;
    *fx = radius * std::cos(theta);
    *fy = radius * std::sin(theta);
}

}  // namespace

ToyDataset generate_toy_dataset(const ToyDatasetSpec& spec) {
    if (spec.classes < 2 || spec.per_class < 1 || spec.image_size < 4 || spec.channels < 1)
        throw std::invalid_argument("generate_toy_dataset: bad spec");
    const int n = spec.classes * spec.per_class;
    const int s = spec.image_size;
    ToyDataset ds;
    ds.images = Tensor<float>::zeros({n, spec.channels, s, s});
    ds.labels.resize(static_cast<size_t>(n));
    Rng rng(derive_seed(spec.seed, "toy-dataset"));
    float* base = ds.images.data();
    const int64_t chw = int64_t(spec.channels) * s * s;
    for (int i = 0; i < n; ++i) {
        const int label = i % spec.classes;
        ds.labels[static_cast<size_t>(i)] = label;
        double fx, fy;
        class_frequency(label, spec.classes, &fx, &fy);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(0.8, 1.2);
        float* img = base + int64_t(i) * chw;
        for (int c = 0; c < spec.channels; ++c) {
            const double gain = rng.uniform(0.9, 1.1);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const double wave =
                        amp * std::cos(2.0 * M_PI * (fx * x + fy * y) / double(s) + phase);
                    img[(int64_t(c) * s + y) * s + x] =
                        static_cast<float>(gain * wave + spec.noise * rng.normal());
                }
        }
    }
    return ds;
}

void write_dataset(const ToyDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const int n = ds.images.dim(0);
    const int c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const int64_t chw = int64_t(c) * h * w;
    std::ofstream labels(dir + "/labels.csv", std::ios::trunc);
    if (!labels) throw std::runtime_error("write_dataset: cannot write labels.csv in " + dir);
    labels << "filename,label\n";
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05d.tvmt", i);
        std::vector<float> vals(ds.images.data() + int64_t(i) * chw,
                                ds.images.data() + int64_t(i + 1) * chw);
        Tensor<float> sample = Tensor<float>::from({c, h, w}, std::move(vals));
        write_tvmt(sample, dir + "/" + name);
        labels << name << "," << ds.labels[static_cast<size_t>(i)] << "\n";
    }
    if (!labels) throw std::runtime_error("write_dataset: write failed for labels.csv");
}

ToyDataset load_dataset(const std::string& dir) {
    std::ifstream labels(dir + "/labels.csv");
    if (!labels) throw std::runtime_error("load_dataset: cannot open " + dir + "/labels.csv");
    std::string line;
    if (!std::getline(labels, line) || line != "filename,label")
        throw std::runtime_error("load_dataset: bad labels.csv header");
    std::vector<std::pair<std::string, int>> rows;
    while (std::getline(labels, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("load_dataset: malformed labels.csv row");
        rows.emplace_back(line.substr(0, comma), std::stoi(line.substr(comma + 1)));
    }
    if (rows.empty()) throw std::runtime_error("load_dataset: empty dataset");
    ToyDataset ds;
    Tensor<float> first = read_tvmt<float>(dir + "/" + rows[0].first);
    if (first.ndim() != 3) throw std::runtime_error("load_dataset: samples must be (C, H, W)");
    const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
    const int64_t chw = int64_t(c) * h * w;
    ds.images = Tensor<float>::zeros({static_cast<int>(rows.size()), c, h, w});
    ds.labels.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        Tensor<float> t = i == 0 ? first : read_tvmt<float>(dir + "/" + rows[i].first);
        if (t.ndim() != 3 || t.dim(0) != c || t.dim(1) != h || t.dim(2) != w)
            throw std::runtime_error("load_dataset: sample shape mismatch in " + rows[i].first);
        std::copy(t.data(), t.data() + chw, ds.images.data() + int64_t(i) * chw);
        ds.labels.push_back(rows[i].second);
    }
    return ds;
}

}  // namespace tinyvim
