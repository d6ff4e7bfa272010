#pragma once

#include <string>
#include <vector>

#include "tinyvim/backbone.hpp"
#include "tinyvim/dataset.hpp"

namespace tinyvim {

struct TrainConfig {
    char variant = 'S';
    int num_classes = 10;
    MixerMode mode = MixerMode::LowOnly;
    int steps = 2000;
    int batch = 64;
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.02;
    int warmup_steps = 100;
    uint64_t seed = 7;
    std::string loss_csv;  // per-step loss rows when non-empty

    void validate() const;
};

struct TrainResult {
    std::vector<double> losses;
    double train_acc = 0.0;
    double test_acc = 0.0;
    int64_t ssm_tokens_per_forward = 0;  // per sample
    double seconds = 0.0;
};

// Decoupled-weight-decay Adam over a parameter registry. Rank-1 tensors
// (biases, norm gains) are excluded from decay.
template <typename T>
class AdamW {
public:
    AdamW(ParamRegistry<T>& reg, double beta1, double beta2, double eps, double weight_decay);
    void step(double lr);
    void zero_grad();

private:
    ParamRegistry<T>* reg_;
    double beta1_, beta2_, eps_, wd_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

double cosine_lr(double base_lr, int step, int total_steps, int warmup_steps);

// Deterministic toy training on the synthetic set; model widths are the
// quartered variant. Throws on divergence (non-finite loss).
TrainResult train_toy(const TrainConfig& cfg, const ToyDataset& train_set,
                      const ToyDataset& test_set);

// Held-out accuracy of a model in eval mode.
double evaluate_accuracy(Model<float>& model, const ToyDataset& ds, int batch);

}  // namespace tinyvim
