#include "tinyvim/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace tinyvim {

void TrainConfig::validate() const {
    if (steps < 1 || batch < 1) throw std::invalid_argument("TrainConfig: steps/batch must be positive");
    if (lr < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 ||
        adam_eps <= 0.0 || weight_decay < 0.0 || warmup_steps < 0)
        throw std::invalid_argument("TrainConfig: bad optimizer hyperparameters");
    if (num_classes < 2) throw std::invalid_argument("TrainConfig: num_classes must be >= 2");
}

template <typename T>
AdamW<T>::AdamW(ParamRegistry<T>& reg, double beta1, double beta2, double eps, double weight_decay)
    : reg_(&reg), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
    m_.resize(reg.params.size());
    v_.resize(reg.params.size());
    for (size_t i = 0; i < reg.params.size(); ++i) {
        m_[i].assign(static_cast<size_t>(reg.params[i].second->size()), T(0));
        v_[i].assign(static_cast<size_t>(reg.params[i].second->size()), T(0));
    }
}

template <typename T>
void AdamW<T>::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < reg_->params.size(); ++i) {
        Tensor<T>* p = reg_->params[i].second;
        const T* g = p->grad_if_allocated();
        const bool decay = p->ndim() > 1;
        T* pv = p->data();
        for (int64_t j = 0; j < p->size(); ++j) {
            const double gj = g ? double(g[j]) : 0.0;
            m_[i][static_cast<size_t>(j)] =
                static_cast<T>(beta1_ * double(m_[i][static_cast<size_t>(j)]) + (1.0 - beta1_) * gj);
            v_[i][static_cast<size_t>(j)] =
                static_cast<T>(beta2_ * double(v_[i][static_cast<size_t>(j)]) + (1.0 - beta2_) * gj * gj);
            const double mhat = double(m_[i][static_cast<size_t>(j)]) / bc1;
            const double vhat = double(v_[i][static_cast<size_t>(j)]) / bc2;
            double upd = lr * (mhat / (std::sqrt(vhat) + eps_));
            if (decay) upd += lr * wd_ * double(pv[j]);
            if (upd != 0.0) pv[j] = static_cast<T>(double(pv[j]) - upd);
        }
    }
}

template <typename T>
void AdamW<T>::zero_grad() {
    for (auto& [name, p] : reg_->params) p->zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

double cosine_lr(double base_lr, int step, int total_steps, int warmup_steps) {
    double warm = 1.0;
    if (warmup_steps > 0 && step < warmup_steps) warm = double(step + 1) / double(warmup_steps);
    const double progress = total_steps > 1 ? double(step) / double(total_steps - 1) : 1.0;
    return base_lr * warm * 0.5 * (1.0 + std::cos(M_PI * progress));
}

namespace {

void fill_batch(const ToyDataset& ds, const std::vector<int>& idx, Tensor<float>& batch,
                std::vector<int>& labels) {
    const int64_t chw = ds.images.size() / ds.images.dim(0);
    for (size_t i = 0; i < idx.size(); ++i) {
        std::copy(ds.images.data() + int64_t(idx[i]) * chw,
                  ds.images.data() + int64_t(idx[i] + 1) * chw,
                  batch.data() + int64_t(i) * chw);
        labels[i] = ds.labels[static_cast<size_t>(idx[i])];
    }
}

}  // namespace

double evaluate_accuracy(Model<float>& model, const ToyDataset& ds, int batch) {
    const bool was_training = model.training;
    model.set_training(false);
    const int n = ds.images.dim(0);
    const int c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    int correct = 0;
    for (int start = 0; start < n; start += batch) {
        const int bs = std::min(batch, n - start);
        Tensor<float> xb = Tensor<float>::zeros({bs, c, h, w});
        std::vector<int> labels(static_cast<size_t>(bs));
        std::vector<int> idx(static_cast<size_t>(bs));
        for (int i = 0; i < bs; ++i) idx[static_cast<size_t>(i)] = start + i;
        fill_batch(ds, idx, xb, labels);
        Tensor<float> logits = model.forward(xb);
        const int k = logits.dim(1);
        for (int i = 0; i < bs; ++i) {
            const float* row = logits.data() + int64_t(i) * k;
            int arg = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[arg]) arg = j;
            if (arg == labels[static_cast<size_t>(i)]) ++correct;
        }
    }
    model.set_training(was_training);
    return double(correct) / double(n);
}

TrainResult train_toy(const TrainConfig& cfg, const ToyDataset& train_set,
                      const ToyDataset& test_set) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Model<float> model;
    model.init(ModelSpec::toy_variant(cfg.variant, cfg.num_classes), cfg.mode, cfg.seed);
    ParamRegistry<float> reg = model.registry();
    AdamW<float> opt(reg, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

    Rng order(derive_seed(cfg.seed, "data-order"));
    const int n = train_set.images.dim(0);
    const int c = train_set.images.dim(1), h = train_set.images.dim(2),
              w = train_set.images.dim(3);

    TrainResult res;
    res.losses.reserve(static_cast<size_t>(cfg.steps));
    std::ofstream loss_csv;
    if (!cfg.loss_csv.empty()) {
        loss_csv.open(cfg.loss_csv, std::ios::trunc);
        if (!loss_csv) throw std::runtime_error("train_toy: cannot write " + cfg.loss_csv);
        loss_csv << "step,loss\n";
    }

    Tensor<float> xb = Tensor<float>::zeros({cfg.batch, c, h, w});
    std::vector<int> labels(static_cast<size_t>(cfg.batch));
    std::vector<int> idx(static_cast<size_t>(cfg.batch));
    model.set_training(true);

    for (int step = 0; step < cfg.steps; ++step) {
        for (int i = 0; i < cfg.batch; ++i)
            idx[static_cast<size_t>(i)] = static_cast<int>(order.below(static_cast<uint64_t>(n)));
        fill_batch(train_set, idx, xb, labels);

        opt.zero_grad();
        GradTape<float> tape;
        float loss_value;
        {
            TapeScope<float> scope(tape);
            Tensor<float> logits = model.forward(xb);
            Tensor<float> loss = softmax_cross_entropy(logits, labels);
            loss_value = loss.data()[0];
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train_toy: training diverged (non-finite loss) at step " +
                                         std::to_string(step));
            tape.backward(loss);
        }
        opt.step(cosine_lr(cfg.lr, step, cfg.steps, cfg.warmup_steps));
        res.losses.push_back(double(loss_value));
        if (loss_csv) loss_csv << step << "," << loss_value << "\n";
        if (step == 0) res.ssm_tokens_per_forward = model.ssm_tokens_last();
    }

    res.train_acc = evaluate_accuracy(model, train_set, cfg.batch);
    res.test_acc = evaluate_accuracy(model, test_set, cfg.batch);
    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace tinyvim
