#include "tinyvim/backbone.hpp"

#include <iostream>
#include <map>

#include <json.hpp>

#include "tinyvim/io.hpp"

namespace tinyvim {

ModelSpec ModelSpec::variant(char v, int num_classes) {
    ModelSpec s;
    s.num_classes = num_classes;
    const std::array<double, 4> alphas{0.25, 0.5, 0.5, 0.75};
    const std::array<int, 4> ratios{8, 4, 2, 1};
    std::array<int, 4> locals{}, tvms{}, dims{};
    switch (v) {
        case 'S':
            locals = {2, 2, 7, 5};
            tvms = {1, 1, 2, 1};
            dims = {48, 64, 168, 224};
            break;
        case 'B':
            locals = {3, 2, 8, 4};
            tvms = {1, 1, 2, 1};
            dims = {48, 96, 192, 384};
            break;
        case 'L':
            locals = {3, 3, 10, 5};
            tvms = {1, 1, 2, 1};
            dims = {64, 128, 384, 512};
            break;
        default:
            throw std::invalid_argument(std::string("unknown variant: ") + v);
    }
    for (int i = 0; i < 4; ++i)
        s.stages[i] = {locals[i], tvms[i], dims[i], alphas[i], ratios[i]};
    s.validate();
    return s;
}

ModelSpec ModelSpec::toy_variant(char v, int num_classes) {
    ModelSpec s = variant(v, num_classes);
    for (auto& st : s.stages) st.channels /= 4;
    s.validate();
    return s;
}

void ModelSpec::validate() const {
    if (ffn_expansion < 1) throw std::invalid_argument("ModelSpec: ffn_expansion must be positive");
    if (num_classes < 1) throw std::invalid_argument("ModelSpec: num_classes must be positive");
    if (ssm_state < 1) throw std::invalid_argument("ModelSpec: ssm_state must be positive");
    double prev_alpha = 0.0;
    for (const auto& st : stages) {
        MixerConfig cfg{st.alpha, st.pool_ratio, st.channels};
        cfg.validate();
        if (st.local_blocks < 0 || st.tinyvim_blocks < 0)
            throw std::invalid_argument("ModelSpec: negative block count");
        if (st.alpha + 1e-12 < prev_alpha)
            throw std::invalid_argument("ModelSpec: alpha schedule must be non-decreasing");
        prev_alpha = st.alpha;
        if (st.channels % 2 != 0)
            throw std::invalid_argument("ModelSpec: stage channels must be even");
    }
}

std::string ModelSpec::to_json() const {
    nlohmann::json j;
    j["ffn_expansion"] = ffn_expansion;
    j["num_classes"] = num_classes;
    j["ssm_state"] = ssm_state;
    j["stages"] = nlohmann::json::array();
    for (const auto& st : stages) {
        j["stages"].push_back({{"local_blocks", st.local_blocks},
                               {"tinyvim_blocks", st.tinyvim_blocks},
                               {"channels", st.channels},
                               {"alpha", st.alpha},
                               {"pool_ratio", st.pool_ratio}});
    }
    return j.dump(2);
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelSpec s;
    s.ffn_expansion = j.at("ffn_expansion").get<int>();
    s.num_classes = j.at("num_classes").get<int>();
    s.ssm_state = j.at("ssm_state").get<int>();
    const auto& arr = j.at("stages");
    if (arr.size() != 4) throw std::invalid_argument("ModelSpec: four stages required");
    for (int i = 0; i < 4; ++i) {
        const auto& st = arr[static_cast<size_t>(i)];
        s.stages[i] = {st.at("local_blocks").get<int>(), st.at("tinyvim_blocks").get<int>(),
                       st.at("channels").get<int>(), st.at("alpha").get<double>(),
                       st.at("pool_ratio").get<int>()};
    }
    s.validate();
    return s;
}

template <typename T>
void ConvFfn<T>::init(int channels, int expansion, Rng& rng) {
    const int hidden = channels * expansion;
    fc1.init(channels, hidden, 1, 1, 0, 1, /*bias=*/false, rng);
    bn1.init(hidden);
    fc2.init(hidden, channels, 1, 1, 0, 1, /*bias=*/false, rng);
    bn2.init(channels);
}

template <typename T>
Tensor<T> ConvFfn<T>::forward(const Tensor<T>& x, bool training) {
    Tensor<T> h = gelu(bn1.forward(fc1.forward(x), training));
    return bn2.forward(fc2.forward(h), training);
}

template <typename T>
void ConvFfn<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    fc1.register_params(r, p + ".fc1");
    bn1.register_params(r, p + ".bn1");
    fc2.register_params(r, p + ".fc2");
    bn2.register_params(r, p + ".bn2");
}

template <typename T>
void LocalBlock<T>::init(int channels, int expansion, Rng& rng) {
    rep.init(channels, 1, rng);
    ffn.init(channels, expansion, rng);
}

template <typename T>
Tensor<T> LocalBlock<T>::forward(const Tensor<T>& x, bool training) {
    Tensor<T> t = rep.forward(x, training);
    return add(t, ffn.forward(t, training));
}

template <typename T>
void LocalBlock<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    rep.register_params(r, p + ".rep");
    ffn.register_params(r, p + ".ffn");
}

template <typename T>
void TinyVimBlock<T>::init(const MixerConfig& cfg, MixerMode mode, int n_state, int expansion,
                           Rng& rng) {
    mixer.init(cfg, mode, n_state, rng);
    ffn.init(cfg.channels, expansion, rng);
}

template <typename T>
Tensor<T> TinyVimBlock<T>::forward(const Tensor<T>& x, bool training, MixerTaps<T>* taps) {
    Tensor<T> t = add(mixer.forward(x, training, taps), x);
    return add(ffn.forward(t, training), t);
}

template <typename T>
void TinyVimBlock<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    mixer.register_params(r, p + ".mixer");
    ffn.register_params(r, p + ".ffn");
}

template <typename T>
void PatchEmbed<T>::init(int cin, int cout, Rng& rng) {
    rep.init(cin, 2, rng);
    pw.init(cin, cout, 1, 1, 0, 1, /*bias=*/false, rng);
    bn.init(cout);
}

template <typename T>
Tensor<T> PatchEmbed<T>::forward(const Tensor<T>& x, bool training) {
    return bn.forward(pw.forward(rep.forward(x, training)), training);
}

template <typename T>
void PatchEmbed<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    rep.register_params(r, p + ".rep");
    pw.register_params(r, p + ".pw");
    bn.register_params(r, p + ".bn");
}

template <typename T>
void StemUnit<T>::init(int cin, int cout, Rng& rng) {
    rep.init(cin, 2, rng);
    pw.init(cin, cout, 1, 1, 0, 1, /*bias=*/false, rng);
    bn.init(cout);
}

template <typename T>
Tensor<T> StemUnit<T>::forward(const Tensor<T>& x, bool training) {
    return gelu(bn.forward(pw.forward(rep.forward(x, training)), training));
}

template <typename T>
void StemUnit<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    rep.register_params(r, p + ".rep");
    pw.register_params(r, p + ".pw");
    bn.register_params(r, p + ".bn");
}

template <typename T>
void Model<T>::init(const ModelSpec& spec_, MixerMode mode_, uint64_t seed) {
    spec = spec_;
    spec.validate();
    mode = mode_;
    Rng rng(derive_seed(seed, "init"));

    const int c0 = spec.stages[0].channels / 2;
    stem0.init(3, c0, rng);
    stem1.init(c0, spec.stages[0].channels, rng);

    for (int s = 0; s < 4; ++s) {
        const StageSpec& st = spec.stages[s];
        Stage& stage = stages[s];
        if (s > 0) {
            stage.embed = std::make_unique<PatchEmbed<T>>();
            stage.embed->init(spec.stages[s - 1].channels, st.channels, rng);
        }
        MixerConfig cfg{st.alpha, st.pool_ratio, st.channels};
        // block order: locals, then the TinyViM block(s) at the stage end;
        // when a stage carries two, one sits after ceil(locals / 2) locals
        auto add_local = [&] {
            Block b;
            b.local = std::make_unique<LocalBlock<T>>();
            b.local->init(st.channels, spec.ffn_expansion, rng);
            stage.blocks.push_back(std::move(b));
        };
        auto add_tvm = [&] {
            Block b;
            b.tvm = std::make_unique<TinyVimBlock<T>>();
            b.tvm->init(cfg, mode, spec.ssm_state, spec.ffn_expansion, rng);
            stage.blocks.push_back(std::move(b));
        };
        int tvm_left = st.tinyvim_blocks;
        const int mid = (st.local_blocks + 1) / 2;
        for (int i = 0; i < st.local_blocks; ++i) {
            if (i == mid && tvm_left >= 2) {
                add_tvm();
                --tvm_left;
            }
            add_local();
        }
        for (int i = 0; i < tvm_left; ++i) add_tvm();
    }
    head.init(spec.stages[3].channels, spec.num_classes, /*bias=*/true, rng);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, std::vector<Tensor<T>>* stage_feats) {
    if (x.ndim() != 4 || x.dim(1) != 3)
        throw std::invalid_argument("Model::forward: input must be (B, 3, H, W)");
    if (x.dim(2) % 32 != 0 || x.dim(3) % 32 != 0)
        throw std::invalid_argument("Model::forward: H and W must be divisible by 32");
    if (stage_feats) stage_feats->clear();
    Tensor<T> h = stem1.forward(stem0.forward(x, training), training);
    for (auto& stage : stages) {
        if (stage.embed) h = stage.embed->forward(h, training);
        for (auto& blk : stage.blocks) {
            if (blk.local)
                h = blk.local->forward(h, training);
            else
                h = blk.tvm->forward(h, training);
        }
        if (stage_feats) stage_feats->push_back(h.clone());
    }
    Tensor<T> pooled = global_avg_pool(h);
    return head.forward(pooled);
}

template <typename T>
ParamRegistry<T> Model<T>::registry() {
    ParamRegistry<T> r;
    stem0.register_params(r, "stem0");
    stem1.register_params(r, "stem1");
    for (int s = 0; s < 4; ++s) {
        const std::string sp = "stage" + std::to_string(s + 1);
        if (stages[s].embed) stages[s].embed->register_params(r, sp + ".pe");
        for (size_t i = 0; i < stages[s].blocks.size(); ++i) {
            const std::string bp = sp + ".block" + std::to_string(i);
            const auto& blk = stages[s].blocks[i];
            if (blk.local)
                blk.local->register_params(r, bp);
            else
                blk.tvm->register_params(r, bp);
        }
    }
    head.register_params(r, "head");
    return r;
}

template <typename T>
int64_t Model<T>::ssm_tokens_last() const {
    int64_t n = 0;
    for (const auto& stage : stages)
        for (const auto& blk : stage.blocks)
            if (blk.tvm) n += blk.tvm->mixer.tokens_last;
    return n;
}

template <typename T>
Model<T> build_model(char variant, int num_classes, MixerMode mode, uint64_t seed) {
    Model<T> m;
    m.init(ModelSpec::variant(variant, num_classes), mode, seed);
    return m;
}

template <typename T>
int64_t count_params(Model<T>& model) {
    return model.registry().param_count();
}

namespace {

int64_t conv_mac(int cin, int cout, int k, int groups, int64_t ho, int64_t wo) {
    return ho * wo * int64_t(cout) * (int64_t(cin) / groups) * k * k;
}

template <typename T>
int64_t rep_macs(const RepDw3<T>& rep, int64_t ho, int64_t wo) {
    if (rep.fused) return conv_mac(rep.channels, rep.channels, 3, rep.channels, ho, wo);
    return conv_mac(rep.channels, rep.channels, 3, rep.channels, ho, wo) +
           conv_mac(rep.channels, rep.channels, 1, rep.channels, ho, wo);
}

// Scan cost model: per (token, channel, state) the update takes six
// multiplies (discretize A and B, advance h, project with C), plus the skip.
template <typename T>
int64_t ss2d_macs(const Ss2dBlock<T>& blk, int64_t h, int64_t w) {
    const int64_t L = h * w;
    const int64_t d = blk.d_inner;
    const int64_t n = blk.ssm.n_state;
    const int64_t r = blk.ssm.dt_rank;
    int64_t m = 0;
    m += conv_mac(blk.channels, 2 * static_cast<int>(d), 1, 1, h, w);  // in_proj
    m += conv_mac(static_cast<int>(d), static_cast<int>(d), 3, static_cast<int>(d), h, w);
    m += 4 * (L * d * (r + 2 * n));  // x_proj per direction
    m += 4 * (L * r * d);            // dt_proj
    m += 4 * (6 * L * d * n + L * d);
    m += conv_mac(static_cast<int>(d), blk.channels, 1, 1, h, w);  // out_proj
    return m;
}

template <typename T>
int64_t ffn_macs(const ConvFfn<T>& ffn, int channels, int expansion, int64_t h, int64_t w) {
    (void)ffn;
    return conv_mac(channels, channels * expansion, 1, 1, h, w) +
           conv_mac(channels * expansion, channels, 1, 1, h, w);
}

template <typename T>
int64_t mixer_macs(const LaplaceMixer<T>& mx, int64_t h, int64_t w) {
    const int d = mx.cfg.channels;
    int64_t m = 0;
    if (mx.mode == MixerMode::Baseline) {
        m += ss2d_macs(*mx.ss2d_high, h, w);
        m += conv_mac(d, d, 1, 1, h, w);
        return m;
    }
    const int r = effective_pool_ratio(mx.cfg.pool_ratio, static_cast<int>(h), static_cast<int>(w));
    m += rep_macs(mx.rep_high, h, w);
    if (mx.mode == MixerMode::HighOnly || mx.mode == MixerMode::LowHigh)
        m += ss2d_macs(*mx.ss2d_high, h, w);
    if (mx.mode == MixerMode::LowOnly || mx.mode == MixerMode::LowHigh)
        m += ss2d_macs(*mx.ss2d_low, h / r, w / r);
    m += conv_mac(d, d, 1, 1, h, w);
    return m;
}

}  // namespace

template <typename T>
int64_t count_macs(Model<T>& model, int H, int W) {
    if (H % 32 != 0 || W % 32 != 0)
        throw std::invalid_argument("count_macs: H and W must be divisible by 32");
    int64_t m = 0;
    int64_t h = H / 2, w = W / 2;
    const int c0 = model.spec.stages[0].channels / 2;
    m += rep_macs(model.stem0.rep, h, w) + conv_mac(3, c0, 1, 1, h, w);
    h /= 2; w /= 2;
    m += rep_macs(model.stem1.rep, h, w) + conv_mac(c0, model.spec.stages[0].channels, 1, 1, h, w);
    for (int s = 0; s < 4; ++s) {
        const StageSpec& st = model.spec.stages[s];
        if (s > 0) {
            h /= 2; w /= 2;
            m += rep_macs(model.stages[s].embed->rep, h, w) +
                 conv_mac(model.spec.stages[s - 1].channels, st.channels, 1, 1, h, w);
        }
        for (const auto& blk : model.stages[s].blocks) {
            if (blk.local) {
                m += rep_macs(blk.local->rep, h, w) +
                     ffn_macs(blk.local->ffn, st.channels, model.spec.ffn_expansion, h, w);
            } else {
                m += mixer_macs(blk.tvm->mixer, h, w) +
                     ffn_macs(blk.tvm->ffn, st.channels, model.spec.ffn_expansion, h, w);
            }
        }
    }
    m += int64_t(model.spec.stages[3].channels) * model.spec.num_classes;
    return m;
}

template <typename T>
void fuse_reparam(Model<T>& model) {
    std::vector<RepDw3<T>*> units;
    units.push_back(&model.stem0.rep);
    units.push_back(&model.stem1.rep);
    for (auto& stage : model.stages) {
        if (stage.embed) units.push_back(&stage.embed->rep);
        for (auto& blk : stage.blocks) {
            if (blk.local) units.push_back(&blk.local->rep);
            if (blk.tvm && blk.tvm->mixer.mode != MixerMode::Baseline)
                units.push_back(&blk.tvm->mixer.rep_high);
        }
    }
    bool any_unfused = false;
    for (auto* u : units) any_unfused = any_unfused || !u->fused;
    if (!any_unfused) {
        std::cerr << "fuse_reparam: model already fused, no-op\n";
        return;
    }
    for (auto* u : units) {
        if (!u->fused) u->fuse();
    }
    model.set_training(false);
}

template <typename T>
void save_weights(Model<T>& model, const std::string& path) {
    ParamRegistry<T> r = model.registry();
    std::vector<std::pair<std::string, const Tensor<T>*>> entries;
    for (const auto& [name, t] : r.params) entries.emplace_back(name, t);
    for (const auto& [name, t] : r.buffers) entries.emplace_back(name, t);
    write_tvmw(entries, path);
}

template <typename T>
void load_weights(Model<T>& model, const std::string& path) {
    auto file_entries = read_tvmw<T>(path);
    std::vector<std::pair<std::string, Tensor<T>*>> targets;
    ParamRegistry<T> r = model.registry();
    for (const auto& [name, t] : r.params) targets.emplace_back(name, t);
    for (const auto& [name, t] : r.buffers) targets.emplace_back(name, t);

    std::map<std::string, const Tensor<T>*> by_name;
    for (const auto& [name, t] : file_entries) {
        if (!by_name.emplace(name, &t).second)
            throw std::runtime_error("load_weights: duplicate entry '" + name + "'");
    }
    for (auto& [name, dst] : targets) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("load_weights: missing entry '" + name + "'");
        const Tensor<T>* src = it->second;
        if (src->dims() != dst->dims()) {
            std::string want, got;
            for (int d : dst->dims()) want += std::to_string(d) + " ";
            for (int d : src->dims()) got += std::to_string(d) + " ";
            throw std::runtime_error("load_weights: shape mismatch for entry '" + name +
                                     "' (model " + want + "vs file " + got + ")");
        }
        std::copy(src->data(), src->data() + src->size(), dst->data());
    }
    if (by_name.size() != targets.size())
        throw std::runtime_error("load_weights: file carries entries unknown to this model");
}

#define TINYVIM_INSTANTIATE_BACKBONE(T)                                  \
    template struct ConvFfn<T>;                                          \
    template struct LocalBlock<T>;                                       \
    template struct TinyVimBlock<T>;                                     \
    template struct PatchEmbed<T>;                                       \
    template struct StemUnit<T>;                                         \
    template struct Model<T>;                                            \
    template Model<T> build_model(char, int, MixerMode, uint64_t);       \
    template int64_t count_params(Model<T>&);                            \
    template int64_t count_macs(Model<T>&, int, int);                    \
    template void fuse_reparam(Model<T>&);                               \
    template void save_weights(Model<T>&, const std::string&);           \
    template void load_weights(Model<T>&, const std::string&);

TINYVIM_INSTANTIATE_BACKBONE(float)
TINYVIM_INSTANTIATE_BACKBONE(double)

#undef TINYVIM_INSTANTIATE_BACKBONE

}  // namespace tinyvim
