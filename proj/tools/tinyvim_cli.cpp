#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tinyvim/backbone.hpp"
#include "tinyvim/dataset.hpp"
#include "tinyvim/io.hpp"
#include "tinyvim/spectral.hpp"
#include "tinyvim/ssm.hpp"
#include "tinyvim/train.hpp"

namespace {

using namespace tinyvim;

char parse_variant(const std::string& v) {
    if (v == "S" || v == "B" || v == "L") return v[0];
    throw std::invalid_argument("variant must be one of S, B, L");
}

std::vector<int> parse_lengths(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const int v = std::stoi(tok);
        if (v < 1) throw std::invalid_argument("bench-scan: lengths must be positive");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("bench-scan: no lengths given");
    return out;
}

Tensor<float> as_batched_image(Tensor<float> t) {
    if (t.ndim() == 3) return reshape(t, {1, t.dim(0), t.dim(1), t.dim(2)});
    if (t.ndim() == 4) return t;
    throw std::runtime_error("input tensor must be (C, H, W) or (B, C, H, W)");
}

int cmd_build(const std::string& variant, int num_classes, uint64_t seed, const std::string& out,
              const std::string& config_out) {
    Model<float> m = build_model<float>(parse_variant(variant), num_classes, MixerMode::LowOnly,
                                        seed);
    if (!config_out.empty()) {
        std::ofstream f(config_out, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + config_out);
        f << m.spec.to_json() << "\n";
    }
    if (!out.empty()) save_weights(m, out);
    std::cout << "built TinyViM-" << variant << ": " << count_params(m) << " params\n";
    return 0;
}

int cmd_count_params(const std::string& variant, bool toy, bool fused) {
    Model<float> m;
    const ModelSpec spec = toy ? ModelSpec::toy_variant(parse_variant(variant))
                               : ModelSpec::variant(parse_variant(variant));
    m.init(spec, MixerMode::LowOnly, 42);
    if (fused) fuse_reparam(m);
    std::cout << count_params(m) << "\n";
    return 0;
}

int cmd_count_macs(const std::string& variant, int height, int width, bool toy, bool fused) {
    Model<float> m;
    const ModelSpec spec = toy ? ModelSpec::toy_variant(parse_variant(variant))
                               : ModelSpec::variant(parse_variant(variant));
    m.init(spec, MixerMode::LowOnly, 42);
    if (fused) fuse_reparam(m);
    std::cout << count_macs(m, height, width) << "\n";
    return 0;
}

int cmd_forward(const std::string& variant, const std::string& input,
                const std::string& weights, const std::string& out, const std::string& mode,
                bool fused, const std::string& dump_dir, int num_classes, uint64_t seed) {
    Model<float> m = build_model<float>(parse_variant(variant), num_classes,
                                        mixer_mode_from_string(mode), seed);
    if (!weights.empty()) load_weights(m, weights);
    if (fused) fuse_reparam(m);
    m.set_training(false);
    Tensor<float> x = as_batched_image(read_tvmt<float>(input));
    std::vector<Tensor<float>> feats;
    Tensor<float> logits = m.forward(x, dump_dir.empty() ? nullptr : &feats);
    if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        for (size_t s = 0; s < feats.size(); ++s)
            write_tvmt(feats[s], dump_dir + "/stage" + std::to_string(s + 1) + ".tvmt");
    }
    if (!out.empty()) write_tvmt(logits, out);
    const float* row = logits.data();
    int arg = 0;
    for (int k = 1; k < logits.dim(1); ++k)
        if (row[k] > row[arg]) arg = k;
    std::cout << "logits " << logits.dim(0) << "x" << logits.dim(1) << ", argmax[0]=" << arg
              << "\n";
    return 0;
}

int cmd_spectrum(const std::string& input, const std::string& csv, const std::string& pgm_prefix,
                 double rho) {
    Tensor<float> feats = read_tvmt<float>(input);
    SpectrumReport rep = analyze_spectrum(feats, rho);
    if (!csv.empty()) write_rla_csv(rep.rla_curve, csv);
    if (!pgm_prefix.empty()) {
        auto paths = export_magnitude_grid(feats, pgm_prefix);
        std::cout << "wrote " << paths.size() << " magnitude grids\n";
    }
    std::cout << "energy_ratio(rho=" << rho << ") = " << rep.energy_ratio << "\n";
    return 0;
}

int cmd_gen_data(const std::string& out, uint64_t seed, int per_class, int classes) {
    ToyDatasetSpec spec;
    spec.seed = seed;
    spec.per_class = per_class;
    spec.classes = classes;
    write_dataset(generate_toy_dataset(spec), out);
    std::cout << "wrote " << classes * per_class << " samples to " << out << "\n";
    return 0;
}

int cmd_train_toy(const std::string& mode, int steps, int batch, double lr, uint64_t seed,
                  const std::string& data_dir, int train_per_class, int test_per_class,
                  const std::string& loss_csv, const std::string& metrics_json,
                  const std::string& variant) {
    TrainConfig cfg;
    cfg.variant = parse_variant(variant);
    cfg.mode = mixer_mode_from_string(mode);
    cfg.steps = steps;
    cfg.batch = batch;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.loss_csv = loss_csv;

    ToyDataset train_set, test_set;
    if (!data_dir.empty()) {
        train_set = load_dataset(data_dir + "/train");
        test_set = load_dataset(data_dir + "/test");
    } else {
        ToyDatasetSpec dspec;
        dspec.seed = seed;
        dspec.per_class = train_per_class;
        train_set = generate_toy_dataset(dspec);
        dspec.seed = derive_seed(seed, "heldout");
        dspec.per_class = test_per_class;
        test_set = generate_toy_dataset(dspec);
    }
    TrainResult res = train_toy(cfg, train_set, test_set);
    std::cout << "mode=" << mode << " steps=" << steps << " final_loss=" << res.losses.back()
              << " train_acc=" << res.train_acc << " test_acc=" << res.test_acc
              << " ssm_tokens_per_forward=" << res.ssm_tokens_per_forward
              << " seconds=" << res.seconds << "\n";
    if (!metrics_json.empty()) {
        nlohmann::json j;
        j["mode"] = mode;
        j["steps"] = steps;
        j["seed"] = seed;
        j["final_loss"] = res.losses.back();
        j["train_acc"] = res.train_acc;
        j["test_acc"] = res.test_acc;
        j["ssm_tokens_per_forward"] = res.ssm_tokens_per_forward;
        j["seconds"] = res.seconds;
        std::ofstream f(metrics_json, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + metrics_json);
        f << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_bench_scan(const std::string& lengths_csv, int d_inner, int n_state, int repeats,
                   const std::string& csv_path) {
    const std::vector<int> lengths = parse_lengths(lengths_csv);
    Rng rng(derive_seed(99, "bench"));
    SsmParams<float> params;
    params.init(d_inner, n_state, rng);
    std::ostringstream csv;
    csv << "L,mode,seconds\n";
    std::vector<double> medians;
    for (int L : lengths) {
        Tensor<float> x = Tensor<float>::zeros({1, L, d_inner});
        for (int64_t i = 0; i < x.size(); ++i)
            x.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        s6_forward(x, params);  // warmup
        std::vector<double> times;
        for (int rI = 0; rI < repeats; ++rI) {
            const auto t0 = std::chrono::steady_clock::now();
            Tensor<float> y = s6_forward(x, params);
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        const double med = times[times.size() / 2];
        medians.push_back(med);
        csv << L << ",s6," << med << "\n";
    }
    std::cout << csv.str();
    for (size_t i = 1; i < medians.size(); ++i) {
        std::cerr << "ratio " << lengths[i] << "/" << lengths[i - 1] << " = "
                  << medians[i] / medians[i - 1] << "\n";
    }
    if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + csv_path);
        f << csv.str();
    }
    return 0;
}

int cmd_fuse_check(const std::string& variant, uint64_t seed) {
    Model<float> m = build_model<float>(parse_variant(variant), 1000, MixerMode::LowOnly, seed);
    Rng rng(derive_seed(seed, "fuse-check"));
    // a couple of training-mode passes so running stats move off their init
    m.set_training(true);
    for (int i = 0; i < 2; ++i) {
        Tensor<float> warm = Tensor<float>::zeros({2, 3, 64, 64});
        for (int64_t j = 0; j < warm.size(); ++j)
            warm.data()[j] = static_cast<float>(rng.normal());
        m.forward(warm);
    }
    m.set_training(false);
    Tensor<float> x = Tensor<float>::zeros({1, 3, 64, 64});
    for (int64_t j = 0; j < x.size(); ++j) x.data()[j] = static_cast<float>(rng.normal());
    Tensor<float> before = m.forward(x);
    fuse_reparam(m);
    Tensor<float> after = m.forward(x);
    float max_diff = 0.0f;
    for (int64_t i = 0; i < before.size(); ++i)
        max_diff = std::max(max_diff, std::abs(before.data()[i] - after.data()[i]));
    std::cout << "max |fused - multibranch| over logits = " << max_diff << "\n";
    if (max_diff > 1e-4f) {
        std::cerr << "fuse-check: difference exceeds 1e-4\n";
        return 1;
    }
    std::cout << "fuse-check: OK\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TinyViM hybrid Convolution-Mamba backbone toolkit"};
    app.require_subcommand(1);

    std::string variant = "S", input, weights, out, config_out, mode = "low-only";
    std::string data_dir, loss_csv, metrics_json, csv_path, pgm_prefix, dump_dir;
    std::string lengths = "1024,2048,4096";
    int num_classes = 1000, height = 224, width = 224, steps = 2000, batch = 64;
    int per_class = 200, test_per_class = 50, classes = 10;
    int d_inner = 64, n_state = 16, repeats = 5;
    double lr = 2e-3, rho = 0.25;
    uint64_t seed = 42;
    bool toy = false, fused = false;

    auto* c_build = app.add_subcommand("build", "build a model, write weights and config");
    c_build->add_option("--variant", variant, "S, B or L");
    c_build->add_option("--num-classes", num_classes);
    c_build->add_option("--seed", seed);
    c_build->add_option("--out", out, "TVMW weight file");
    c_build->add_option("--config", config_out, "JSON model config");

    auto* c_params = app.add_subcommand("count-params", "print learnable parameter count");
    c_params->add_option("--variant", variant);
    c_params->add_flag("--toy", toy, "quartered toy widths");
    c_params->add_flag("--fused", fused, "count after reparameterization");

    auto* c_macs = app.add_subcommand("count-macs", "print multiply-accumulate count");
    c_macs->add_option("--variant", variant);
    c_macs->add_option("--height", height);
    c_macs->add_option("--width", width);
    c_macs->add_flag("--toy", toy);
    c_macs->add_flag("--fused", fused);

    auto* c_fwd = app.add_subcommand("forward", "run a forward pass on a TVMT input");
    c_fwd->add_option("--variant", variant);
    c_fwd->add_option("--input", input)->required();
    c_fwd->add_option("--weights", weights, "TVMW file (random init when absent)");
    c_fwd->add_option("--out", out, "logits TVMT file");
    c_fwd->add_option("--mode", mode, "mixer mode");
    c_fwd->add_option("--num-classes", num_classes);
    c_fwd->add_option("--seed", seed);
    c_fwd->add_flag("--fused", fused, "fuse rep branches before running");
    c_fwd->add_option("--dump-features", dump_dir, "write per-stage TVMT feature dumps");

    auto* c_spec = app.add_subcommand("spectrum", "spectral diagnostics of a feature dump");
    c_spec->add_option("--input", input)->required();
    c_spec->add_option("--csv", csv_path, "relative log amplitude curve");
    c_spec->add_option("--pgm", pgm_prefix, "per-channel magnitude grid prefix");
    c_spec->add_option("--rho", rho, "low-frequency radius");

    auto* c_train = app.add_subcommand("train-toy", "train the quartered model on the toy set");
    c_train->add_option("--mode", mode, "baseline|conv-only|low-only|high-only|low+high");
    c_train->add_option("--steps", steps);
    c_train->add_option("--batch", batch);
    c_train->add_option("--lr", lr);
    c_train->add_option("--seed", seed);
    c_train->add_option("--variant", variant);
    c_train->add_option("--data-dir", data_dir, "dir with train/ and test/ corpora");
    c_train->add_option("--train-per-class", per_class);
    c_train->add_option("--test-per-class", test_per_class);
    c_train->add_option("--loss-csv", loss_csv);
    c_train->add_option("--metrics-json", metrics_json);

    auto* c_bench = app.add_subcommand("bench-scan", "selective-scan timing, CSV L,mode,seconds");
    c_bench->add_option("--lengths", lengths, "comma-separated sequence lengths");
    c_bench->add_option("--d-inner", d_inner);
    c_bench->add_option("--state", n_state);
    c_bench->add_option("--repeats", repeats);
    c_bench->add_option("--csv", csv_path, "also write CSV here");

    auto* c_fuse = app.add_subcommand("fuse-check", "fused vs multibranch forward comparison");
    c_fuse->add_option("--variant", variant);
    c_fuse->add_option("--seed", seed);

    auto* c_gen = app.add_subcommand("gen-data", "write the synthetic TVMT corpus");
    c_gen->add_option("--out", out)->required();
    c_gen->add_option("--seed", seed);
    c_gen->add_option("--per-class", per_class);
    c_gen->add_option("--classes", classes);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (c_build->parsed()) return cmd_build(variant, num_classes, seed, out, config_out);
        if (c_params->parsed()) return cmd_count_params(variant, toy, fused);
        if (c_macs->parsed()) return cmd_count_macs(variant, height, width, toy, fused);
        if (c_fwd->parsed())
            return cmd_forward(variant, input, weights, out, mode, fused, dump_dir, num_classes,
                               seed);
        if (c_spec->parsed()) return cmd_spectrum(input, csv_path, pgm_prefix, rho);
        if (c_train->parsed())
            return cmd_train_toy(mode, steps, batch, lr, seed, data_dir, per_class,
                                 test_per_class, loss_csv, metrics_json, variant);
        if (c_bench->parsed())
            return cmd_bench_scan(lengths, d_inner, n_state, repeats, csv_path);
        if (c_fuse->parsed()) return cmd_fuse_check(variant, seed);
        if (c_gen->parsed()) return cmd_gen_data(out, seed, per_class, classes);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
