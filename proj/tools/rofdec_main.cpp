// rofdec: command-line front end for link simulation, training, sweeps,
// and the verification suite.

#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rofdec/binary.hpp"
#include "rofdec/dataset.hpp"
#include "rofdec/errors.hpp"
#include "rofdec/evaluate.hpp"
#include "rofdec/gradcheck.hpp"
#include "rofdec/manifest.hpp"
#include "rofdec/model.hpp"
#include "rofdec/rng.hpp"
#include "rofdec/stats.hpp"
#include "rofdec/sweeps.hpp"
#include "rofdec/train.hpp"

using namespace rofdec;

namespace {

namespace fs = std::filesystem;

using ArgMap = std::map<std::string, std::string>;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

std::string get_or(const ArgMap& args, const std::string& key, const std::string& fallback) {
    auto it = args.find(key);
    return it == args.end() ? fallback : it->second;
}

double get_double(const ArgMap& args, const std::string& key, double fallback) {
    auto it = args.find(key);
    return it == args.end() ? fallback : std::stod(it->second);
}

std::int64_t get_int(const ArgMap& args, const std::string& key, std::int64_t fallback) {
    auto it = args.find(key);
    return it == args.end() ? fallback : std::stoll(it->second);
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir = out;
    fs::create_directories(dir);
    return dir;
}

std::string default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ROFDEC_OUT")) return env;
    return ".";
}

// The channel used by a run is pinned inside its manifest so a rerun does
// not depend on preset defaults or external files staying put.
ChannelConfig resolve_channel(ArgMap& args) {
    const std::string distance = get_or(args, "distance", "d10km");
    if (args.count("channel_inline")) {
        const ConfigFile cfg = ConfigFile::parse_string(args.at("channel_inline"));
        return channel_from_config(cfg, distance);
    }
    ChannelConfig ch;
    if (args.count("config")) {
        const ConfigFile cfg = ConfigFile::parse_file(args.at("config"));
        ch = channel_from_config(cfg, distance);
    } else {
        ch = channel_preset(distance);
    }
    ConfigFile inline_cfg;
    channel_to_config(ch, inline_cfg);
    args["channel_inline"] = inline_cfg.serialize();
    return ch;
}

TrainConfig train_config_from(const ArgMap& args) {
    TrainConfig cfg;
    cfg.batch_size = static_cast<int>(get_int(args, "batch", cfg.batch_size));
    cfg.lr = get_double(args, "lr", cfg.lr);
    cfg.max_iterations = static_cast<int>(get_int(args, "max_iters", cfg.max_iterations));
    cfg.target_accuracy = get_double(args, "target", cfg.target_accuracy);
    cfg.eval_every = static_cast<int>(get_int(args, "eval_every", cfg.eval_every));
    cfg.patience_evals = static_cast<int>(get_int(args, "patience", cfg.patience_evals));
    cfg.seed = static_cast<std::uint64_t>(get_int(args, "seed", 1));
    return cfg;
}

void finish_manifest(Manifest& man, const fs::path& dir, const std::vector<std::string>& outputs) {
    for (const std::string& name : outputs)
        man.output_fnv64[name] = hex_u64(fnv1a64_file((dir / name).string()));
    man.write((dir / "manifest.json").string());
}

// ------------------------------------------------------------------ gen

int run_gen(ArgMap args, const std::string& out) {
    const ChannelConfig ch = resolve_channel(args);
    const std::int64_t symbols = get_int(args, "symbols", 100000);
    const std::uint64_t seed = static_cast<std::uint64_t>(get_int(args, "seed", 7));
    const int decide_index = static_cast<int>(get_int(args, "decide_index", 2));
    const fs::path dir = prepare_out_dir(out);

    std::vector<std::string> files;
    for (std::size_t pi = 0; pi < ch.power_grid_dbm.size(); ++pi) {
        const double power = ch.power_grid_dbm[pi];
        const Waveform w = simulate_link(ch, symbols, power, mix_seed(seed, pi));
        WindowedDataset ds = window(w, decide_index);
        ds.distance = ch.name;
        ds.seed = seed;
        char name[128];
        std::snprintf(name, sizeof name, "%s_%+.2fdbm.ds", ch.name.c_str(), power);
        save_dataset(ds, (dir / name).string());
        files.push_back(name);
        std::printf("%s: %" PRId64 " windows of %d samples\n", name, ds.size(), ds.width());
    }

    Manifest man;
    man.command = "gen";
    man.args = args;
    finish_manifest(man, dir, files);
    std::printf("wrote %zu dataset files + manifest.json to %s\n", files.size(), dir.string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------- train

int run_train(ArgMap args, const std::string& out) {
    const std::string model_name = get_or(args, "model", "cnn");
    const ModelKind kind = model_kind_from_string(model_name);
    const fs::path dir = prepare_out_dir(out);

    if (kind == ModelKind::Threshold) {
        std::printf("threshold decision has no trainable parameters; nothing to do\n");
        Manifest man;
        man.command = "train";
        man.args = args;
        finish_manifest(man, dir, {});
        return kExitOk;
    }

    if (!args.count("data")) throw ConfigError("train requires --data <dataset file>");
    WindowedDataset full = load_dataset(args.at("data"));
    const double fraction = get_double(args, "train_fraction", 0.8);
    const TrainConfig cfg = train_config_from(args);
    auto [train_set, test_set] = split(full, fraction, mix_seed(cfg.seed, 0x517ull));

    Model model = build_model({kind, {}, static_cast<std::uint64_t>(get_int(args, "seed", 1))});
    const TrainTrace trace = train(model, train_set, test_set, cfg);

    save_model(model, (dir / "model.bin").string());
    write_train_trace_csv((dir / "train_trace.csv").string(), {{model_name, trace}});
    if (trace.converged())
        std::printf("%s reached %.3f test accuracy at iteration %d\n", model_name.c_str(),
                    cfg.target_accuracy, *trace.iterations_to_target);
    else
        std::printf("%s did not reach %.3f within %d iterations (best %.4f)\n", model_name.c_str(),
                    cfg.target_accuracy, trace.final_iteration, trace.best_accuracy);

    args["train_center"] = fmt_double(train_set.center);
    Manifest man;
    man.command = "train";
    man.args = args;
    finish_manifest(man, dir, {"model.bin", "train_trace.csv"});
    return kExitOk;
}

// ---------------------------------------------------------------- sweep

SweepDataConfig sweep_data_from(const ArgMap& args) {
    SweepDataConfig data;
    data.train_windows_per_power = get_int(args, "train_windows", data.train_windows_per_power);
    data.eval_bits_per_point = get_int(args, "bits", data.eval_bits_per_point);
    data.train_fraction = get_double(args, "train_fraction", data.train_fraction);
    data.data_seed = static_cast<std::uint64_t>(get_int(args, "data_seed", 11));
    data.eval_seed = static_cast<std::uint64_t>(get_int(args, "eval_seed", 77));
    return data;
}

int run_sweep(ArgMap args, const std::string& out) {
    const std::string kind = get_or(args, "kind", "");
    const fs::path dir = prepare_out_dir(out);
    const ChannelConfig ch = resolve_channel(args);
    const SweepDataConfig data = sweep_data_from(args);
    const TrainConfig tcfg = train_config_from(args);
    const std::vector<std::string> models = split_list(get_or(args, "models", "cnn"));
    if (models.empty()) throw ConfigError("sweep requires --models");
    const std::uint64_t model_seed = static_cast<std::uint64_t>(get_int(args, "model_seed", 5));

    Manifest man;
    man.command = "sweep";
    man.subcommand = kind;

    if (kind == "power") {
        std::vector<BerRow> rows;
        std::vector<std::pair<std::string, TrainTrace>> traces;
        for (const std::string& name : models) {
            const ModelKind mk = model_kind_from_string(name);
            const SweepPowerResult r = sweep_power({mk, {}, model_seed}, ch, data, tcfg);
            if (!r.params_stable)
                throw StateError("parameter hash changed during evaluation of " + name);
            rows.insert(rows.end(), r.curve.rows.begin(), r.curve.rows.end());
            if (mk != ModelKind::Threshold) traces.emplace_back(name, r.trace);
            std::printf("%s on %s: trained %d time(s); ber range [%.3g, %.3g]\n", name.c_str(),
                        ch.name.c_str(), r.train_calls,
                        std::min_element(r.curve.rows.begin(), r.curve.rows.end(),
                                         [](auto& a, auto& b) { return a.ber < b.ber; })
                            ->ber,
                        std::max_element(r.curve.rows.begin(), r.curve.rows.end(),
                                         [](auto& a, auto& b) { return a.ber < b.ber; })
                            ->ber);
        }
        write_ber_curve_csv((dir / "ber_curve.csv").string(), rows);
        std::vector<std::string> outputs = {"ber_curve.csv"};
        if (!traces.empty()) {
            write_train_trace_csv((dir / "train_trace.csv").string(), traces);
            outputs.push_back("train_trace.csv");
        }
        man.args = args;
        finish_manifest(man, dir, outputs);
        return kExitOk;
    }

    if (kind == "iterations") {
        std::vector<ModelSpec> specs;
        for (const std::string& name : models)
            specs.push_back({model_kind_from_string(name), {}, model_seed});
        const auto traces = sweep_iterations(specs, ch, data, tcfg);
        for (const auto& [name, trace] : traces) {
            if (trace.converged())
                std::printf("%s: iterations_to_target(%.3f) = %d\n", name.c_str(),
                            tcfg.target_accuracy, *trace.iterations_to_target);
            else
                std::printf("%s: non-converged after %d iterations (best %.4f)\n", name.c_str(),
                            trace.final_iteration, trace.best_accuracy);
        }
        write_train_trace_csv((dir / "train_trace.csv").string(), traces);
        man.args = args;
        finish_manifest(man, dir, {"train_trace.csv"});
        return kExitOk;
    }

    if (kind == "datasize") {
        if (!args.count("sizes")) throw ConfigError("sweep datasize requires --sizes");
        std::vector<std::int64_t> sizes;
        for (const std::string& s : split_list(args.at("sizes"))) sizes.push_back(std::stoll(s));
        const double power = get_double(args, "power", ch.power_grid_dbm[1]);
        const std::int64_t test_windows = get_int(args, "test_windows", 200000);
        std::vector<DatasizeRow> all;
        for (const std::string& name : models) {
            const auto rows = sweep_training_size({model_kind_from_string(name), {}, model_seed}, ch,
                                                  power, sizes, test_windows, data, tcfg);
            std::printf("%s: plateau size %" PRId64 " (ber %.3g at largest size)\n", name.c_str(),
                        plateau_size(rows), rows.back().ber);
            all.insert(all.end(), rows.begin(), rows.end());
        }
        write_datasize_csv((dir / "datasize.csv").string(), all);
        man.args = args;
        finish_manifest(man, dir, {"datasize.csv"});
        return kExitOk;
    }

    throw ConfigError("unknown sweep kind: " + kind + " (expected power, datasize, or iterations)");
}

// --------------------------------------------------------------- verify

struct VerifyReport {
    int passed = 0;
    int failed = 0;
    void line(const std::string& name, bool ok, const std::string& detail = "") {
        std::printf("%-44s %s%s%s\n", name.c_str(), ok ? "PASS" : "FAIL",
                    detail.empty() ? "" : "  ", detail.c_str());
        (ok ? passed : failed) += 1;
    }
};

int run_verify(bool quick, bool inject_grad_bug) {
    VerifyReport rep;
    char detail[160];

    if (inject_grad_bug) testing::corrupt_conv_backward(true);

    // gradient checks, layer by layer
    for (const std::string& layer : grad_check_layer_names()) {
        const GradCheckReport r = grad_check_layer(layer, 2024);
        std::snprintf(detail, sizeof detail, "max rel err %.3e over %d probes", r.max_rel_err,
                      r.checked);
        rep.line("gradients/" + layer, r.max_rel_err < 1e-4 && r.checked > 0, detail);
    }

    // preset models against finite differences on synthetic windows
    {
        WindowedDataset source;
        source.inputs = Tensor({128, 1, 16});
        Rng rng(4242);
        for (double& v : source.inputs.values) v = 0.8 * rng.normal();
        source.labels.resize(128);
        for (auto& l : source.labels) l = static_cast<std::uint8_t>(rng.bit());
        for (ModelKind kind : {ModelKind::Cnn, ModelKind::Fcnn, ModelKind::Bcnn}) {
            Model m = build_model({kind, {}, 77});
            GradCheckOptions opt;
            opt.samples_per_tensor = quick ? 12 : 32;
            const GradCheckReport r = grad_check_model(m, source, 8, opt);
            std::snprintf(detail, sizeof detail, "max rel err %.3e over %d probes", r.max_rel_err,
                          r.checked);
            rep.line("gradients/model_" + model_kind_name(kind), r.max_rel_err < 1e-4 && r.checked > 0,
                     detail);
        }
    }

    testing::corrupt_conv_backward(false);

    // binary kernel equivalences
    {
        Rng rng(99);
        bool equal = true;
        const int cases = quick ? 300 : 1000;
        for (int trial = 0; trial < cases && equal; ++trial) {
            const int b = 1 + static_cast<int>(rng.below(3));
            const int c = 1 + static_cast<int>(rng.below(8));
            const int l = 5 + static_cast<int>(rng.below(14));
            const int n = 1 + static_cast<int>(rng.below(9));
            const int f = 1 + 2 * static_cast<int>(rng.below(3));
            const int pad = static_cast<int>(rng.below(3));
            if (l + 2 * pad < f) continue;
            SignTensor x, k;
            x.shape = {b, c, l};
            x.signs.resize(static_cast<std::size_t>(b) * c * l);
            for (auto& v : x.signs) v = rng.bit() ? 1 : -1;
            k.shape = {n, c, f};
            k.signs.resize(static_cast<std::size_t>(n) * c * f);
            for (auto& v : k.signs) v = rng.bit() ? 1 : -1;

            const Tensor naive = binary_conv1d(x, k, pad, 1);
            SignTensor kflat = k;
            kflat.shape = {n, c * f};
            const Tensor packed = packed_binary_conv1d(x, pack(kflat), n, f, pad, 1);
            // real-arithmetic route with explicit +1 padding
            Tensor xr({b, c, l + 2 * pad},
                      std::vector<double>(static_cast<std::size_t>(b) * c * (l + 2 * pad), 1.0));
            for (int bi = 0; bi < b; ++bi)
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < l; ++i)
                        xr.values[(static_cast<std::size_t>(bi) * c + ci) * (l + 2 * pad) + pad + i] =
                            x.signs[(static_cast<std::size_t>(bi) * c + ci) * l + i];
            ConvParams p;
            p.kernels = sign_to_tensor(k);
            const Var real = conv1d_forward(nullptr, make_var(xr), p);
            equal = naive.values == packed.values && naive.values == real->values;
        }
        rep.line("binary/kernel_equivalence", equal,
                 std::to_string(cases) + " random shapes, three routes");
    }
    {
        bool ok = true;
        for (int n = 1; n <= 16 && ok; ++n) {
            SignTensor a;
            a.shape = {1, n};
            a.signs.assign(static_cast<std::size_t>(n), 1);
            const PackedBits pa = pack(a);
            for (std::uint32_t pattern = 0; pattern < (1u << n) && ok; ++pattern) {
                SignTensor b = a;
                int agree = 0;
                for (int i = 0; i < n; ++i) {
                    if (pattern & (1u << i))
                        ++agree;
                    else
                        b.signs[static_cast<std::size_t>(i)] = -1;
                }
                ok = xnor_popcount_dot(pa, 0, pack(b), 0) == 2 * agree - n;
            }
        }
        rep.line("binary/popcount_identity_n<=16", ok, "exhaustive agreement patterns");
    }

    // channel invariants
    {
        bool ok = true;
        std::string what = "presets valid";
        try {
            for (const std::string& name : channel_preset_names()) channel_preset(name).validate();
        } catch (const std::exception& e) {
            ok = false;
            what = e.what();
        }
        rep.line("channel/preset_validation", ok, what);
    }
    {
        const double e10 = eye_opening(channel_preset("d10km"), 20000, 5);
        const double e15 = eye_opening(channel_preset("d15km"), 20000, 5);
        const double e20 = eye_opening(channel_preset("d20km"), 20000, 5);
        std::snprintf(detail, sizeof detail, "eye %.3f > %.3f > %.3f", e10, e15, e20);
        rep.line("channel/eye_ordering", e10 > e15 && e15 > e20, detail);
    }
    {
        Waveform w;
        w.sps = 4;
        w.symbol_count = 25000;
        w.origin_bits.assign(25000, 1);
        w.samples.assign(100000, 1.0);
        Waveform noisy = w;
        apply_awgn(noisy, 6.0, 77);
        double var = 0.0;
        for (std::size_t i = 0; i < noisy.samples.size(); ++i) {
            const double nn = noisy.samples[i] - w.samples[i];
            var += nn * nn;
        }
        var /= static_cast<double>(noisy.samples.size());
        const double want = std::pow(10.0, -0.6);
        std::snprintf(detail, sizeof detail, "empirical %.4f vs commanded %.4f", var, want);
        rep.line("channel/awgn_variance_2pct", std::abs(var - want) / want < 0.02, detail);
    }
    {
        ChannelConfig clean = channel_preset("d10km");
        clean.isi_taps = {1.0};
        clean.nl_a3 = 0.0;
        clean.cal.offset_db = -1e9;
        const WindowedDataset ds = make_eval_set(clean, -17.0, quick ? 20000 : 100000, 3, 0.0);
        const EvalResult r = hard_decision_baseline(ds);
        std::snprintf(detail, sizeof detail, "%" PRId64 " errors over %" PRId64 " bits", r.errors,
                      r.count);
        rep.line("channel/clean_chain_transparent", r.errors == 0, detail);
    }
    {
        bool ok = true;
        for (const std::string& name : channel_preset_names()) {
            const ChannelConfig& c = channel_preset(name);
            const std::int64_t bits = quick ? 50000 : 100000;
            Interval prev{1.0, 1.0};
            bool first = true;
            for (std::size_t pi = 0; pi < c.power_grid_dbm.size(); pi += quick ? 2 : 1) {
                const WindowedDataset ds =
                    make_eval_set(c, c.power_grid_dbm[pi], bits, 1000 + pi, 0.0);
                const EvalResult r = hard_decision_baseline(ds);
                const Interval iv = wilson_interval(r.errors, r.count);
                if (!first && iv.lo > prev.hi) ok = false;
                prev = iv;
                first = false;
            }
        }
        rep.line("channel/threshold_ber_monotone", ok, "Wilson 95% overlap across the grid");
    }

    // dataset invariants
    {
        ChannelConfig clean = channel_preset("d10km");
        clean.isi_taps = {1.0};
        clean.nl_a3 = 0.0;
        clean.cal.offset_db = -1e9;
        const Waveform w = simulate_link(clean, 5003, -17.0, 9);
        const WindowedDataset ds = window(w);
        bool ok = ds.size() == 5000;
        for (std::int64_t k = 0; ok && k + 1 < ds.size(); ++k)
            for (int i = 0; i < 12 && ok; ++i)
                ok = ds.inputs.values[static_cast<std::size_t>(k) * 16 + 4 + i] ==
                     ds.inputs.values[static_cast<std::size_t>(k + 1) * 16 + i];
        rep.line("dataset/windowing", ok, "count = symbols-3, 12-sample overlap");

        auto [tr, te] = split(ds, 0.8, 4);
        double mean = 0.0;
        for (double v : tr.inputs.values) mean += v;
        mean /= static_cast<double>(tr.inputs.numel());
        rep.line("dataset/split_centering",
                 tr.size() == 4000 && te.size() == 1000 && std::abs(mean) < 1e-10 &&
                     tr.center == te.center,
                 "train mean < 1e-10, shared offset");
    }

    std::printf("verify: %d passed, %d failed\n", rep.passed, rep.failed);
    return rep.failed == 0 ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNN/BCNN symbol-decision workbench for a simulated fiber-fed mm-wave link"};
    app.require_subcommand(1);

    std::string out_dir_flag;
    app.add_option("--out", out_dir_flag, "output directory (default $ROFDEC_OUT or .)");

    // gen
    auto* gen = app.add_subcommand("gen", "simulate the link and write windowed dataset files");
    std::string gen_distance = "d10km", gen_config;
    std::int64_t gen_symbols = 100000, gen_seed = 7, gen_decide = 2;
    gen->add_option("--distance", gen_distance, "channel preset name")->required();
    gen->add_option("--symbols", gen_symbols, "symbols per power point");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--decide-index", gen_decide, "decided symbol within the 4-symbol window");
    gen->add_option("--config", gen_config, "channel config file overriding built-in presets");

    // train
    auto* tr = app.add_subcommand("train", "train one model on a dataset file");
    std::string tr_model, tr_data;
    double tr_fraction = 0.8, tr_lr = 0.0005, tr_target = 0.985;
    std::int64_t tr_batch = 1024, tr_max_iters = 2000, tr_eval_every = 10, tr_patience = 20, tr_seed = 1;
    tr->add_option("--model", tr_model, "cnn|bcnn|fcnn|threshold")->required();
    tr->add_option("--data", tr_data, "dataset file from gen");
    tr->add_option("--train-fraction", tr_fraction, "train split fraction");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--max-iters", tr_max_iters, "iteration budget");
    tr->add_option("--target", tr_target, "target test accuracy");
    tr->add_option("--eval-every", tr_eval_every, "iterations between evaluations");
    tr->add_option("--patience", tr_patience, "evaluations without improvement after target");
    tr->add_option("--seed", tr_seed, "training/init seed");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run an experiment sweep (power|datasize|iterations)");
    std::string sw_from_manifest;
    sw->add_option("--from-manifest", sw_from_manifest, "re-run a sweep from its manifest");
    std::string sw_models = "cnn,bcnn,fcnn,threshold", sw_distance = "d10km", sw_config, sw_sizes;
    double sw_power = std::numeric_limits<double>::quiet_NaN(), sw_lr = 0.0005, sw_target = 0.985;
    std::int64_t sw_train_windows = 12500, sw_bits = 100000, sw_data_seed = 11, sw_eval_seed = 77;
    std::int64_t sw_batch = 1024, sw_max_iters = 2000, sw_eval_every = 10, sw_patience = 20, sw_seed = 1;
    std::int64_t sw_model_seed = 5, sw_test_windows = 200000;
    auto add_sweep_common = [&](CLI::App* cmd) {
        cmd->add_option("--models", sw_models, "comma-separated model list");
        cmd->add_option("--distance", sw_distance, "channel preset name");
        cmd->add_option("--config", sw_config, "channel config file");
        cmd->add_option("--train-windows", sw_train_windows, "pooled training windows per power");
        cmd->add_option("--bits", sw_bits, "evaluated bits per curve point");
        cmd->add_option("--data-seed", sw_data_seed, "training data seed");
        cmd->add_option("--eval-seed", sw_eval_seed, "evaluation data seed");
        cmd->add_option("--batch", sw_batch, "batch size");
        cmd->add_option("--lr", sw_lr, "learning rate");
        cmd->add_option("--max-iters", sw_max_iters, "iteration budget");
        cmd->add_option("--target", sw_target, "target test accuracy");
        cmd->add_option("--eval-every", sw_eval_every, "iterations between evaluations");
        cmd->add_option("--patience", sw_patience, "evaluations without improvement after target");
        cmd->add_option("--seed", sw_seed, "training seed");
        cmd->add_option("--model-seed", sw_model_seed, "model init seed");
    };
    auto* sw_power_cmd = sw->add_subcommand("power", "BER vs received power, one pooled training");
    add_sweep_common(sw_power_cmd);
    auto* sw_iter_cmd = sw->add_subcommand("iterations", "accuracy vs iteration per model");
    add_sweep_common(sw_iter_cmd);
    auto* sw_size_cmd = sw->add_subcommand("datasize", "BER vs training-set size per model");
    add_sweep_common(sw_size_cmd);
    sw_size_cmd->add_option("--power", sw_power, "power point for the datasize cell");
    sw_size_cmd->add_option("--sizes", sw_sizes, "comma-separated ascending window counts");
    sw_size_cmd->add_option("--test-windows", sw_test_windows, "fixed evaluation set size");

    // verify
    auto* ver = app.add_subcommand("verify", "run the property suite; nonzero exit on failure");
    bool ver_quick = false, ver_inject = false;
    ver->add_flag("--quick", ver_quick, "reduced sample counts");
    ver->add_flag("--inject-grad-bug", ver_inject,
                  "negative control: corrupt conv backward, expect FAIL");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const std::string out = default_out_dir(out_dir_flag);
        if (gen->parsed()) {
            ArgMap args;
            args["distance"] = gen_distance;
            args["symbols"] = std::to_string(gen_symbols);
            args["seed"] = std::to_string(gen_seed);
            args["decide_index"] = std::to_string(gen_decide);
            if (!gen_config.empty()) args["config"] = gen_config;
            return run_gen(std::move(args), out);
        }
        if (tr->parsed()) {
            ArgMap args;
            args["model"] = tr_model;
            if (!tr_data.empty()) args["data"] = tr_data;
            args["train_fraction"] = fmt_double(tr_fraction);
            args["batch"] = std::to_string(tr_batch);
            args["lr"] = fmt_double(tr_lr);
            args["max_iters"] = std::to_string(tr_max_iters);
            args["target"] = fmt_double(tr_target);
            args["eval_every"] = std::to_string(tr_eval_every);
            args["patience"] = std::to_string(tr_patience);
            args["seed"] = std::to_string(tr_seed);
            return run_train(std::move(args), out);
        }
        if (sw->parsed()) {
            if (!sw_from_manifest.empty()) {
                const Manifest man = Manifest::read(sw_from_manifest);
                if (man.command != "sweep")
                    throw ConfigError("manifest does not describe a sweep: " + sw_from_manifest);
                ArgMap args = man.args;
                args["kind"] = man.subcommand;
                return run_sweep(std::move(args), out);
            }
            ArgMap args;
            std::string kind;
            if (sw_power_cmd->parsed()) kind = "power";
            else if (sw_iter_cmd->parsed()) kind = "iterations";
            else if (sw_size_cmd->parsed()) kind = "datasize";
            else throw ConfigError("sweep needs a kind: power, datasize, or iterations");
            args["kind"] = kind;
            args["models"] = sw_models;
            args["distance"] = sw_distance;
            if (!sw_config.empty()) args["config"] = sw_config;
            args["train_windows"] = std::to_string(sw_train_windows);
            args["bits"] = std::to_string(sw_bits);
            args["data_seed"] = std::to_string(sw_data_seed);
            args["eval_seed"] = std::to_string(sw_eval_seed);
            args["batch"] = std::to_string(sw_batch);
            args["lr"] = fmt_double(sw_lr);
            args["max_iters"] = std::to_string(sw_max_iters);
            args["target"] = fmt_double(sw_target);
            args["eval_every"] = std::to_string(sw_eval_every);
            args["patience"] = std::to_string(sw_patience);
            args["seed"] = std::to_string(sw_seed);
            args["model_seed"] = std::to_string(sw_model_seed);
            if (kind == "datasize") {
                if (!std::isnan(sw_power)) args["power"] = fmt_double(sw_power);
                if (!sw_sizes.empty()) args["sizes"] = sw_sizes;
                args["test_windows"] = std::to_string(sw_test_windows);
            }
            return run_sweep(std::move(args), out);
        }
        if (ver->parsed()) return run_verify(ver_quick, ver_inject);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDivergence;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitVerifyFailure;
    }
    return kExitUsage;
}
