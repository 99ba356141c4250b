// Command-line driver for the bump detection pipeline: dataset generation,
// encoding, training, prediction, evaluation, curve fitting, visualization.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "bump/errors.hpp"
#include "bump/evaluate.hpp"
#include "bump/fitdetect.hpp"
#include "bump/imageio.hpp"
#include "bump/inspect.hpp"
#include "bump/kvconfig.hpp"
#include "bump/network.hpp"
#include "bump/rng.hpp"
#include "bump/simulate.hpp"
#include "bump/spectra.hpp"
#include "bump/train.hpp"
#include "bump/transform.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace bump;

namespace {

std::string version_text() {
    std::string out;
    out += "bump 0.1.0\n";
    out += "manifest-format " + std::to_string(simulate::kManifestFormatVersion) + "\n";
    out += "batch-format " + std::to_string(transform::kBatchFormatVersion) + "\n";
    out += "model-format " + std::to_string(tensornet::kModelFormatVersion);
    return out;
}

void ensure_parent_dir(const fs::path& path) {
    const fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
}

kvconfig::Config load_config_file(const std::string& path) {
    // A bad or missing config file is a configuration problem, not an I/O one.
    if (!fs::exists(path)) throw config_error("config file not found: " + path);
    try {
        return kvconfig::Config::load(path);
    } catch (const io_error& e) {
        throw config_error(e.what());
    }
}

simulate::DatasetConfig dataset_config_from(const kvconfig::Config& c) {
    c.restrict_keys({"count", "seed", "out", "split", "grid.min", "grid.max",
                     "grid.count", "z_em.lo", "z_em.hi", "z_abs.lo", "z_abs.hi",
                     "c1.lo", "c1.hi", "c2.lo", "c2.hi", "snr.lo", "snr.hi",
                     "bump.x0", "bump.gamma", "bump.a_bump", "composite.file",
                     "composite.slope"});
    simulate::DatasetConfig cfg;
    if (auto v = c.maybe_uint("count")) cfg.count = *v;
    if (auto v = c.maybe_uint("seed")) cfg.master_seed = *v;
    if (auto v = c.maybe_string("out")) cfg.out_dir = *v;
    if (auto v = c.maybe_double("grid.min")) cfg.grid.min_angstrom = *v;
    if (auto v = c.maybe_double("grid.max")) cfg.grid.max_angstrom = *v;
    if (auto v = c.maybe_uint("grid.count"))
        cfg.grid.count = static_cast<std::size_t>(*v);
    const auto range = [&](const char* key, simulate::Range& r) {
        if (auto v = c.maybe_double(std::string(key) + ".lo")) r.lo = *v;
        if (auto v = c.maybe_double(std::string(key) + ".hi")) r.hi = *v;
    };
    range("z_em", cfg.z_em);
    range("z_abs", cfg.z_abs);
    range("c1", cfg.c1);
    range("c2", cfg.c2);
    range("snr", cfg.snr);
    if (auto v = c.maybe_double("bump.x0")) cfg.bump.x0 = *v;
    if (auto v = c.maybe_double("bump.gamma")) cfg.bump.gamma = *v;
    double area = 2.0;
    if (auto v = c.maybe_double("bump.a_bump")) area = *v;
    cfg.bump.c3 = spectra::c3_from_area(area, cfg.bump.gamma);
    if (auto v = c.maybe_string("composite.file")) cfg.composite_file = *v;
    if (auto v = c.maybe_double("composite.slope")) cfg.composite.continuum_slope = *v;
    return cfg;
}

fitdetect::FilterRules rules_from(const kvconfig::Config& c) {
    c.restrict_keys({"x0.lo", "x0.hi", "gamma.lo", "gamma.hi", "min_a_bump",
                     "min_significance", "significance_rule"});
    fitdetect::FilterRules rules;
    if (auto v = c.maybe_double("x0.lo")) rules.x0_lo = *v;
    if (auto v = c.maybe_double("x0.hi")) rules.x0_hi = *v;
    if (auto v = c.maybe_double("gamma.lo")) rules.gamma_lo = *v;
    if (auto v = c.maybe_double("gamma.hi")) rules.gamma_hi = *v;
    if (auto v = c.maybe_double("min_a_bump")) rules.min_a_bump = *v;
    if (auto v = c.maybe_double("min_significance")) rules.min_significance = *v;
    if (auto v = c.maybe_bool("significance_rule"); v && !*v)
        rules.min_significance.reset();
    return rules;
}

tensornet::Dataset dataset_from_batch(const transform::EncodedBatch& batch,
                                      bool require_labels) {
    auto [inputs, labels] = transform::to_tensor(batch, require_labels);
    return tensornet::Dataset{std::move(inputs), std::move(labels)};
}

transform::Encoding model_encoding(const tensornet::Model& model) {
    if (model.encoding.empty())
        throw std::invalid_argument(
            "model carries no encoding tag; it cannot encode raw spectra");
    return transform::encoding_from_string(model.encoding);
}

std::string shape_text(const std::vector<std::size_t>& sample, std::size_t n) {
    std::string s = "(" + std::to_string(n);
    for (auto d : sample) s += "," + std::to_string(d);
    return s + ")";
}

// generate ------------------------------------------------------------

struct GenerateArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::uint64_t count = 0;
    double split = 0;
    bool has_config = false, has_out = false, has_seed = false, has_count = false,
         has_split = false;
};

int cmd_generate(const GenerateArgs& args) {
    simulate::DatasetConfig cfg;
    std::optional<double> split_fraction;
    if (args.has_config) {
        const auto file = load_config_file(args.config);
        cfg = dataset_config_from(file);
        if (auto v = file.maybe_double("split")) split_fraction = *v;
    }
    if (args.has_out) cfg.out_dir = args.out;
    if (args.has_seed) cfg.master_seed = args.seed;
    if (args.has_count) cfg.count = args.count;
    if (args.has_split) split_fraction = args.split;
    if (cfg.out_dir.empty())
        throw config_error("no output directory; pass --out or set out in the config");

    const auto manifest = simulate::generate_dataset(cfg);

    std::size_t bumps = 0;
    for (const auto& r : manifest.records)
        if (r.spec.label == simulate::Label::bump) ++bumps;
    std::printf("generated %zu samples: %zu bump, %zu no-bump\n",
                manifest.records.size(), bumps, manifest.records.size() - bumps);
    std::printf("grid: %.9g..%.9g A, %zu pixels\n", cfg.grid.min_angstrom,
                cfg.grid.max_angstrom, cfg.grid.count);
    std::printf("manifest: %s\n", (cfg.out_dir / "manifest.jsonl").string().c_str());

    if (split_fraction) {
        const auto [train_m, test_m] =
            simulate::split(manifest, *split_fraction, cfg.master_seed);
        const fs::path train_path = cfg.out_dir / "train_manifest.jsonl";
        const fs::path test_path = cfg.out_dir / "test_manifest.jsonl";
        simulate::write_manifest(train_m, train_path);
        simulate::write_manifest(test_m, test_path);
        std::printf("split %.9g: train %zu (%s), test %zu (%s)\n", *split_fraction,
                    train_m.records.size(), train_path.string().c_str(),
                    test_m.records.size(), test_path.string().c_str());
    }
    return exit_ok;
}

// transform -----------------------------------------------------------

int cmd_transform(const std::string& manifest_path, const std::string& encoding,
                  const std::string& out) {
    const auto enc = transform::encoding_from_string(encoding);
    const auto manifest = simulate::read_manifest(manifest_path);
    const fs::path dir = fs::path(manifest_path).parent_path();
    const auto batch = transform::encode_manifest(manifest, dir, enc);
    ensure_parent_dir(out);
    transform::write_batch(batch, out);
    std::printf("wrote %zu samples, encoding %s, shape %s to %s\n", batch.count(),
                transform::to_string(enc).c_str(),
                shape_text(batch.shape, batch.count()).c_str(), out.c_str());
    return exit_ok;
}

// train ---------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string spec = "FC2-400";
    std::string out;
    std::string warm_start;
    std::string history;
    std::size_t epochs = 30;
    double lr = 0.01;
    double decay = 0.1;
    std::size_t decay_every = 0;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;
    bool freeze = false;
    bool quiet = false;
};

tensornet::NetworkSpec spec_from_arg(const std::string& arg) {
    if (fs::exists(arg)) return tensornet::load_spec(arg);
    return tensornet::preset(arg);
}

int cmd_train(const TrainArgs& args) {
    const auto batch = transform::read_batch(args.data);
    const auto all = dataset_from_batch(batch, true);
    const auto [train_set, val_set] = tensornet::holdout_split(all, args.val_fraction);

    tensornet::TrainConfig cfg;
    cfg.initial_lr = args.lr;
    cfg.decay_factor = args.decay;
    cfg.decay_every = args.decay_every;
    cfg.batch_size = args.batch;
    cfg.epochs = args.epochs;
    cfg.seed = args.seed;

    const auto report = [&](const tensornet::EpochStats& row) {
        if (args.quiet) return;
        std::printf("epoch %zu/%zu lr %.9g loss %.6f train_acc %.4f val_acc %.4f\n",
                    row.epoch, args.epochs, row.lr, row.train_loss, row.train_acc,
                    row.val_acc);
        std::fflush(stdout);
    };

    tensornet::Model model;
    tensornet::History history;
    if (!args.warm_start.empty()) {
        const auto src = tensornet::load_model(args.warm_start);
        if (src.spec.layers.size() < 2)
            throw std::invalid_argument("warm-start model is too small to re-head");
        const std::size_t keep = src.spec.layers.size() - 2;
        const std::vector<tensornet::LayerSpec> tail{tensornet::DenseSpec{2},
                                                     tensornet::SoftmaxSpec{}};
        model = tensornet::fine_tune(src, keep, tail, train_set, val_set, cfg,
                                     args.freeze, &history);
        // fine_tune trains via the same loop; report after the fact
        for (const auto& row : history) report(row);
    } else {
        model = tensornet::init(spec_from_arg(args.spec),
                                mix_seed(args.seed, seed_domain::init, 0));
        model.encoding = transform::to_string(batch.encoding);
        history = tensornet::train(model, train_set, val_set, cfg, report);
    }
    if (model.encoding.empty())
        model.encoding = transform::to_string(batch.encoding);

    ensure_parent_dir(args.out);
    tensornet::save_model(model, args.out);
    const std::string history_path =
        args.history.empty() ? args.out + ".history.csv" : args.history;
    ensure_parent_dir(history_path);
    tensornet::write_history_csv(history, history_path);

    std::printf("model: %s (%zu parameters, encoding %s)\n", args.out.c_str(),
                tensornet::param_count(model.spec), model.encoding.c_str());
    std::printf("history: %s\n", history_path.c_str());
    if (!history.empty())
        std::printf("final val_acc %.4f\n", history.back().val_acc);
    return exit_ok;
}

// predict ---------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string data;
    std::string spectrum;
    std::string out;
    double threshold = 0.5;
    double z_em = 0.0;
};

int cmd_predict(const PredictArgs& args) {
    const auto model = tensornet::load_model(args.model);

    std::vector<tensornet::Prediction> preds;
    if (!args.data.empty()) {
        const auto batch = transform::read_batch(args.data);
        if (!model.encoding.empty() &&
            model.encoding != transform::to_string(batch.encoding))
            throw std::invalid_argument("batch encoding " +
                                        transform::to_string(batch.encoding) +
                                        " does not match model encoding " +
                                        model.encoding);
        const auto set = dataset_from_batch(batch, false);
        preds = tensornet::predict_chunked(model, set.inputs, args.threshold);
    } else {
        const auto enc = model_encoding(model);
        const auto s = spectra::read_spectrum(args.spectrum);
        const Tensor input = transform::encode_one(s, enc, args.z_em);
        preds = tensornet::predict(model, input, args.threshold);
    }

    std::FILE* sink = stdout;
    std::FILE* file = nullptr;
    if (!args.out.empty()) {
        ensure_parent_dir(args.out);
        file = std::fopen(args.out.c_str(), "w");
        if (!file) throw io_error("cannot open " + args.out + " for writing");
        sink = file;
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        json line;
        line["id"] = i;
        line["score"] = preds[i].score;
        line["class"] = preds[i].cls == 1 ? "bump" : "no_bump";
        std::fprintf(sink, "%s\n", line.dump().c_str());
    }
    if (file) std::fclose(file);
    return exit_ok;
}

// eval ------------------------------------------------------------------

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& roc_svg, const std::string& roc_csv,
             const std::string& auc_csv, double threshold) {
    const auto model = tensornet::load_model(model_path);
    const auto batch = transform::read_batch(data_path);
    if (!model.encoding.empty() &&
        model.encoding != transform::to_string(batch.encoding))
        throw std::invalid_argument("batch encoding does not match model encoding");
    const auto set = dataset_from_batch(batch, true);
    const auto preds = tensornet::predict_chunked(model, set.inputs, threshold);

    std::vector<int> classes(preds.size());
    std::vector<double> scores(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        classes[i] = preds[i].cls;
        scores[i] = preds[i].score;
    }
    const double acc = evaluate::accuracy(classes, set.labels);
    const auto curve = evaluate::roc(scores, set.labels);
    const double area = evaluate::auc(curve);

    std::printf("samples %zu\n", preds.size());
    std::printf("accuracy %.9g\n", acc);
    std::printf("auc %.9g\n", area);

    if (!roc_svg.empty()) {
        ensure_parent_dir(roc_svg);
        evaluate::write_roc_svg(curve, roc_svg,
                                "ROC " + fs::path(model_path).stem().string());
        std::printf("roc svg: %s\n", roc_svg.c_str());
    }
    if (!roc_csv.empty()) {
        ensure_parent_dir(roc_csv);
        evaluate::write_roc_csv(curve, roc_csv);
        std::printf("roc csv: %s\n", roc_csv.c_str());
    }
    if (!auc_csv.empty()) {
        ensure_parent_dir(auc_csv);
        evaluate::write_auc_table_csv(
            {{fs::path(model_path).stem().string(), area}}, auc_csv);
        std::printf("auc csv: %s\n", auc_csv.c_str());
    }
    return exit_ok;
}

// fit ---------------------------------------------------------------------

struct FitArgs {
    std::string spectrum;
    std::string composite;
    std::string rules;
    std::string plot;
    double z_em = 0;
    double z_abs = 0;
    std::size_t significance_trials = 0;
    double snr = 0;
    std::uint64_t seed = 0;
    bool has_snr = false;
};

int cmd_fit(const FitArgs& args) {
    const auto observed = spectra::read_spectrum(args.spectrum);
    const spectra::Spectrum composite =
        args.composite.empty() ? simulate::synth_composite({})
                               : spectra::read_spectrum(args.composite);

    fitdetect::FilterRules rules;
    if (!args.rules.empty()) rules = rules_from(load_config_file(args.rules));

    auto result = fitdetect::fit_spectrum(observed, composite, args.z_em, args.z_abs);

    if (args.significance_trials > 0) {
        if (!args.has_snr)
            throw config_error("--significance needs --snr for the null trials");
        result.significance = fitdetect::significance(
            result, composite, args.z_em, args.z_abs, args.snr,
            observed.wavelengths(), args.significance_trials, args.seed);
    }

    fitdetect::RejectReason why{};
    const bool accepted = fitdetect::passes(result, rules, &why);

    json out;
    out["c1"] = result.c1;
    out["c2"] = result.c2;
    out["c3"] = result.c3;
    out["x0"] = result.x0;
    out["gamma"] = result.gamma;
    out["sse"] = result.sse;
    out["n_points"] = result.n_points;
    out["a_bump"] = result.a_bump;
    if (result.significance)
        out["significance"] = *result.significance;
    else
        out["significance"] = nullptr;
    out["accepted"] = accepted;
    if (accepted)
        out["reason"] = nullptr;
    else
        out["reason"] = fitdetect::to_string(why);
    std::printf("%s\n", out.dump().c_str());

    if (!args.plot.empty()) {
        spectra::ExtinctionParams fitted;
        fitted.c1 = result.c1;
        fitted.c2 = result.c2;
        fitted.bump = {result.x0, result.gamma, result.c3};
        const auto with_bump = spectra::apply_extinction(
            composite, fitted, args.z_abs, args.z_em, observed.wavelengths());
        fitted.bump.c3 = 0;
        const auto no_bump = spectra::apply_extinction(
            composite, fitted, args.z_abs, args.z_em, observed.wavelengths());
        ensure_parent_dir(args.plot);
        inspect::write_spectrum_svg(
            observed,
            {{"fit", with_bump.wavelengths(), with_bump.fluxes()},
             {"fit, no bump", no_bump.wavelengths(), no_bump.fluxes()}},
            args.plot);
        std::printf("plot: %s\n", args.plot.c_str());
    }
    return exit_ok;
}

// viz -----------------------------------------------------------------------

std::size_t find_conv_layer(const tensornet::Model& model, int requested, bool last) {
    if (requested >= 0) return static_cast<std::size_t>(requested);
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i)
        if (std::holds_alternative<tensornet::ConvSpec>(model.spec.layers[i])) {
            found = i;
            if (!last) break;
        }
    if (!found) throw std::invalid_argument("model has no conv layer");
    return *found;
}

int cmd_viz_filters(const std::string& model_path, int layer, const std::string& out) {
    const auto model = tensornet::load_model(model_path);
    const auto idx = find_conv_layer(model, layer, false);
    const Tensor grid = inspect::render_filters(model, idx);
    ensure_parent_dir(out);
    imageio::write_png(imageio::from_tensor(grid), out);
    std::printf("filters of layer %zu: %zux%zu tile image at %s\n", idx, grid.dim(0),
                grid.dim(1), out.c_str());
    return exit_ok;
}

int cmd_viz_maps(const std::string& model_path, int layer,
                 const std::string& spectrum_path, double z_em,
                 const std::string& out) {
    const auto model = tensornet::load_model(model_path);
    const auto enc = model_encoding(model);
    const auto s = spectra::read_spectrum(spectrum_path);
    const Tensor input = transform::encode_one(s, enc, z_em);
    const auto idx = find_conv_layer(model, layer, true);
    const auto maps = inspect::feature_maps(model, input, idx);
    const Tensor grid = inspect::tile(maps);
    ensure_parent_dir(out);
    imageio::write_png(imageio::from_tensor(grid), out);
    std::printf("%zu feature maps of layer %zu at %s\n", maps.size(), idx,
                out.c_str());
    return exit_ok;
}

int cmd_viz_reconstruct(const std::string& model_path, int target, std::size_t steps,
                        double step_size, std::uint64_t seed, const std::string& out,
                        const std::string& trajectory_csv) {
    const auto model = tensornet::load_model(model_path);
    const auto rec = inspect::reconstruct_input(model, target, steps, step_size, seed);

    Tensor image = rec.input;
    if (image.rank() == 1) {
        const std::size_t side = transform::kMatrixSide;
        if (image.size() == side * side)
            image = image.reshaped({side, side});
        else
            throw std::invalid_argument(
                "reconstructed vector does not fold into a square image");
    }
    ensure_parent_dir(out);
    imageio::write_png(imageio::from_tensor(image), out);
    std::printf("reconstruction for class %d: logit %.6g -> %.6g over %zu steps, %s\n",
                target, rec.logit_trajectory.front(), rec.logit_trajectory.back(),
                steps, out.c_str());

    if (!trajectory_csv.empty()) {
        ensure_parent_dir(trajectory_csv);
        std::FILE* f = std::fopen(trajectory_csv.c_str(), "w");
        if (!f) throw io_error("cannot open " + trajectory_csv + " for writing");
        std::fprintf(f, "step,logit\n");
        for (std::size_t i = 0; i < rec.logit_trajectory.size(); ++i)
            std::fprintf(f, "%zu,%.9g\n", i, rec.logit_trajectory[i]);
        std::fclose(f);
    }
    return exit_ok;
}

int cmd_viz_plot(const std::string& spectrum_path,
                 const std::vector<std::string>& overlay_paths,
                 const std::string& out) {
    const auto s = spectra::read_spectrum(spectrum_path);
    std::vector<inspect::Overlay> overlays;
    for (const auto& p : overlay_paths) {
        const auto o = spectra::read_spectrum(p);
        overlays.push_back(
            {fs::path(p).stem().string(), o.wavelengths(), o.fluxes()});
    }
    ensure_parent_dir(out);
    inspect::write_spectrum_svg(s, overlays, out);
    std::printf("plot: %s\n", out.c_str());
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2175 A absorption bump toolkit: simulate, train, detect"};
    app.set_version_flag("--version", version_text());
    app.require_subcommand(1);

    // generate
    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "Simulate a labeled spectrum dataset");
    auto* g_config = gen->add_option("--config", gen_args.config, "key = value config file");
    auto* g_out = gen->add_option("--out", gen_args.out, "output directory");
    auto* g_seed = gen->add_option("--seed", gen_args.seed, "master seed");
    auto* g_count = gen->add_option("--count", gen_args.count, "number of samples");
    auto* g_split = gen->add_option("--split", gen_args.split,
                                    "train fraction; also writes train/test manifests");

    // transform
    std::string t_manifest, t_encoding, t_out;
    auto* tr = app.add_subcommand("transform", "Encode a dataset for training");
    tr->add_option("--manifest", t_manifest, "manifest.jsonl path")->required();
    tr->add_option("--encoding", t_encoding, "vector | matrix | image")->required();
    tr->add_option("--out", t_out, "output batch file")->required();

    // train
    TrainArgs train_args;
    auto* tn = app.add_subcommand("train", "Train a network on an encoded batch");
    tn->add_option("--data", train_args.data, "encoded batch file")->required();
    tn->add_option("--spec", train_args.spec,
                   "preset (FC2-400, CNN4-REF, ...) or JSON spec path");
    tn->add_option("--epochs", train_args.epochs, "training epochs");
    tn->add_option("--lr", train_args.lr, "initial learning rate");
    tn->add_option("--decay", train_args.decay, "step decay factor");
    tn->add_option("--decay-every", train_args.decay_every,
                   "epochs per decay step (0 = epochs/3)");
    tn->add_option("--batch", train_args.batch, "minibatch size");
    tn->add_option("--seed", train_args.seed, "training seed");
    tn->add_option("--val-fraction", train_args.val_fraction, "holdout fraction");
    tn->add_option("--out", train_args.out, "model output path")->required();
    tn->add_option("--warm-start", train_args.warm_start,
                   "existing model; its head is replaced and the prefix reused");
    tn->add_flag("--freeze", train_args.freeze, "freeze the warm-started prefix");
    tn->add_option("--history", train_args.history,
                   "history CSV path (default: <out>.history.csv)");
    tn->add_flag("--quiet", train_args.quiet, "suppress per-epoch lines");

    // predict
    PredictArgs pred_args;
    auto* pr = app.add_subcommand("predict", "Score encoded batches or one spectrum");
    pr->add_option("--model", pred_args.model, "model file")->required();
    auto* p_data = pr->add_option("--data", pred_args.data, "encoded batch file");
    auto* p_spec = pr->add_option("--spectrum", pred_args.spectrum,
                                  "two-column spectrum file");
    pr->add_option("--threshold", pred_args.threshold, "bump decision threshold");
    pr->add_option("--z-em", pred_args.z_em, "emitter redshift (image encoding)");
    pr->add_option("--out", pred_args.out, "write JSON lines here instead of stdout");
    p_data->excludes(p_spec);

    // eval
    std::string e_model, e_data, e_roc, e_csv, e_auc;
    double e_threshold = 0.5;
    auto* ev = app.add_subcommand("eval", "Accuracy, ROC and AUC on a labeled batch");
    ev->add_option("--model", e_model, "model file")->required();
    ev->add_option("--data", e_data, "encoded labeled batch")->required();
    ev->add_option("--threshold", e_threshold, "decision threshold for accuracy");
    ev->add_option("--roc", e_roc, "ROC SVG output path");
    ev->add_option("--csv", e_csv, "ROC CSV output path");
    ev->add_option("--auc-csv", e_auc, "one-row model,auc table");

    // fit
    FitArgs fit_args;
    auto* ft = app.add_subcommand("fit", "Grid least-squares bump fit of one spectrum");
    ft->add_option("--spectrum", fit_args.spectrum, "observed spectrum")->required();
    ft->add_option("--composite", fit_args.composite,
                   "rest-frame composite (default: procedural)");
    ft->add_option("--z-em", fit_args.z_em, "emitter redshift")->required();
    ft->add_option("--z-abs", fit_args.z_abs, "absorber redshift")->required();
    ft->add_option("--rules", fit_args.rules, "filter rules config");
    ft->add_option("--significance", fit_args.significance_trials,
                   "Monte-Carlo trials (0 = skip)");
    auto* f_snr = ft->add_option("--snr", fit_args.snr, "snr for null trials");
    ft->add_option("--seed", fit_args.seed, "trial seed");
    ft->add_option("--plot", fit_args.plot, "SVG of spectrum and fit");

    // viz
    auto* vz = app.add_subcommand("viz", "Filters, feature maps, reconstructions, plots");
    vz->require_subcommand(1);

    std::string vf_model, vf_out = "filters.png";
    int vf_layer = -1;
    auto* vzf = vz->add_subcommand("filters", "First-layer (or chosen) conv filters");
    vzf->add_option("--model", vf_model, "model file")->required();
    vzf->add_option("--layer", vf_layer, "conv layer index (default: first conv)");
    vzf->add_option("--out", vf_out, "PNG path");

    std::string vm_model, vm_spectrum, vm_out = "maps.png";
    int vm_layer = -1;
    double vm_zem = 0;
    auto* vzm = vz->add_subcommand("maps", "Feature maps for one spectrum");
    vzm->add_option("--model", vm_model, "model file")->required();
    vzm->add_option("--spectrum", vm_spectrum, "spectrum file")->required();
    vzm->add_option("--layer", vm_layer, "layer index (default: last conv)");
    vzm->add_option("--z-em", vm_zem, "emitter redshift (image encoding)");
    vzm->add_option("--out", vm_out, "PNG path");

    std::string vr_model, vr_out = "reconstruction.png", vr_traj;
    int vr_target = 1;
    std::size_t vr_steps = 200;
    double vr_step_size = 0.1;
    std::uint64_t vr_seed = 0;
    auto* vzr = vz->add_subcommand("reconstruct",
                                   "Gradient-ascent input for a target class");
    vzr->add_option("--model", vr_model, "model file")->required();
    vzr->add_option("--target", vr_target, "class index (1 = bump)");
    vzr->add_option("--steps", vr_steps, "ascent steps");
    vzr->add_option("--step-size", vr_step_size, "ascent step size");
    vzr->add_option("--seed", vr_seed, "noise seed");
    vzr->add_option("--out", vr_out, "PNG path");
    vzr->add_option("--trajectory", vr_traj, "logit trajectory CSV");

    std::string vp_spectrum, vp_out = "spectrum.svg";
    std::vector<std::string> vp_overlays;
    auto* vzp = vz->add_subcommand("plot", "SVG line plot of a spectrum");
    vzp->add_option("--spectrum", vp_spectrum, "spectrum file")->required();
    vzp->add_option("--overlay", vp_overlays, "extra spectrum files to overlay");
    vzp->add_option("--out", vp_out, "SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    gen_args.has_config = g_config->count() > 0;
    gen_args.has_out = g_out->count() > 0;
    gen_args.has_seed = g_seed->count() > 0;
    gen_args.has_count = g_count->count() > 0;
    gen_args.has_split = g_split->count() > 0;
    fit_args.has_snr = f_snr->count() > 0;

    try {
        if (gen->parsed()) return cmd_generate(gen_args);
        if (tr->parsed()) return cmd_transform(t_manifest, t_encoding, t_out);
        if (tn->parsed()) return cmd_train(train_args);
        if (pr->parsed()) {
            if (pred_args.data.empty() && pred_args.spectrum.empty())
                throw config_error("predict needs --data or --spectrum");
            return cmd_predict(pred_args);
        }
        if (ev->parsed())
            return cmd_eval(e_model, e_data, e_roc, e_csv, e_auc, e_threshold);
        if (ft->parsed()) return cmd_fit(fit_args);
        if (vz->parsed()) {
            if (vzf->parsed()) return cmd_viz_filters(vf_model, vf_layer, vf_out);
            if (vzm->parsed())
                return cmd_viz_maps(vm_model, vm_layer, vm_spectrum, vm_zem, vm_out);
            if (vzr->parsed())
                return cmd_viz_reconstruct(vr_model, vr_target, vr_steps, vr_step_size,
                                           vr_seed, vr_out, vr_traj);
            if (vzp->parsed()) return cmd_viz_plot(vp_spectrum, vp_overlays, vp_out);
        }
        throw config_error("no subcommand selected");
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_config;
    } catch (const io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_io;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_numeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
