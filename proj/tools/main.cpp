// gcamat: train, run and inspect the guided-attention matting engine.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "gcamat/gca/attention_map.hpp"
#include "gcamat/io/config_file.hpp"
#include "gcamat/io/png.hpp"
#include "gcamat/data/dataset.hpp"
#include "gcamat/train/evaluate.hpp"

using namespace gcamat;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AppConfig {
    model::ModelConfig model;
    train::TrainConfig train;
    data::AugmentConfig aug;
    int synth_size = 192;
    std::string data_root;  // empty: synthetic data
    std::string ablation;   // e.g. "rec|rec,comp"
    int eval_count = 20;
    int eval_size = 64;
    uint64_t eval_seed = 1234;
};

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model.base_channels", "model.stages", "model.blocks_per_stage", "model.use_gca",
        "gca.lambda", "gca.clamp_lo", "gca.clamp_hi", "gca.unknown_threshold", "gca.patch_size",
        "gca.eps_norm", "gca.any_unknown", "gca.overlap_full",
        "train.lr", "train.beta1", "train.beta2", "train.adam_eps", "train.total_steps",
        "train.warmup_frac", "train.batch", "train.seed", "train.loss.rec", "train.loss.comp",
        "train.loss.gradl", "train.checkpoint_every", "train.resume", "train.ablation",
        "data.crop", "data.synth_size", "data.merge_prob", "data.resize_prob", "data.resize_to",
        "data.morph_lo", "data.morph_hi", "data.rotation", "data.scale_lo", "data.scale_hi",
        "data.shear", "data.flip_prob", "data.hue_jitter", "data.sat_lo", "data.sat_hi",
        "data.val_lo", "data.val_hi", "data.root",
        "eval.count", "eval.size", "eval.seed",
    };
    return keys;
}

AppConfig build_config(const io::KeyValueConfig& kv) {
    kv.check_known(known_keys());
    AppConfig app;
    app.model.base_channels = kv.get_int("model.base_channels", 16);
    app.model.stages = kv.get_int("model.stages", 4);
    app.model.blocks_per_stage = kv.get_int("model.blocks_per_stage", 2);
    app.model.use_gca = kv.get_bool("model.use_gca", true);
    app.model.gca.lambda_self = kv.get_double("gca.lambda", -1e4);
    app.model.gca.clamp_lo = kv.get_double("gca.clamp_lo", 0.1);
    app.model.gca.clamp_hi = kv.get_double("gca.clamp_hi", 10.0);
    app.model.gca.unknown_threshold = kv.get_double("gca.unknown_threshold", 0.5);
    app.model.gca.patch_size = kv.get_int("gca.patch_size", 3);
    app.model.gca.eps_norm = kv.get_double("gca.eps_norm", 1e-6);
    app.model.gca.any_unknown_rule = kv.get_bool("gca.any_unknown", false);
    app.model.gca.overlap_full = kv.get_bool("gca.overlap_full", false);

    app.train.lr = kv.get_double("train.lr", 4e-4);
    app.train.beta1 = kv.get_double("train.beta1", 0.5);
    app.train.beta2 = kv.get_double("train.beta2", 0.999);
    app.train.adam_eps = kv.get_double("train.adam_eps", 1e-8);
    app.train.total_steps = kv.get_int("train.total_steps", 2000);
    app.train.warmup_frac = kv.get_double("train.warmup_frac", 0.05);
    app.train.batch = kv.get_int("train.batch", 4);
    app.train.seed = kv.get_u64("train.seed", 0);
    app.train.loss_rec = kv.get_bool("train.loss.rec", true);
    app.train.loss_comp = kv.get_bool("train.loss.comp", false);
    app.train.loss_gradl = kv.get_bool("train.loss.gradl", false);
    app.train.checkpoint_every = kv.get_int("train.checkpoint_every", 500);
    app.train.resume = kv.get_str("train.resume", "");
    app.ablation = kv.get_str("train.ablation", "");

    app.aug.crop = kv.get_int("data.crop", 64);
    app.synth_size = kv.get_int("data.synth_size", 192);
    app.aug.merge_prob = kv.get_double("data.merge_prob", 0.5);
    app.aug.resize_prob = kv.get_double("data.resize_prob", 0.25);
    app.aug.resize_to = kv.get_int("data.resize_to", 640);
    app.aug.morph_lo = kv.get_int("data.morph_lo", 5);
    app.aug.morph_hi = kv.get_int("data.morph_hi", 29);
    app.aug.rotation_deg = kv.get_double("data.rotation", 30);
    app.aug.scale_lo = kv.get_double("data.scale_lo", 0.8);
    app.aug.scale_hi = kv.get_double("data.scale_hi", 1.25);
    app.aug.shear_deg = kv.get_double("data.shear", 10);
    app.aug.flip_prob = kv.get_double("data.flip_prob", 0.5);
    app.aug.hue_jitter = kv.get_double("data.hue_jitter", 0.05);
    app.aug.sat_lo = kv.get_double("data.sat_lo", 0.8);
    app.aug.sat_hi = kv.get_double("data.sat_hi", 1.2);
    app.aug.val_lo = kv.get_double("data.val_lo", 0.8);
    app.aug.val_hi = kv.get_double("data.val_hi", 1.2);
    app.data_root = kv.get_str("data.root", "");

    app.eval_count = kv.get_int("eval.count", 20);
    app.eval_size = kv.get_int("eval.size", 64);
    app.eval_seed = kv.get_u64("eval.seed", 1234);

    // the synthetic resize target must keep the crop feasible
    if (app.aug.resize_to < app.aug.crop)
        throw ConfigError("data.resize_to must be at least data.crop");
    if (app.synth_size < app.aug.crop)
        throw ConfigError("data.synth_size must be at least data.crop");
    app.model.validate();
    return app;
}

io::KeyValueConfig gather_config(const std::string& config_path,
                                 const std::vector<std::string>& sets, uint64_t* seed_flag) {
    io::KeyValueConfig kv;
    if (!config_path.empty()) kv = io::KeyValueConfig::load(config_path);
    for (const auto& s : sets) kv.set_pair(s);
    if (seed_flag) kv.set("train.seed", std::to_string(*seed_flag));
    kv.check_known(known_keys());
    return kv;
}

// ---------------------------------------------------------------------------
// Model-config metadata inside checkpoints
// ---------------------------------------------------------------------------

model::CheckpointEntry scalar_entry(double v) {
    model::CheckpointEntry e;
    e.dtype = 0;
    e.shape = Shape{1, 1, 1, 1};
    e.f32 = {static_cast<float>(v)};
    return e;
}

void add_meta(model::CheckpointMap& map, const AppConfig& app) {
    map["meta.model.base_channels"] = scalar_entry(app.model.base_channels);
    map["meta.model.stages"] = scalar_entry(app.model.stages);
    map["meta.model.blocks_per_stage"] = scalar_entry(app.model.blocks_per_stage);
    map["meta.model.use_gca"] = scalar_entry(app.model.use_gca ? 1 : 0);
    map["meta.gca.lambda"] = scalar_entry(app.model.gca.lambda_self);
    map["meta.gca.clamp_lo"] = scalar_entry(app.model.gca.clamp_lo);
    map["meta.gca.clamp_hi"] = scalar_entry(app.model.gca.clamp_hi);
    map["meta.gca.unknown_threshold"] = scalar_entry(app.model.gca.unknown_threshold);
    map["meta.gca.patch_size"] = scalar_entry(app.model.gca.patch_size);
    map["meta.gca.eps_norm"] = scalar_entry(app.model.gca.eps_norm);
    map["meta.gca.any_unknown"] = scalar_entry(app.model.gca.any_unknown_rule ? 1 : 0);
    map["meta.gca.overlap_full"] = scalar_entry(app.model.gca.overlap_full ? 1 : 0);
}

double meta_value(const model::CheckpointMap& map, const std::string& key, double fallback) {
    auto it = map.find(key);
    return it == map.end() || it->second.f32.empty() ? fallback : it->second.f32[0];
}

void apply_meta(const model::CheckpointMap& map, AppConfig& app) {
    if (!map.count("meta.model.base_channels")) return;  // legacy or foreign checkpoint
    app.model.base_channels = (int)meta_value(map, "meta.model.base_channels", 16);
    app.model.stages = (int)meta_value(map, "meta.model.stages", 4);
    app.model.blocks_per_stage = (int)meta_value(map, "meta.model.blocks_per_stage", 2);
    app.model.use_gca = meta_value(map, "meta.model.use_gca", 1) != 0;
    app.model.gca.lambda_self = meta_value(map, "meta.gca.lambda", -1e4);
    app.model.gca.clamp_lo = meta_value(map, "meta.gca.clamp_lo", 0.1);
    app.model.gca.clamp_hi = meta_value(map, "meta.gca.clamp_hi", 10.0);
    app.model.gca.unknown_threshold = meta_value(map, "meta.gca.unknown_threshold", 0.5);
    app.model.gca.patch_size = (int)meta_value(map, "meta.gca.patch_size", 3);
    app.model.gca.eps_norm = meta_value(map, "meta.gca.eps_norm", 1e-6);
    app.model.gca.any_unknown_rule = meta_value(map, "meta.gca.any_unknown", 0) != 0;
    app.model.gca.overlap_full = meta_value(map, "meta.gca.overlap_full", 0) != 0;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::unique_ptr<model::MattingNetwork<float>> load_model(const std::string& checkpoint,
                                                         AppConfig& app) {
    require_file(checkpoint, "checkpoint");
    auto map = model::load_checkpoint(checkpoint);
    apply_meta(map, app);
    auto net = std::make_unique<model::MattingNetwork<float>>(app.model, 0);
    model::restore(*net, map);
    return net;
}

train::SampleSource make_source(const AppConfig& app, uint64_t seed) {
    if (app.data_root.empty()) return train::synthetic_source(seed, app.synth_size, app.aug);
    auto ds = std::make_shared<data::IngestedDataset>(data::IngestedDataset::open(app.data_root));
    data::AugmentConfig aug = app.aug;
    return [ds, seed, aug](uint64_t index) -> std::optional<data::MattingSample> {
        Pcg32 rng(mix_seed(seed, index));
        data::ForegroundSource fg_src = [&](Pcg32& r) {
            return ds->load(r.uniform_int(0, static_cast<int>(ds->size()) - 1));
        };
        data::BackgroundSource bg_src = [&](Pcg32& r, int h, int w) {
            if (ds->has_backgrounds()) return ds->load_background(r.next_u32(), h, w);
            return data::synthesize_background(r.next_u32(), h, w);
        };
        return data::augment(fg_src, bg_src, aug, rng);
    };
}

std::vector<std::array<bool, 3>> parse_ablation(const std::string& spec) {
    std::vector<std::array<bool, 3>> combos;
    std::string rest = spec;
    while (!rest.empty()) {
        auto bar = rest.find('|');
        std::string combo = rest.substr(0, bar);
        rest = bar == std::string::npos ? "" : rest.substr(bar + 1);
        std::array<bool, 3> flags{false, false, false};
        std::string token;
        std::stringstream ss(combo);
        while (std::getline(ss, token, ',')) {
            if (token == "rec")
                flags[0] = true;
            else if (token == "comp")
                flags[1] = true;
            else if (token == "gradl")
                flags[2] = true;
            else
                throw ConfigError("unknown ablation loss '" + token + "'");
        }
        combos.push_back(flags);
    }
    if (combos.empty()) throw ConfigError("empty ablation spec");
    return combos;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train(const io::KeyValueConfig& kv, const std::string& out_dir) {
    AppConfig app = build_config(kv);
    fs::create_directories(out_dir);
    kv.echo((fs::path(out_dir) / "config.txt").string());

    if (!app.ablation.empty()) {
        auto combos = parse_ablation(app.ablation);
        auto eval_set = train::synthetic_eval_set(app.eval_seed, app.eval_count, app.eval_size,
                                                  app.synth_size, app.aug);
        train::run_ablation(
            [&](uint64_t seed) {
                return std::make_unique<model::MattingNetwork<float>>(app.model, seed);
            },
            app.train, [&](uint64_t seed) { return make_source(app, seed); }, eval_set, combos,
            out_dir);
        std::cout << "ablation table written to " << out_dir << "/ablation.csv\n";
        return 0;
    }

    model::MattingNetwork<float> net(app.model, app.train.seed);
    auto result = train::train(net, app.train, make_source(app, app.train.seed), out_dir);
    // stamp the model configuration into every checkpoint of the run
    for (const auto& e : fs::directory_iterator(out_dir)) {
        if (e.path().extension() != ".gcam") continue;
        auto map = model::load_checkpoint(e.path().string());
        add_meta(map, app);
        model::save_checkpoint(e.path().string(), map);
    }
    std::cout << "trained " << result.losses.size() << " steps, final checkpoint "
              << result.final_checkpoint << "\n";
    if (result.skipped_steps)
        std::cerr << result.skipped_steps << " steps skipped on non-finite gradients\n";
    return 0;
}

int cmd_infer(const io::KeyValueConfig& kv, const std::string& checkpoint,
              const std::string& image_path, const std::string& trimap_path,
              const std::string& out_path, int bits) {
    AppConfig app = build_config(kv);
    require_file(image_path, "image");
    require_file(trimap_path, "trimap");
    auto image = io::read_png(image_path);
    if (image.shape().c != 3) throw ValidationError("input image must be RGB");
    auto trimap = data::gray_to_trimap(io::read_png(trimap_path));
    if (trimap.shape().h != image.shape().h || trimap.shape().w != image.shape().w)
        throw ValidationError("image and trimap sizes disagree");

    auto net = load_model(checkpoint, app);
    auto alpha = net->infer_full(image, trimap);
    io::write_png(out_path, alpha, bits);
    kv.echo(out_path + ".config.txt");
    std::cout << "alpha written to " << out_path << "\n";
    return 0;
}

int cmd_viz_attention(const io::KeyValueConfig& kv, const std::string& checkpoint,
                      const std::string& image_path, const std::string& trimap_path,
                      const std::string& out_dir) {
    AppConfig app = build_config(kv);
    require_file(image_path, "image");
    require_file(trimap_path, "trimap");
    auto image = io::read_png(image_path);
    if (image.shape().c != 3) throw ValidationError("input image must be RGB");
    auto trimap = data::gray_to_trimap(io::read_png(trimap_path));
    if (trimap.shape().h != image.shape().h || trimap.shape().w != image.shape().w)
        throw ValidationError("image and trimap sizes disagree");

    auto net = load_model(checkpoint, app);
    if (!net->config().use_gca)
        throw ConfigError("checkpoint holds a baseline model; attention maps need use_gca");
    net->set_capture_attention(true);
    auto alpha = net->infer_full(image, trimap);

    fs::create_directories(out_dir);
    io::write_png((fs::path(out_dir) / "alpha.png").string(), alpha);

    auto render = [&](const gca::AttentionResult<float>& attn, const std::string& name) {
        auto map = gca::extract_attention_map(attn, net->config().gca_downsample);
        // the forward pass may have padded; crop back to the input frame
        if (map.shape().h != image.shape().h || map.shape().w != image.shape().w)
            map = model::detail::crop(map, image.shape().h, image.shape().w);
        gca::annotate_weights(map, attn);
        io::write_png((fs::path(out_dir) / name).string(), map);
    };
    render(net->encoder_attention().at(0), "attention_encoder.png");
    render(net->decoder_attention().at(0), "attention_decoder.png");
    kv.echo((fs::path(out_dir) / "config.txt").string());
    std::cout << "wrote alpha.png, attention_encoder.png, attention_decoder.png to " << out_dir
              << "\n";
    return 0;
}

int cmd_eval(const io::KeyValueConfig& kv, const std::string& checkpoint,
             const std::string& dataset_root, const std::string& out_path,
             const std::string& predictions_dir) {
    AppConfig app = build_config(kv);
    auto items = train::load_eval_dir(dataset_root);
    if (items.empty()) throw ConfigError("dataset " + dataset_root + " holds no eval triples");

    std::function<Tensor<float>(const train::EvalItem&)> provider;
    if (!predictions_dir.empty()) {
        provider = [predictions_dir](const train::EvalItem& item) {
            fs::path plain = fs::path(predictions_dir) / (item.name + ".png");
            fs::path suffixed = fs::path(predictions_dir) / (item.name + "_alpha.png");
            fs::path chosen = fs::exists(plain) ? plain : suffixed;
            if (!fs::exists(chosen))
                throw IoError("no prediction for " + item.name + " under " + predictions_dir);
            return io::read_png(chosen.string());
        };
    }

    std::unique_ptr<model::MattingNetwork<float>> net;
    if (!provider) {
        net = load_model(checkpoint, app);
        provider = [&net](const train::EvalItem& item) {
            return net->infer_full(item.image, item.trimap);
        };
    }
    train::MetricReport report = train::evaluate_with(items, provider);
    train::write_metrics_csv(out_path, report);
    kv.echo(out_path + ".config.txt");
    std::cout << "metrics for " << report.rows.size() << " images written to " << out_path << "\n";
    return 0;
}

int cmd_gen_data(const io::KeyValueConfig& kv, const std::string& out_dir, int count) {
    AppConfig app = build_config(kv);
    fs::create_directories(out_dir);
    kv.echo((fs::path(out_dir) / "config.txt").string());

    uint64_t index = 0;
    int produced = 0;
    while (produced < count) {
        if (index > static_cast<uint64_t>(count) * 200 + 1000)
            throw Error("sample generation starved; relax the augmentation config");
        uint64_t idx = index++;
        auto s = data::make_sample(app.train.seed, idx, app.synth_size, app.aug);
        if (!s) continue;
        // keep only trimaps that carry all three labels
        bool has[3] = {false, false, false};
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < app.aug.crop && !has[c]; ++y)
                for (int x = 0; x < app.aug.crop; ++x)
                    if (s->trimap.at(0, c, y, x) == 1.f) {
                        has[c] = true;
                        break;
                    }
        if (!has[0] || !has[1] || !has[2]) continue;

        char stem[64];
        std::snprintf(stem, sizeof(stem), "sample_%04d_%08llx", produced,
                      static_cast<unsigned long long>(mix_seed(app.train.seed, idx) & 0xffffffffu));
        fs::path base = fs::path(out_dir) / stem;
        io::write_png(base.string() + "_image.png", s->image);
        io::write_png(base.string() + "_trimap.png", data::trimap_to_gray(s->trimap));
        io::write_png(base.string() + "_alpha.png", s->alpha);
        io::write_png(base.string() + "_fg.png", s->fg);
        io::write_png(base.string() + "_bg.png", s->bg);
        ++produced;
    }
    std::cout << "wrote " << produced * 5 << " files (" << produced << " samples) to " << out_dir
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"guided contextual attention matting engine"};
    cli.require_subcommand(1);

    std::string config_path, out, checkpoint, image, trimap, dataset, predictions;
    std::vector<std::string> sets;
    uint64_t seed = 0;
    bool seed_given = false;
    int bits = 8;
    int count = 10;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--set", sets, "override a config key (key=value)")->take_all();
        sub->add_option("--seed", seed, "run seed")->each([&](const std::string&) {
            seed_given = true;
        });
    };

    CLI::App* tr = cli.add_subcommand("train", "train a model on synthetic or ingested data");
    add_common(tr);
    tr->add_option("--out", out, "output directory")->required();

    CLI::App* in = cli.add_subcommand("infer", "estimate an alpha matte for one image");
    add_common(in);
    in->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    in->add_option("--image", image, "input RGB image (PNG)")->required();
    in->add_option("--trimap", trimap, "trimap PNG with gray levels {0,128,255}")->required();
    in->add_option("--out", out, "output alpha PNG")->required();
    in->add_option("--bits", bits, "output bit depth (8 or 16)")
        ->check(CLI::IsMember({8, 16}));

    CLI::App* viz = cli.add_subcommand("viz-attention",
                                       "write the alpha plus encoder/decoder attention maps");
    add_common(viz);
    viz->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    viz->add_option("--image", image, "input RGB image (PNG)")->required();
    viz->add_option("--trimap", trimap, "trimap PNG")->required();
    viz->add_option("--out", out, "output directory")->required();

    CLI::App* ev = cli.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "model checkpoint");
    ev->add_option("--dataset", dataset, "directory of *_image/_trimap/_alpha triples")
        ->required();
    ev->add_option("--out", out, "metrics CSV path")->required();
    ev->add_option("--predictions", predictions,
                   "directory of precomputed alpha maps (skips inference)");

    CLI::App* gen = cli.add_subcommand("gen-data", "synthesize matting samples to disk");
    add_common(gen);
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "number of samples");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        cli.exit(e);
        return 2;
    }

    try {
        io::KeyValueConfig kv = gather_config(config_path, sets, seed_given ? &seed : nullptr);
        if (tr->parsed()) return cmd_train(kv, out);
        if (in->parsed()) return cmd_infer(kv, checkpoint, image, trimap, out, bits);
        if (viz->parsed()) return cmd_viz_attention(kv, checkpoint, image, trimap, out);
        if (ev->parsed()) {
            if (checkpoint.empty() && predictions.empty())
                throw ConfigError("eval needs --checkpoint or --predictions");
            return cmd_eval(kv, checkpoint, dataset, out, predictions);
        }
        if (gen->parsed()) return cmd_gen_data(kv, out, count);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
