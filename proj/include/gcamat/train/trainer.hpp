#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gcamat/data/augment.hpp"
#include "gcamat/model/checkpoint.hpp"
#include "gcamat/train/adam.hpp"
#include "gcamat/train/losses.hpp"

namespace gcamat::train {

// Produces the sample for one global index, or nothing when the pipeline
// rejected it. Pure in the index, so resuming only needs the next index.
using SampleSource = std::function<std::optional<data::MattingSample>(uint64_t)>;

struct TrainResult {
    std::vector<double> losses;
    std::vector<double> lrs;
    std::string final_checkpoint;
    int skipped_steps = 0;  // non-finite incidents
    uint64_t next_data_index = 0;
};

namespace detail {

struct Batch {
    Tensor<float> image, trimap, alpha, fg, bg, mask;
};

inline Batch stack_samples(const std::vector<data::MattingSample>& samples) {
    const Shape s = samples[0].image.shape();
    const int n = static_cast<int>(samples.size());
    Batch b{Tensor<float>(n, 3, s.h, s.w), Tensor<float>(n, 3, s.h, s.w),
            Tensor<float>(n, 1, s.h, s.w), Tensor<float>(n, 3, s.h, s.w),
            Tensor<float>(n, 3, s.h, s.w), Tensor<float>(n, 1, s.h, s.w)};
    for (int i = 0; i < n; ++i) {
        const auto& smp = samples[i];
        auto copy_into = [&](Tensor<float>& dst, const Tensor<float>& src) {
            std::size_t per = src.size();
            std::memcpy(dst.data() + per * i, src.data(), per * sizeof(float));
        };
        copy_into(b.image, smp.image);
        copy_into(b.trimap, smp.trimap);
        copy_into(b.alpha, smp.alpha);
        copy_into(b.fg, smp.fg);
        copy_into(b.bg, smp.bg);
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                b.mask.at(i, 0, y, x) = smp.trimap.at(0, gca::kTrimapUnknown, y, x);
    }
    return b;
}

inline void put_u64(model::CheckpointMap& m, const std::string& name, uint64_t v) {
    model::CheckpointEntry e;
    e.dtype = 1;
    e.shape = Shape{1, 1, 1, 2};
    e.u32 = {static_cast<uint32_t>(v & 0xffffffffu), static_cast<uint32_t>(v >> 32)};
    m[name] = std::move(e);
}

inline uint64_t get_u64(const model::CheckpointMap& m, const std::string& name) {
    auto it = m.find(name);
    if (it == m.end() || it->second.dtype != 1 || it->second.u32.size() != 2)
        throw IoError("checkpoint is missing counter " + name);
    return static_cast<uint64_t>(it->second.u32[0]) |
           (static_cast<uint64_t>(it->second.u32[1]) << 32);
}

}  // namespace detail

// Everything needed to resume: model tensors, Adam moments, counters.
inline constexpr int kCheckpointKeep = 0;  // periodic checkpoints are kept

template <typename Net>
model::CheckpointMap training_snapshot(Net& net, const AdamState<float>& opt, uint64_t step,
                                       uint64_t data_index, uint64_t seed) {
    model::CheckpointMap map = model::snapshot(net);
    const auto& params = net.params().params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        map.emplace("opt.m." + params[i].first, model::tensor_entry(opt.m[i]));
        map.emplace("opt.v." + params[i].first, model::tensor_entry(opt.v[i]));
    }
    detail::put_u64(map, "opt.t", static_cast<uint64_t>(opt.t));
    detail::put_u64(map, "train.step", step);
    detail::put_u64(map, "train.data_index", data_index);
    detail::put_u64(map, "train.seed", seed);
    return map;
}

// Helper: the bare parameter vars for zero_grad.
template <typename Params>
std::vector<ag::Var<float>> extract_vars(const Params& params) {
    std::vector<ag::Var<float>> vars;
    vars.reserve(params.size());
    for (const auto& [name, var] : params) vars.push_back(var);
    return vars;
}

// Deterministic training loop: given (seed, config, source) two runs produce
// bitwise-identical checkpoints. Saves periodic and final checkpoints plus a
// per-step loss/lr CSV under out_dir.
template <typename Net>
TrainResult train(Net& net, const TrainConfig& cfg, const SampleSource& source,
                  const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "loss.csv");
    if (!csv) throw IoError("cannot write loss.csv under " + out_dir);
    csv << "step,loss,lr\n";

    auto& params = net.params().params;
    AdamState<float> opt;
    opt.init(params);
    uint64_t start_step = 0;
    uint64_t data_index = 0;

    if (!cfg.resume.empty()) {
        auto map = model::load_checkpoint(cfg.resume);
        model::restore(net, map);
        for (std::size_t i = 0; i < params.size(); ++i) {
            opt.m[i] = model::entry_tensor<float>(map.at("opt.m." + params[i].first),
                                                  "opt.m." + params[i].first);
            opt.v[i] = model::entry_tensor<float>(map.at("opt.v." + params[i].first),
                                                  "opt.v." + params[i].first);
        }
        opt.t = static_cast<int64_t>(detail::get_u64(map, "opt.t"));
        start_step = detail::get_u64(map, "train.step");
        data_index = detail::get_u64(map, "train.data_index");
    }

    TrainResult result;
    auto save = [&](const std::string& name, uint64_t step) {
        std::string path = (fs::path(out_dir) / name).string();
        model::save_checkpoint(path, training_snapshot(net, opt, step, data_index, cfg.seed));
        return path;
    };

    for (uint64_t step = start_step; step < static_cast<uint64_t>(cfg.total_steps); ++step) {
        // assemble the batch; starvation aborts with a resumable checkpoint
        std::vector<data::MattingSample> samples;
        int attempts = 0;
        while (static_cast<int>(samples.size()) < cfg.batch) {
            if (++attempts > cfg.batch + 100) {
                save("checkpoint_abort.gcam", step);
                throw Error("data source starved at step " + std::to_string(step) +
                            "; wrote checkpoint_abort.gcam");
            }
            auto s = source(data_index++);
            if (s) samples.push_back(std::move(*s));
        }
        auto batch = detail::stack_samples(samples);

        ag::zero_grad(extract_vars(params));
        auto pred = net.forward(batch.image, batch.trimap, nn::Mode::Train);
        ag::Var<float> loss;
        if (cfg.loss_rec) loss = alpha_prediction_loss(pred, batch.alpha, batch.mask);
        if (cfg.loss_comp) {
            auto l = compositional_loss(pred, batch.fg, batch.bg, batch.image, batch.mask);
            loss = loss ? ag::add(loss, l) : l;
        }
        if (cfg.loss_gradl) {
            auto l = gradient_loss(pred, batch.alpha, batch.mask);
            loss = loss ? ag::add(loss, l) : l;
        }
        if (!loss) throw ConfigError("no loss enabled; set at least train.loss.rec");

        double loss_value = ag::scalar(loss);
        double lr = lr_at(cfg, static_cast<int>(step));
        bool stepped = false;
        if (std::isfinite(loss_value)) {
            ag::backward(loss);
            stepped = adam_step(params, opt, lr, cfg);
        }
        if (!stepped) {
            ++result.skipped_steps;
            std::cerr << "step " << step << ": non-finite loss or gradients, update skipped\n";
        }

        result.losses.push_back(loss_value);
        result.lrs.push_back(lr);
        csv << step << "," << loss_value << "," << lr << "\n";

        uint64_t done = step + 1;
        if (cfg.checkpoint_every > 0 && done % static_cast<uint64_t>(cfg.checkpoint_every) == 0 &&
            done < static_cast<uint64_t>(cfg.total_steps)) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "checkpoint_%06llu.gcam",
                          static_cast<unsigned long long>(done));
            save(buf, done);
        }
    }
    result.final_checkpoint = save("checkpoint_final.gcam", cfg.total_steps);
    result.next_data_index = data_index;
    return result;
}

// Synthetic sample source with desk-scale defaults.
inline SampleSource synthetic_source(uint64_t seed, int synth_size,
                                     const data::AugmentConfig& aug) {
    return [seed, synth_size, aug](uint64_t index) {
        return data::make_sample(seed, index, synth_size, aug);
    };
}

}  // namespace gcamat::train
