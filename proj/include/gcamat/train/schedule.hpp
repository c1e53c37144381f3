#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace gcamat::train {

// Training recipe: Adam with beta1=0.5, beta2=0.999, base lr 4e-4, linear
// warmup then cosine decay. Desk-scale budget by default; the full-scale
// preset (200k steps, batch 40, 512 crops) is config-driven.
struct TrainConfig {
    double lr = 4e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int total_steps = 2000;
    double warmup_frac = 0.05;
    int batch = 4;
    uint64_t seed = 0;
    bool loss_rec = true;
    bool loss_comp = false;
    bool loss_gradl = false;
    int checkpoint_every = 500;
    std::string resume;  // checkpoint path to continue from

    int warmup_steps() const {
        int w = static_cast<int>(std::llround(total_steps * warmup_frac));
        return std::max(1, std::min(w, total_steps));
    }
};

// lr(0) = 0, lr(warmup) = lr, lr(total) = 0: linear ramp then cosine decay.
inline double lr_at(const TrainConfig& cfg, int step) {
    const int warmup = cfg.warmup_steps();
    if (step <= 0) return 0.0;
    if (step <= warmup) return cfg.lr * step / warmup;
    if (step >= cfg.total_steps) return 0.0;
    double t = static_cast<double>(step - warmup) / (cfg.total_steps - warmup);
    return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace gcamat::train
