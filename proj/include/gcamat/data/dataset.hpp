#pragma once

#include <filesystem>
#include <map>

#include "gcamat/data/augment.hpp"
#include "gcamat/io/png.hpp"

namespace gcamat::data {

namespace fs = std::filesystem;

// Real-data ingestion for root/{fg,alpha}[,bg] layouts with matching
// filenames. Samples are enumerated lazily; loading happens per access.
class IngestedDataset {
public:
    struct Report {
        std::vector<std::string> extra_alpha;  // alphas with no matching fg
        int pairs = 0;
        int backgrounds = 0;
    };

    static IngestedDataset open(const std::string& root) {
        IngestedDataset ds;
        ds.root_ = root;
        fs::path fg_dir = fs::path(root) / "fg";
        fs::path alpha_dir = fs::path(root) / "alpha";
        if (!fs::is_directory(fg_dir) || !fs::is_directory(alpha_dir))
            throw IoError("dataset root " + root + " must contain fg/ and alpha/ directories");

        std::map<std::string, bool> alphas;
        for (const auto& e : fs::directory_iterator(alpha_dir))
            if (e.path().extension() == ".png") alphas[e.path().filename().string()] = false;

        std::vector<std::string> missing;
        for (const auto& e : fs::directory_iterator(fg_dir)) {
            if (e.path().extension() != ".png") continue;
            std::string name = e.path().filename().string();
            auto it = alphas.find(name);
            if (it == alphas.end()) {
                missing.push_back(name);
            } else {
                it->second = true;
                ds.names_.push_back(name);
            }
        }
        if (!missing.empty()) {
            std::string msg = "dataset " + root + " is missing alpha for:";
            for (const auto& m : missing) msg += " " + m;
            throw IoError(msg);
        }
        if (ds.names_.empty()) throw IoError("dataset " + root + " contains no fg/alpha pairs");
        std::sort(ds.names_.begin(), ds.names_.end());
        for (const auto& [name, used] : alphas)
            if (!used) ds.report_.extra_alpha.push_back(name);
        ds.report_.pairs = static_cast<int>(ds.names_.size());

        fs::path bg_dir = fs::path(root) / "bg";
        if (fs::is_directory(bg_dir)) {
            for (const auto& e : fs::directory_iterator(bg_dir))
                if (e.path().extension() == ".png") ds.bgs_.push_back(e.path().string());
            std::sort(ds.bgs_.begin(), ds.bgs_.end());
            ds.report_.backgrounds = static_cast<int>(ds.bgs_.size());
        }
        return ds;
    }

    std::size_t size() const { return names_.size(); }
    const Report& report() const { return report_; }
    const std::vector<std::string>& names() const { return names_; }

    // (fg, alpha) in [0,1]; 16-bit alphas keep their full resolution.
    std::pair<Tensor<float>, Tensor<float>> load(std::size_t i) const {
        fs::path fg_path = fs::path(root_) / "fg" / names_[i];
        fs::path alpha_path = fs::path(root_) / "alpha" / names_[i];
        Tensor<float> fg = io::read_png(fg_path.string());
        Tensor<float> alpha = io::read_png(alpha_path.string());
        if (fg.shape().c != 3) throw IoError(fg_path.string() + ": foreground must be RGB");
        if (alpha.shape().c != 1)
            throw IoError(alpha_path.string() + ": alpha must be single-channel");
        if (fg.shape().h != alpha.shape().h || fg.shape().w != alpha.shape().w)
            throw IoError(names_[i] + ": fg and alpha sizes disagree");
        return {std::move(fg), std::move(alpha)};
    }

    bool has_backgrounds() const { return !bgs_.empty(); }

    Tensor<float> load_background(std::size_t i, int h, int w) const {
        Tensor<float> bg = io::read_png(bgs_[i % bgs_.size()]);
        if (bg.shape().c != 3) throw IoError(bgs_[i % bgs_.size()] + ": background must be RGB");
        if (bg.shape().h != h || bg.shape().w != w) bg = resize_bilinear(bg, h, w);
        return bg;
    }

private:
    std::string root_;
    std::vector<std::string> names_;
    std::vector<std::string> bgs_;
    Report report_;
};

}  // namespace gcamat::data
