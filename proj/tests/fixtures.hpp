#pragma once

// Shared fixtures for the unit suites and the acceptance runner.

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "esn/dataio.hpp"

namespace fixtures {

/// Exact coefficient equality (Eigen has no operator== for matrices).
template <typename A, typename B>
bool exact_equal(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

/// Scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / (tag + "-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create temp directory for " + tag);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

/// Two motion classes with well-separated frequency content, nine channels,
/// clip lengths in the low hundreds of frames. `clips_a`/`clips_b` control
/// the per-class clip counts.
inline esn::SynthSpec two_class_spec(int clips_a, int clips_b, double noise = 0.05) {
    esn::SynthSpec spec;
    spec.channels = 9;
    spec.frame_rate = 10.0;
    spec.min_frames = 120;
    spec.max_frames = 300;

    esn::SynthClass high;
    high.label = "high";
    high.clips = clips_a;
    high.noise = noise;
    high.components = {{1.3, 1.0, 0.0}, {2.6, 0.5, 1.1}};

    esn::SynthClass low;
    low.label = "low";
    low.clips = clips_b;
    low.noise = noise;
    low.components = {{0.4, 1.0, 0.3}, {0.8, 0.5, 2.0}};

    spec.classes = {high, low};
    return spec;
}

/// The two-class spec plus a mixture class halfway between them.
inline esn::SynthSpec mixture_spec(int clips_per_class, double mixing = 0.5, double noise = 0.05) {
    esn::SynthSpec spec = two_class_spec(clips_per_class, clips_per_class, noise);
    esn::SynthClass mid;
    mid.label = "mid";
    mid.clips = clips_per_class;
    // Noise interpolates from the base classes; the field on the mixture
    // itself is ignored.
    mid.mix_of = std::make_pair(std::string("high"), std::string("low"));
    mid.mixing = mixing;
    spec.classes.push_back(mid);
    return spec;
}

}  // namespace fixtures
