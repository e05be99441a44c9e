#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace esn {

/// One labeled multivariate clip: rows are frames, columns are channels.
struct Sample {
    Eigen::MatrixXd frames;  // T x K
    std::optional<std::string> label;
    std::string clip_id;
    std::optional<double> frame_rate;  // Hz

    Eigen::Index n_frames() const { return frames.rows(); }
    Eigen::Index n_channels() const { return frames.cols(); }
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> channel_names;

    Eigen::Index n_channels() const { return static_cast<Eigen::Index>(channel_names.size()); }
};

/// Per-channel moments frozen at training time. Channels whose standard
/// deviation falls below 1e-12 are flagged constant and are only centered.
struct NormalizationStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
    std::vector<std::uint8_t> constant;

    Eigen::Index n_channels() const { return mean.size(); }
};

/// Reads one clip from a pose CSV (header `frame,<channel names...>`).
/// The returned sample carries no label; loaders of manifests attach it.
/// When `channel_names` is non-null it receives the header names.
Sample load_pose_csv(const std::filesystem::path& path,
                     std::vector<std::string>* channel_names = nullptr);

/// Writes one clip in the pose CSV format. Doubles are rendered with
/// shortest round-trip formatting, so re-parsing restores identical bits.
void write_pose_csv(const std::filesystem::path& path, const Sample& sample,
                    const std::vector<std::string>& channel_names);

/// Loads a dataset through a manifest of `clip_id,label,path` lines.
/// Relative paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes per-clip CSVs plus a manifest into `dir`. Extra comment lines are
/// prepended to the manifest verbatim (each must already start with '#').
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const std::vector<std::string>& manifest_comments = {});

/// z-scores every channel. When `stats` is absent the moments are computed
/// from `dataset` itself and returned; constant channels are centered only.
std::pair<Dataset, NormalizationStats> normalize(const Dataset& dataset,
                                                 const std::optional<NormalizationStats>& stats = {});

/// Seeded shuffle, then per-label counts into train; the rest is test.
std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  const std::map<std::string, std::size_t>& train_counts,
                                  std::uint64_t seed);

/// Seeded shuffle, then the given fraction of each label into train.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// One sinusoid of a synthetic signal family.
struct SynthComponent {
    double freq = 1.0;   // Hz
    double amp = 1.0;
    double phase = 0.0;  // radians
};

/// A synthetic class: either its own signal family, or a mixture that
/// interpolates the parameters of two other classes (mixing 0 = first).
struct SynthClass {
    std::string label;
    std::size_t clips = 0;
    double noise = 0.0;  // stddev of additive Gaussian noise
    std::vector<SynthComponent> components;
    std::optional<std::pair<std::string, std::string>> mix_of;
    double mixing = 0.0;
};

struct SynthSpec {
    Eigen::Index channels = 0;
    double frame_rate = 10.0;
    Eigen::Index min_frames = 120;
    Eigen::Index max_frames = 300;
    double channel_lag = 0.4;  // phase lag between adjacent channels, radians
    std::vector<SynthClass> classes;
};

/// Parses a SynthSpec from its JSON file representation.
SynthSpec load_synth_spec(const std::filesystem::path& path);
SynthSpec parse_synth_spec(const std::string& json_text);

/// Throws DataError on structural problems: no classes, zero channels,
/// dangling or nested mixture references, negative noise, bad frame range.
void validate_synth_spec(const SynthSpec& spec);

/// Deterministic labeled dataset from a synthetic spec. Generation depends
/// only on (resolved parameters, seed), never on labels or class position,
/// so a mixture at coefficient 0 reproduces its first base class exactly.
Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// RNG stream key of one class: a hash of its resolved signal parameters.
/// Classes that resolve to identical parameters share a key — this is what
/// makes mixtures at the endpoints reproduce their base class bit for bit.
std::uint64_t class_stream_key(const SynthSpec& spec, std::size_t class_index);

}  // namespace esn
