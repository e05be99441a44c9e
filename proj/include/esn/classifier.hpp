#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "esn/conceptor.hpp"
#include "esn/dataio.hpp"
#include "esn/reservoir.hpp"

namespace esn {

struct TrainingConfig {
    ReservoirParams reservoir;
    Eigen::Index washout = 10;
    double aperture = 10.0;

    void validate() const;

    bool operator==(const TrainingConfig&) const = default;
};

/// Per-label positive evidence h(j) = mean over time of z^T C_j z.
struct EvidenceVector {
    std::vector<std::string> labels;
    std::vector<double> values;

    double value_for(const std::string& label) const;
};

/// Everything needed to reproduce classification: the reservoir, one
/// conceptor per label, frozen normalization stats, and the config echo.
struct ClassifierModel {
    static constexpr std::uint32_t format_version = 1;

    Reservoir reservoir;
    std::vector<Conceptor> conceptors;  // label order fixed at training time
    NormalizationStats preprocessing;
    std::vector<std::string> channel_names;
    TrainingConfig config;

    std::vector<std::string> labels() const;
    const Conceptor& conceptor_for(const std::string& label) const;
};

/// Normalizes with train-set statistics, drives every sample independently,
/// pools states per class, and computes one conceptor per label.
ClassifierModel train(const Dataset& train_set, const TrainingConfig& config);

/// Mean quadratic form z^T C_j z over the trajectory's states, per label.
EvidenceVector positive_evidence(const ClassifierModel& model, const StateTrajectory& trajectory);

/// Normalizes with the stored stats, drives the reservoir, and returns the
/// argmax label (ties to the lexicographically smallest) with all evidence.
std::pair<std::string, EvidenceVector> classify(const ClassifierModel& model, const Sample& sample);

/// Writes the model as a single self-describing binary file: JSON header
/// (config, labels, channels), raw little-endian doubles, FNV-1a checksum.
/// The write is atomic (temp file + rename).
void save_model(const ClassifierModel& model, const std::filesystem::path& destination);

/// Rebuilds a model byte-exactly from save_model's output. Throws
/// ModelVersionError on a version mismatch and ModelCorruptError on a
/// truncated or checksum-failing file.
ClassifierModel load_model(const std::filesystem::path& source);

}  // namespace esn
