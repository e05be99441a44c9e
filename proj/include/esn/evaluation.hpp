#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace esn {

/// Label-indexed count matrix; rows are truth, columns are predictions.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<long>> counts;

    long total() const;
    double accuracy() const;
    /// Recall of a class with zero true instances is nullopt, never 0/0.
    std::optional<double> recall(std::size_t label_index) const;
    std::optional<double> precision(std::size_t label_index) const;
    std::size_t index_of(const std::string& label) const;
};

/// Tallies (truth, predicted) pairs over a known label set; any label
/// outside the set is an error.
ConfusionMatrix confusion(const std::vector<std::pair<std::string, std::string>>& truth_predicted,
                          const std::vector<std::string>& known_labels);

enum class AlphaLevel { interval, ordinal };

/// Raters x items, missing entries permitted.
struct RatingTable {
    std::vector<std::vector<std::optional<double>>> ratings;  // [rater][item]
    AlphaLevel level = AlphaLevel::interval;
    std::optional<std::pair<double, double>> scale_bounds;

    std::size_t n_raters() const { return ratings.size(); }
    std::size_t n_items() const { return ratings.empty() ? 0 : ratings.front().size(); }
};

/// Krippendorff's alpha, 1 - D_o/D_e, via the coincidence-matrix
/// formulation. Interval uses squared differences; ordinal uses
/// cumulative-margin differences. Items rated once contribute nothing;
/// with no pairable values at all, alpha is undefined and this throws.
double krippendorff_alpha(const RatingTable& table);

struct ReportOptions {
    bool svg = true;
    std::vector<std::string> comments;  // echoed verbatim at the top of outputs
};

/// Writes report.csv (`truth,predicted,count` rows then `metric,value`
/// rows) and report.svg (row-normalized heatmap) into `out_dir`.
/// Byte-deterministic given identical inputs.
void emit_report(const ConfusionMatrix& cm, const std::filesystem::path& out_dir,
                 const ReportOptions& options = {});

/// The SVG heatmap as a string; exposed for tests and custom sinks.
std::string render_confusion_svg(const ConfusionMatrix& cm,
                                 const std::vector<std::string>& comments = {});

}  // namespace esn
