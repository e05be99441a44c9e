#include "esn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "esn/errors.hpp"
#include "internal.hpp"

namespace esn {

long ConfusionMatrix::total() const {
    long sum = 0;
    for (const auto& row : counts)
        for (long c : row) sum += c;
    return sum;
}

double ConfusionMatrix::accuracy() const {
    const long n = total();
    if (n == 0) throw DataError("accuracy of an empty confusion matrix");
    long diag = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
    return static_cast<double>(diag) / static_cast<double>(n);
}

std::optional<double> ConfusionMatrix::recall(std::size_t label_index) const {
    const auto& row = counts.at(label_index);
    long truth_total = 0;
    for (long c : row) truth_total += c;
    if (truth_total == 0) return std::nullopt;
    return static_cast<double>(row[label_index]) / static_cast<double>(truth_total);
}

std::optional<double> ConfusionMatrix::precision(std::size_t label_index) const {
    long predicted_total = 0;
    for (const auto& row : counts) predicted_total += row.at(label_index);
    if (predicted_total == 0) return std::nullopt;
    return static_cast<double>(counts[label_index][label_index]) / static_cast<double>(predicted_total);
}

std::size_t ConfusionMatrix::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    throw DataError("label " + label + " is not part of this confusion matrix");
}

ConfusionMatrix confusion(const std::vector<std::pair<std::string, std::string>>& truth_predicted,
                          const std::vector<std::string>& known_labels) {
    if (truth_predicted.empty()) throw DataError("no prediction pairs to tally");
    if (known_labels.empty()) throw DataError("empty label set");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < known_labels.size(); ++i)
        if (!index.emplace(known_labels[i], i).second)
            throw DataError("duplicate label " + known_labels[i] + " in label set");

    ConfusionMatrix cm;
    cm.labels = known_labels;
    cm.counts.assign(known_labels.size(), std::vector<long>(known_labels.size(), 0));
    for (const auto& [truth, predicted] : truth_predicted) {
        const auto t = index.find(truth);
        if (t == index.end()) throw DataError("unknown truth label " + truth);
        const auto p = index.find(predicted);
        if (p == index.end()) throw DataError("unknown predicted label " + predicted);
        cm.counts[t->second][p->second]++;
    }
    return cm;
}

double krippendorff_alpha(const RatingTable& table) {
    if (table.ratings.empty()) throw DataError("rating table has no raters");
    const std::size_t items = table.n_items();
    for (const auto& row : table.ratings)
        if (row.size() != items) throw DataError("rating table rows have unequal item counts");

    for (const auto& row : table.ratings)
        for (const auto& cell : row) {
            if (!cell) continue;
            if (!std::isfinite(*cell)) throw DataError("non-finite rating in table");
            if (table.scale_bounds &&
                (*cell < table.scale_bounds->first || *cell > table.scale_bounds->second))
                throw DataError("rating " + detail::fmt_double(*cell) + " outside declared scale [" +
                                detail::fmt_double(table.scale_bounds->first) + ", " +
                                detail::fmt_double(table.scale_bounds->second) + "]");
        }

    // Values grouped by item; only items with two or more ratings are
    // pairable and enter the coincidence matrix.
    std::vector<std::vector<double>> units(items);
    for (const auto& row : table.ratings)
        for (std::size_t u = 0; u < items; ++u)
            if (row[u]) units[u].push_back(*row[u]);

    std::vector<double> categories;
    double n = 0.0;
    for (const auto& unit : units)
        if (unit.size() >= 2) {
            n += static_cast<double>(unit.size());
            categories.insert(categories.end(), unit.begin(), unit.end());
        }
    if (n == 0.0) throw DataError("no pairable values: every item has fewer than two ratings");
    std::sort(categories.begin(), categories.end());
    categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
    const std::size_t k = categories.size();
    const auto cat_of = [&](double v) {
        return static_cast<std::size_t>(
            std::lower_bound(categories.begin(), categories.end(), v) - categories.begin());
    };

    // Coincidence counts: each ordered pair within a unit contributes
    // 1/(m_u - 1), so every unit adds exactly m_u to the matrix mass.
    std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
    for (const auto& unit : units) {
        if (unit.size() < 2) continue;
        const double weight = 1.0 / static_cast<double>(unit.size() - 1);
        for (std::size_t i = 0; i < unit.size(); ++i)
            for (std::size_t j = 0; j < unit.size(); ++j)
                if (i != j) o[cat_of(unit[i])][cat_of(unit[j])] += weight;
    }

    std::vector<double> margin(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t d = 0; d < k; ++d) margin[c] += o[c][d];

    const auto delta = [&](std::size_t c, std::size_t d) {
        if (table.level == AlphaLevel::interval) {
            const double diff = categories[c] - categories[d];
            return diff * diff;
        }
        // Ordinal: cumulative margin between the two categories, with the
        // endpoints counted half.
        const std::size_t lo = std::min(c, d), hi = std::max(c, d);
        double cum = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) cum += margin[g];
        cum -= (margin[lo] + margin[hi]) / 2.0;
        return cum * cum;
    };

    double d_obs = 0.0;
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t d = 0; d < k; ++d)
            if (c != d) d_obs += o[c][d] * delta(c, d);
    d_obs /= n;

    // Perfect agreement short-circuits to exactly 1 — and covers the
    // degenerate one-category table whose expected disagreement is 0 too.
    if (d_obs == 0.0) return 1.0;

    double d_exp = 0.0;
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t d = 0; d < k; ++d)
            if (c != d) d_exp += margin[c] * margin[d] * delta(c, d);
    d_exp /= n * (n - 1.0);

    return 1.0 - d_obs / d_exp;
}

std::string render_confusion_svg(const ConfusionMatrix& cm, const std::vector<std::string>& comments) {
    const std::size_t k = cm.labels.size();
    const int cell = 72;
    const int margin = 96;
    const int width = margin + static_cast<int>(k) * cell + 24;
    const int height = margin + static_cast<int>(k) * cell + 24;

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    for (const auto& comment : comments) {
        svg += "<!-- ";
        // Guard the comment terminator; config echoes never contain it, but
        // be safe for arbitrary captions.
        std::string safe = comment;
        std::size_t at;
        while ((at = safe.find("--")) != std::string::npos) safe.replace(at, 2, "- -");
        svg += safe;
        svg += " -->\n";
    }
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(margin / 2) + "\" y=\"16\" fill=\"#333\">truth \\ predicted</text>\n";

    std::vector<long> row_totals(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) row_totals[i] += cm.counts[i][j];

    for (std::size_t j = 0; j < k; ++j) {
        const int x = margin + static_cast<int>(j) * cell + cell / 2;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(margin - 10) +
               "\" text-anchor=\"middle\" fill=\"#333\">" + cm.labels[j] + "</text>\n";
    }

    for (std::size_t i = 0; i < k; ++i) {
        const int y = margin + static_cast<int>(i) * cell;
        svg += "<text x=\"" + std::to_string(margin - 10) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
               "\" text-anchor=\"end\" fill=\"#333\">" + cm.labels[i] + "</text>\n";
        for (std::size_t j = 0; j < k; ++j) {
            const int x = margin + static_cast<int>(j) * cell;
            const double share =
                row_totals[i] > 0
                    ? static_cast<double>(cm.counts[i][j]) / static_cast<double>(row_totals[i])
                    : 0.0;
            // Linear ramp white -> accent blue; integer math keeps the bytes
            // identical across runs and platforms.
            const auto ramp = [share](int from, int to) {
                return static_cast<int>(std::lround(from + (to - from) * share));
            };
            const int r = ramp(255, 33), g = ramp(255, 102), b = ramp(255, 172);
            svg += "<rect data-cell=\"" + cm.labels[i] + ":" + cm.labels[j] + "\" x=\"" +
                   std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                   std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" +
                   std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) +
                   ")\" stroke=\"#999\"/>\n";
            const bool dark = share > 0.55;
            svg += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" +
                   std::to_string(y + cell / 2 + 4) + "\" text-anchor=\"middle\" fill=\"" +
                   (dark ? "white" : "#333") + "\">" + std::to_string(cm.counts[i][j]) + "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

void emit_report(const ConfusionMatrix& cm, const std::filesystem::path& out_dir,
                 const ReportOptions& options) {
    if (cm.labels.empty()) throw DataError("cannot report an empty confusion matrix");

    std::string csv;
    for (const auto& comment : options.comments) {
        csv += comment;
        csv += '\n';
    }
    csv += "truth,predicted,count\n";
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        for (std::size_t j = 0; j < cm.labels.size(); ++j)
            csv += cm.labels[i] + "," + cm.labels[j] + "," + std::to_string(cm.counts[i][j]) + "\n";

    csv += "metric,value\n";
    csv += "accuracy," + detail::fmt_double(cm.accuracy()) + "\n";
    const auto metric = [](const std::optional<double>& v) {
        return v ? detail::fmt_double(*v) : std::string("undefined");
    };
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        csv += "recall_" + cm.labels[i] + "," + metric(cm.recall(i)) + "\n";
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        csv += "precision_" + cm.labels[i] + "," + metric(cm.precision(i)) + "\n";

    std::filesystem::create_directories(out_dir);
    detail::write_file_atomic(out_dir / "report.csv", csv);
    if (options.svg)
        detail::write_file_atomic(out_dir / "report.svg", render_confusion_svg(cm, options.comments));
}

}  // namespace esn
