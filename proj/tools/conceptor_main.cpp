// conceptor — command-line front end for the echo-state conceptor pipeline.
//
// One binary, seven subcommands:
//
//   synth     spec.json            -> pose-CSV tree + manifest
//   train     manifest             -> model file + training report
//   classify  model + manifest     -> predictions CSV
//   eval      predictions + truth  -> report.csv / report.svg
//   morph     model + two labels   -> model extended with a blended class
//   inspect   model                -> JSON summary on stdout
//   alpha     ratings CSV          -> Krippendorff's alpha on stdout
//
// Every run is deterministic given its inputs and --seed, and every file
// artifact opens with a `# config {...}` echo of the fully materialized
// configuration that produced it. Failures print a single
// `error[usage|data|numeric|internal]: ...` line on stderr; exit codes are
// 0 success, 1 usage, 2 bad data, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esn/classifier.hpp"
#include "esn/conceptor.hpp"
#include "esn/dataio.hpp"
#include "esn/errors.hpp"
#include "esn/evaluation.hpp"
#include "esn/reservoir.hpp"
#include "internal.hpp"

namespace {

using nlohmann::json;

// Tunables for the commands that build things, with the front end's
// defaults. A JSON config file fills these first; flags passed on the
// command line win over the file.
struct RunConfig {
    std::uint64_t seed = 42;
    long reservoir_size = 100;
    double spectral_radius = 0.9;
    double input_scale = 1.0;
    double bias_scale = 0.2;
    double connectivity = 0.1;
    long washout = 10;
    double aperture = 10.0;
};

std::string one_line(std::string s) {
    for (auto& ch : s)
        if (ch == '\n') ch = ' ';
    return s;
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
    json j;
    try {
        j = json::parse(esn::detail::read_file(path));
    } catch (const json::exception& e) {
        throw esn::DataError("config file " + path + " is not valid JSON: " + one_line(e.what()));
    }
    if (!j.is_object()) throw esn::DataError("config file " + path + " must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "seed")
                cfg.seed = value.get<std::uint64_t>();
            else if (key == "reservoir_size")
                cfg.reservoir_size = value.get<long>();
            else if (key == "spectral_radius")
                cfg.spectral_radius = value.get<double>();
            else if (key == "input_scale")
                cfg.input_scale = value.get<double>();
            else if (key == "bias_scale")
                cfg.bias_scale = value.get<double>();
            else if (key == "connectivity")
                cfg.connectivity = value.get<double>();
            else if (key == "washout")
                cfg.washout = value.get<long>();
            else if (key == "aperture")
                cfg.aperture = value.get<double>();
            else
                throw esn::DataError("config file " + path + " has an unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw esn::DataError("config file " + path + ", key '" + key + "': " + one_line(e.what()));
        }
    }
}

// Flag plumbing shared by synth and train. The flag values land in
// `flags.values`; resolve() starts from defaults, applies the config file,
// then re-applies exactly the flags the user typed.
struct Tunables {
    RunConfig values;
    std::string config_path;
    CLI::Option* config = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* reservoir_size = nullptr;
    CLI::Option* spectral_radius = nullptr;
    CLI::Option* input_scale = nullptr;
    CLI::Option* bias_scale = nullptr;
    CLI::Option* connectivity = nullptr;
    CLI::Option* washout = nullptr;
    CLI::Option* aperture = nullptr;
};

void add_common_flags(CLI::App& cmd, Tunables& t) {
    t.config = cmd.add_option("--config", t.config_path,
                              "JSON config file; explicit flags override its values");
    t.seed = cmd.add_option("--seed", t.values.seed, "master RNG seed (default 42)");
}

void add_model_flags(CLI::App& cmd, Tunables& t) {
    t.reservoir_size = cmd.add_option("--reservoir-size", t.values.reservoir_size,
                                      "reservoir neuron count (default 100)");
    t.spectral_radius = cmd.add_option("--spectral-radius", t.values.spectral_radius,
                                       "recurrent weight spectral radius (default 0.9)");
    t.input_scale =
        cmd.add_option("--input-scale", t.values.input_scale, "input weight scale (default 1)");
    t.bias_scale =
        cmd.add_option("--bias-scale", t.values.bias_scale, "bias scale (default 0.2)");
    t.connectivity = cmd.add_option("--connectivity", t.values.connectivity,
                                    "recurrent nonzero fraction (default 0.1)");
    t.washout = cmd.add_option("--washout", t.values.washout,
                               "initial reservoir states to drop per clip (default 10)");
    t.aperture =
        cmd.add_option("--aperture", t.values.aperture, "conceptor aperture (default 10)");
}

RunConfig resolve(const Tunables& t) {
    RunConfig cfg;
    if (t.config && t.config->count() > 0) apply_config_file(t.config_path, cfg);
    const auto take = [](const CLI::Option* opt, auto& dst, const auto& src) {
        if (opt && opt->count() > 0) dst = src;
    };
    take(t.seed, cfg.seed, t.values.seed);
    take(t.reservoir_size, cfg.reservoir_size, t.values.reservoir_size);
    take(t.spectral_radius, cfg.spectral_radius, t.values.spectral_radius);
    take(t.input_scale, cfg.input_scale, t.values.input_scale);
    take(t.bias_scale, cfg.bias_scale, t.values.bias_scale);
    take(t.connectivity, cfg.connectivity, t.values.connectivity);
    take(t.washout, cfg.washout, t.values.washout);
    take(t.aperture, cfg.aperture, t.values.aperture);
    return cfg;
}

json tunables_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["reservoir_size"] = cfg.reservoir_size;
    j["spectral_radius"] = cfg.spectral_radius;
    j["input_scale"] = cfg.input_scale;
    j["bias_scale"] = cfg.bias_scale;
    j["connectivity"] = cfg.connectivity;
    j["washout"] = cfg.washout;
    j["aperture"] = cfg.aperture;
    return j;
}

json training_config_json(const esn::TrainingConfig& tc) {
    json j;
    j["seed"] = tc.reservoir.seed;
    j["reservoir_size"] = static_cast<long>(tc.reservoir.n_neurons);
    j["spectral_radius"] = tc.reservoir.spectral_radius;
    j["input_scale"] = tc.reservoir.input_scale;
    j["bias_scale"] = tc.reservoir.bias_scale;
    j["connectivity"] = tc.reservoir.connectivity;
    j["washout"] = static_cast<long>(tc.washout);
    j["aperture"] = tc.aperture;
    return j;
}

// nlohmann keeps object keys sorted, so dump() is stable across runs.
std::string config_comment(const json& echo) { return "# config " + echo.dump(); }

void cmd_synth(const std::string& spec_path, const std::string& out_dir, const RunConfig& cfg) {
    const esn::SynthSpec spec = esn::load_synth_spec(spec_path);
    const esn::Dataset data = esn::synth_generate(spec, cfg.seed);

    json echo;
    echo["command"] = "synth";
    echo["spec"] = spec_path;
    echo["out"] = out_dir;
    echo["seed"] = cfg.seed;
    esn::write_dataset(out_dir, data, {config_comment(echo)});
    std::cout << "wrote " << data.samples.size() << " clips to " << out_dir << "\n";
}

void cmd_train(const std::string& manifest, const std::string& model_out,
               const std::string& report_dir_flag, const RunConfig& cfg) {
    const esn::Dataset data = esn::load_dataset(manifest);

    esn::TrainingConfig tc;
    tc.reservoir.n_neurons = cfg.reservoir_size;
    tc.reservoir.n_inputs = data.n_channels();
    tc.reservoir.spectral_radius = cfg.spectral_radius;
    tc.reservoir.input_scale = cfg.input_scale;
    tc.reservoir.bias_scale = cfg.bias_scale;
    tc.reservoir.connectivity = cfg.connectivity;
    tc.reservoir.seed = cfg.seed;
    tc.washout = cfg.washout;
    tc.aperture = cfg.aperture;

    const esn::ClassifierModel model = esn::train(data, tc);
    esn::save_model(model, model_out);

    // Reclassify the training set for the report; skip the clips train()
    // itself had to skip for being shorter than the washout.
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& sample : data.samples) {
        if (sample.n_frames() <= tc.washout) continue;
        pairs.emplace_back(*sample.label, esn::classify(model, sample).first);
    }
    const esn::ConfusionMatrix cm = esn::confusion(pairs, model.labels());

    json echo = tunables_json(cfg);
    echo["command"] = "train";
    echo["data"] = manifest;
    echo["model"] = model_out;
    const std::string report_dir =
        report_dir_flag.empty()
            ? std::filesystem::path(model_out).parent_path().string()
            : report_dir_flag;
    echo["report_dir"] = report_dir;

    esn::ReportOptions opts;
    opts.comments = {config_comment(echo)};
    esn::emit_report(cm, report_dir.empty() ? "." : report_dir, opts);

    std::cout << "model " << model_out << " (" << model.conceptors.size()
              << " classes), training accuracy " << esn::detail::fmt_double(cm.accuracy())
              << "\n";
}

void cmd_classify(const std::string& model_path, const std::string& manifest,
                  const std::string& out_path) {
    const esn::ClassifierModel model = esn::load_model(model_path);
    const esn::Dataset data = esn::load_dataset(manifest);
    if (!data.samples.empty() && data.channel_names != model.channel_names)
        throw esn::DataError("dataset channels do not match the model's channels");

    json echo = training_config_json(model.config);
    echo["command"] = "classify";
    echo["model"] = model_path;
    echo["data"] = manifest;
    echo["out"] = out_path;

    std::string csv = config_comment(echo) + "\n";
    csv += "clip_id,predicted";
    for (const auto& label : model.labels()) csv += ",evidence_" + label;
    csv += '\n';

    for (const auto& sample : data.samples) {
        const auto [predicted, evidence] = esn::classify(model, sample);
        csv += sample.clip_id + "," + predicted;
        for (double v : evidence.values) csv += "," + esn::detail::fmt_double(v);
        csv += '\n';
    }
    esn::detail::write_file_atomic(out_path, csv);

    if (data.samples.empty())
        std::cerr << "warning: " << manifest << " lists no clips; wrote a header-only file\n";
    std::cout << "wrote " << data.samples.size() << " predictions to " << out_path << "\n";
}

// Truth labels straight from a manifest's `clip_id,label,path` lines —
// no need to touch the per-clip files just to score predictions.
std::map<std::string, std::string> truth_labels(const std::string& manifest_path) {
    const std::string text = esn::detail::read_file(manifest_path);
    std::map<std::string, std::string> truth;
    std::size_t line_no = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto eol = rest.find('\n');
        std::string_view line = rest.substr(0, eol);
        rest = (eol == std::string_view::npos) ? std::string_view{} : rest.substr(eol + 1);
        ++line_no;
        line = esn::detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = esn::detail::split_fields(line);
        if (fields.size() != 3)
            throw esn::DataError(manifest_path + ": line " + std::to_string(line_no) +
                                 " must be clip_id,label,path");
        const std::string clip_id{esn::detail::trim(fields[0])};
        const std::string label{esn::detail::trim(fields[1])};
        if (clip_id.empty() || label.empty())
            throw esn::DataError(manifest_path + ": line " + std::to_string(line_no) +
                                 " lacks a clip_id or label");
        if (!truth.emplace(clip_id, label).second)
            throw esn::DataError(manifest_path + ": duplicate clip_id " + clip_id);
    }
    return truth;
}

void cmd_eval(const std::string& predictions_path, const std::string& truth_manifest,
              const std::string& out_dir) {
    const std::string text = esn::detail::read_file(predictions_path);
    const auto truth = truth_labels(truth_manifest);

    std::vector<std::string> labels;  // from the evidence_ columns
    std::vector<std::pair<std::string, std::string>> pairs;
    bool header_seen = false;
    std::size_t line_no = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto eol = rest.find('\n');
        std::string_view line = rest.substr(0, eol);
        rest = (eol == std::string_view::npos) ? std::string_view{} : rest.substr(eol + 1);
        ++line_no;
        line = esn::detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = esn::detail::split_fields(line);
        if (!header_seen) {
            if (fields.size() < 2 || esn::detail::trim(fields[0]) != "clip_id" ||
                esn::detail::trim(fields[1]) != "predicted")
                throw esn::DataError(predictions_path +
                                     ": header must start with clip_id,predicted");
            for (std::size_t i = 2; i < fields.size(); ++i) {
                const std::string_view col = esn::detail::trim(fields[i]);
                if (col.rfind("evidence_", 0) != 0)
                    throw esn::DataError(predictions_path + ": unexpected column '" +
                                         std::string(col) + "'");
                labels.emplace_back(col.substr(9));
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 2 + labels.size())
            throw esn::DataError(predictions_path + ": line " + std::to_string(line_no) +
                                 " has the wrong number of fields");
        const std::string clip_id{esn::detail::trim(fields[0])};
        const std::string predicted{esn::detail::trim(fields[1])};
        const auto it = truth.find(clip_id);
        if (it == truth.end())
            throw esn::DataError(truth_manifest + " has no truth label for clip " + clip_id);
        pairs.emplace_back(it->second, predicted);
    }
    if (!header_seen) throw esn::DataError(predictions_path + " has no header row");
    if (pairs.empty()) throw esn::DataError(predictions_path + " holds no predictions to score");

    // Known labels: whatever the model could predict, plus every truth
    // label that actually appears among the scored clips.
    std::set<std::string> known(labels.begin(), labels.end());
    for (const auto& [t, p] : pairs) known.insert(t);
    const esn::ConfusionMatrix cm =
        esn::confusion(pairs, std::vector<std::string>(known.begin(), known.end()));

    json echo;
    echo["command"] = "eval";
    echo["predictions"] = predictions_path;
    echo["truth"] = truth_manifest;
    echo["out"] = out_dir;

    esn::ReportOptions opts;
    opts.comments = {config_comment(echo)};
    esn::emit_report(cm, out_dir, opts);
    std::cout << "accuracy " << esn::detail::fmt_double(cm.accuracy()) << " over "
              << cm.total() << " clips\n";
}

void cmd_morph(const std::string& model_path, const std::string& label_a,
               const std::string& label_b, double weight, const std::string& out_path) {
    esn::ClassifierModel model = esn::load_model(model_path);
    const esn::Conceptor& a = model.conceptor_for(label_a);
    const esn::Conceptor& b = model.conceptor_for(label_b);

    // `weight` multiplies label_a, so weight 0 reproduces C_b exactly.
    esn::Conceptor mixed = esn::linear_combine({a, b}, {weight, 1.0 - weight});
    mixed.label = label_a + "~" + label_b + "@" + esn::detail::fmt_double(weight);
    for (const auto& existing : model.conceptors)
        if (existing.label == mixed.label)
            throw esn::DataError("model already holds a conceptor labeled " + mixed.label);

    const std::string new_label = mixed.label;
    model.conceptors.push_back(std::move(mixed));
    esn::save_model(model, out_path);
    std::cout << new_label << "\n";
}

void cmd_inspect(const std::string& model_path) {
    const esn::ClassifierModel model = esn::load_model(model_path);
    json j;
    j["format_version"] = esn::ClassifierModel::format_version;
    j["config"] = training_config_json(model.config);
    j["channels"] = model.channel_names;
    json conceptors = json::array();
    for (const auto& c : model.conceptors) {
        json entry;
        entry["label"] = c.label;
        entry["quota"] = esn::quota(c);
        if (c.aperture)
            entry["aperture"] = *c.aperture;
        else
            entry["aperture"] = nullptr;
        conceptors.push_back(std::move(entry));
    }
    j["conceptors"] = std::move(conceptors);
    std::cout << j.dump(2) << "\n";
}

// Ratings CSV: header `item,<rater names...>`, one row per item, blank
// cells for missing ratings.
esn::RatingTable load_ratings(const std::string& path, esn::AlphaLevel level) {
    const std::string text = esn::detail::read_file(path);
    esn::RatingTable table;
    table.level = level;
    std::size_t n_raters = 0;
    bool header_seen = false;
    std::size_t line_no = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto eol = rest.find('\n');
        std::string_view line = rest.substr(0, eol);
        rest = (eol == std::string_view::npos) ? std::string_view{} : rest.substr(eol + 1);
        ++line_no;
        if (esn::detail::trim(line).empty() && rest.empty()) break;  // trailing newline
        if (!esn::detail::trim(line).empty() && esn::detail::trim(line).front() == '#') continue;
        const auto fields = esn::detail::split_fields(line);
        if (!header_seen) {
            if (fields.size() < 2)
                throw esn::DataError(path + ": header needs at least one rater column");
            n_raters = fields.size() - 1;
            table.ratings.resize(n_raters);
            header_seen = true;
            continue;
        }
        if (fields.size() != n_raters + 1)
            throw esn::DataError(path + ": line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(n_raters + 1));
        for (std::size_t r = 0; r < n_raters; ++r) {
            const std::string_view cell = esn::detail::trim(fields[r + 1]);
            if (cell.empty()) {
                table.ratings[r].push_back(std::nullopt);
                continue;
            }
            const auto value = esn::detail::parse_double(cell);
            if (!value)
                throw esn::DataError(path + ": line " + std::to_string(line_no) + ", rater " +
                                     std::to_string(r + 1) + ": '" + std::string(cell) +
                                     "' is not a number");
            table.ratings[r].push_back(*value);
        }
    }
    if (!header_seen) throw esn::DataError(path + " has no header row");
    return table;
}

void cmd_alpha(const std::string& ratings_path, const std::string& level_name) {
    const esn::AlphaLevel level =
        level_name == "ordinal" ? esn::AlphaLevel::ordinal : esn::AlphaLevel::interval;
    const esn::RatingTable table = load_ratings(ratings_path, level);
    std::cout << "alpha," << esn::detail::fmt_double(esn::krippendorff_alpha(table)) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Echo-state conceptor pipeline: synthesize, train, classify, evaluate."};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    std::string synth_spec, synth_out;
    Tunables synth_flags;
    synth->add_option("spec", synth_spec, "synthesis spec (JSON)")->required();
    synth->add_option("--out", synth_out, "output directory")->required();
    add_common_flags(*synth, synth_flags);
    synth->callback([&] { cmd_synth(synth_spec, synth_out, resolve(synth_flags)); });

    // train
    auto* train = app.add_subcommand("train", "Train a conceptor classifier from a manifest");
    std::string train_manifest, train_out, train_report_dir;
    Tunables train_flags;
    train->add_option("data", train_manifest, "training manifest (clip_id,label,path)")->required();
    train->add_option("--out", train_out, "model file to write")->required();
    train->add_option("--report-dir", train_report_dir,
                      "where to write the training report (default: the model's directory)");
    add_common_flags(*train, train_flags);
    add_model_flags(*train, train_flags);
    train->callback(
        [&] { cmd_train(train_manifest, train_out, train_report_dir, resolve(train_flags)); });

    // classify
    auto* classify = app.add_subcommand("classify", "Predict labels for a manifest of clips");
    std::string cls_model, cls_manifest, cls_out;
    classify->add_option("model", cls_model, "model file")->required();
    classify->add_option("data", cls_manifest, "manifest of clips to classify")->required();
    classify->add_option("--out", cls_out, "predictions CSV to write")->required();
    classify->callback([&] { cmd_classify(cls_model, cls_manifest, cls_out); });

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against a truth manifest");
    std::string eval_predictions, eval_truth, eval_out;
    eval->add_option("predictions", eval_predictions, "predictions CSV from classify")->required();
    eval->add_option("truth", eval_truth, "manifest holding the true labels")->required();
    eval->add_option("--out", eval_out, "report directory")->required();
    eval->callback([&] { cmd_eval(eval_predictions, eval_truth, eval_out); });

    // morph
    auto* morph = app.add_subcommand("morph", "Blend two learned conceptors into a new class");
    std::string morph_model, morph_a, morph_b, morph_out;
    double morph_weight = 0.5;
    morph->add_option("model", morph_model, "model file")->required();
    morph->add_option("label_a", morph_a, "first class label")->required();
    morph->add_option("label_b", morph_b, "second class label")->required();
    morph->add_option("--weight", morph_weight, "coefficient on label_a (default 0.5)")
        ->check(CLI::Range(0.0, 1.0));
    morph->add_option("--out", morph_out, "model file to write")->required();
    morph->callback([&] { cmd_morph(morph_model, morph_a, morph_b, morph_weight, morph_out); });

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print a model summary as JSON");
    std::string inspect_model;
    inspect->add_option("model", inspect_model, "model file")->required();
    inspect->callback([&] { cmd_inspect(inspect_model); });

    // alpha
    auto* alpha = app.add_subcommand("alpha", "Krippendorff's alpha for a rating table");
    std::string alpha_ratings, alpha_level = "interval";
    alpha->add_option("ratings", alpha_ratings, "CSV: header item,<raters...>, blank = missing")
        ->required();
    alpha->add_option("--level", alpha_level, "measurement level (default interval)")
        ->check(CLI::IsMember({"interval", "ordinal"}));
    alpha->callback([&] { cmd_alpha(alpha_ratings, alpha_level); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const esn::NumericError& e) {
        std::cerr << "error[numeric]: " << one_line(e.what()) << "\n";
        return 3;
    } catch (const esn::DataError& e) {
        std::cerr << "error[data]: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << one_line(e.what()) << "\n";
        return 3;
    }
    return 0;
}
