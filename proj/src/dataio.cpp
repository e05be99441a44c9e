#include "esn/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <set>

#include <json.hpp>

#include "esn/errors.hpp"
#include "esn/rng.hpp"
#include "internal.hpp"

namespace esn {

namespace {

using detail::fmt_double;
using detail::parse_double;
using detail::split_fields;
using detail::trim;

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

}  // namespace

Sample load_pose_csv(const std::filesystem::path& path, std::vector<std::string>* channel_names) {
    const std::string text = detail::read_file(path);
    const auto lines = split_lines(text);
    if (lines.empty()) throw DataError(path.string() + ": empty file");

    const auto header = split_fields(lines[0]);
    if (header.size() < 2 || trim(header[0]) != "frame")
        throw DataError(path.string() + ": header must be frame,<channel names...>");
    std::vector<std::string> names;
    for (std::size_t i = 1; i < header.size(); ++i) {
        names.emplace_back(trim(header[i]));
        if (names.back().empty())
            throw DataError(path.string() + ": empty channel name in header column " + std::to_string(i + 1));
    }
    const auto k = static_cast<Eigen::Index>(names.size());

    std::vector<std::vector<double>> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string_view line = trim(lines[li]);
        if (line.empty()) {
            // Tolerate blank trailing lines only.
            for (std::size_t rest = li; rest < lines.size(); ++rest)
                if (!trim(lines[rest]).empty())
                    throw DataError(path.string() + ": blank row " + std::to_string(li));
            break;
        }
        const auto fields = split_fields(line);
        if (static_cast<Eigen::Index>(fields.size()) != k + 1)
            throw DataError(path.string() + ": row " + std::to_string(li) + " has " +
                            std::to_string(fields.size()) + " fields, expected " + std::to_string(k + 1));
        std::vector<double> row(static_cast<std::size_t>(k));
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const auto value = parse_double(fields[f]);
            if (!value || !std::isfinite(*value))
                throw DataError(path.string() + ": non-numeric or non-finite cell at row " +
                                std::to_string(li) + " column " + std::to_string(f + 1));
            if (f > 0) row[f - 1] = *value;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": no data rows");

    Sample sample;
    sample.clip_id = path.stem().string();
    sample.frames.resize(static_cast<Eigen::Index>(rows.size()), k);
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (Eigen::Index c = 0; c < k; ++c)
            sample.frames(static_cast<Eigen::Index>(t), c) = rows[t][static_cast<std::size_t>(c)];
    if (channel_names) *channel_names = std::move(names);
    return sample;
}

void write_pose_csv(const std::filesystem::path& path, const Sample& sample,
                    const std::vector<std::string>& channel_names) {
    if (static_cast<Eigen::Index>(channel_names.size()) != sample.n_channels())
        throw DataError("clip " + sample.clip_id + " has " + std::to_string(sample.n_channels()) +
                        " channels but " + std::to_string(channel_names.size()) + " names were given");
    if (sample.n_frames() < 1) throw DataError("clip " + sample.clip_id + " has no frames");

    std::string out = "frame";
    for (const auto& name : channel_names) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (Eigen::Index t = 0; t < sample.n_frames(); ++t) {
        out += std::to_string(t);
        for (Eigen::Index c = 0; c < sample.n_channels(); ++c) {
            out += ',';
            out += fmt_double(sample.frames(t, c));
        }
        out += '\n';
    }
    detail::write_file_atomic(path, out);
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const std::string text = detail::read_file(manifest_path);
    const auto dir = manifest_path.parent_path();

    Dataset ds;
    std::set<std::string> seen_ids;
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string_view line = trim(lines[li]);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_fields(line);
        if (fields.size() != 3)
            throw DataError(manifest_path.string() + ": line " + std::to_string(li + 1) +
                            " must be clip_id,label,path");
        const std::string clip_id{trim(fields[0])};
        const std::string label{trim(fields[1])};
        const std::string rel{trim(fields[2])};
        if (clip_id.empty() || rel.empty())
            throw DataError(manifest_path.string() + ": line " + std::to_string(li + 1) +
                            " has an empty clip_id or path");
        if (!seen_ids.insert(clip_id).second)
            throw DataError(manifest_path.string() + ": duplicate clip_id " + clip_id);

        std::filesystem::path clip_path(rel);
        if (clip_path.is_relative()) clip_path = dir / clip_path;

        std::vector<std::string> names;
        Sample sample = load_pose_csv(clip_path, &names);
        sample.clip_id = clip_id;
        if (!label.empty()) sample.label = label;

        if (ds.samples.empty()) {
            ds.channel_names = names;
        } else if (names != ds.channel_names) {
            throw DataError(manifest_path.string() + ": clip " + clip_id +
                            " declares different channels than the first clip");
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const std::vector<std::string>& manifest_comments) {
    std::filesystem::create_directories(dir);
    std::string manifest;
    for (const auto& comment : manifest_comments) {
        manifest += comment;
        manifest += '\n';
    }
    for (const auto& sample : dataset.samples) {
        if (sample.clip_id.empty()) throw DataError("cannot write a clip without a clip_id");
        const std::string file = sample.clip_id + ".csv";
        write_pose_csv(dir / file, sample, dataset.channel_names);
        manifest += sample.clip_id;
        manifest += ',';
        manifest += sample.label.value_or("");
        manifest += ',';
        manifest += file;
        manifest += '\n';
    }
    detail::write_file_atomic(dir / "manifest.csv", manifest);
}

std::pair<Dataset, NormalizationStats> normalize(const Dataset& dataset,
                                                 const std::optional<NormalizationStats>& stats) {
    const Eigen::Index k = dataset.n_channels();

    NormalizationStats used;
    if (stats) {
        if (stats->n_channels() != k)
            throw DataError("normalization stats cover " + std::to_string(stats->n_channels()) +
                            " channels, dataset has " + std::to_string(k));
        used = *stats;
    } else {
        Eigen::Index total = 0;
        for (const auto& s : dataset.samples) total += s.n_frames();
        if (total == 0) throw DataError("cannot compute normalization moments from an empty dataset");

        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        for (const auto& s : dataset.samples) mean += s.frames.colwise().sum().transpose();
        mean /= static_cast<double>(total);

        Eigen::VectorXd var = Eigen::VectorXd::Zero(k);
        for (const auto& s : dataset.samples)
            var += (s.frames.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
        var /= static_cast<double>(total);

        used.mean = mean;
        used.stddev = var.cwiseSqrt();
        used.constant.resize(static_cast<std::size_t>(k));
        for (Eigen::Index c = 0; c < k; ++c)
            used.constant[static_cast<std::size_t>(c)] = used.stddev(c) < 1e-12 ? 1 : 0;
    }

    Dataset out = dataset;
    for (auto& s : out.samples) {
        s.frames.rowwise() -= used.mean.transpose();
        for (Eigen::Index c = 0; c < k; ++c)
            if (!used.constant[static_cast<std::size_t>(c)]) s.frames.col(c) /= used.stddev(c);
    }
    return {std::move(out), std::move(used)};
}

namespace {

std::pair<Dataset, Dataset> split_impl(const Dataset& dataset,
                                       const std::map<std::string, std::size_t>& train_counts,
                                       std::uint64_t seed) {
    std::map<std::string, std::size_t> available;
    for (const auto& s : dataset.samples) {
        if (!s.label) throw DataError("cannot split: clip " + s.clip_id + " has no label");
        available[*s.label]++;
    }
    for (const auto& [label, want] : train_counts) {
        const auto it = available.find(label);
        if (it == available.end())
            throw DataError("split requests label " + label + " which the dataset does not contain");
        if (want > it->second)
            throw DataError("split requests " + std::to_string(want) + " training clips of label " +
                            label + " but only " + std::to_string(it->second) + " exist");
    }

    std::vector<std::size_t> order(dataset.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    seeded_shuffle(order, rng);

    std::vector<bool> in_train(dataset.samples.size(), false);
    std::map<std::string, std::size_t> remaining = train_counts;
    for (const std::size_t idx : order) {
        const auto it = remaining.find(*dataset.samples[idx].label);
        if (it != remaining.end() && it->second > 0) {
            in_train[idx] = true;
            --it->second;
        }
    }

    Dataset train, test;
    train.channel_names = dataset.channel_names;
    test.channel_names = dataset.channel_names;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        (in_train[i] ? train : test).samples.push_back(dataset.samples[i]);
    return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  const std::map<std::string, std::size_t>& train_counts,
                                  std::uint64_t seed) {
    return split_impl(dataset, train_counts, seed);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw DataError("train fraction must lie in [0, 1], got " + std::to_string(train_fraction));
    std::map<std::string, std::size_t> per_label;
    for (const auto& s : dataset.samples) {
        if (!s.label) throw DataError("cannot split: clip " + s.clip_id + " has no label");
        per_label[*s.label]++;
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& [label, n] : per_label)
        counts[label] = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(n)));
    return split_impl(dataset, counts, seed);
}

namespace {

using nlohmann::json;

double require_number(const json& obj, const char* key, std::optional<double> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw DataError(std::string("synth spec: missing field ") + key);
    }
    if (!obj[key].is_number()) throw DataError(std::string("synth spec: field ") + key + " must be a number");
    return obj[key].get<double>();
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
    if (root.is_discarded() || !root.is_object())
        throw DataError("synth spec: not a JSON object");

    SynthSpec spec;
    spec.channels = static_cast<Eigen::Index>(require_number(root, "channels"));
    spec.frame_rate = require_number(root, "frame_rate", 10.0);
    spec.min_frames = static_cast<Eigen::Index>(require_number(root, "min_frames", 120.0));
    spec.max_frames = static_cast<Eigen::Index>(require_number(root, "max_frames", 300.0));
    spec.channel_lag = require_number(root, "channel_lag", 0.4);

    if (!root.contains("classes") || !root["classes"].is_array())
        throw DataError("synth spec: missing classes array");
    for (const auto& jc : root["classes"]) {
        if (!jc.is_object()) throw DataError("synth spec: class entries must be objects");
        SynthClass cls;
        if (!jc.contains("label") || !jc["label"].is_string())
            throw DataError("synth spec: every class needs a string label");
        cls.label = jc["label"].get<std::string>();
        cls.clips = static_cast<std::size_t>(require_number(jc, "clips"));
        cls.noise = require_number(jc, "noise", 0.0);
        if (jc.contains("mix_of")) {
            const auto& mix = jc["mix_of"];
            if (!mix.is_array() || mix.size() != 2 || !mix[0].is_string() || !mix[1].is_string())
                throw DataError("synth spec: mix_of must be [base_a, base_b] in class " + cls.label);
            cls.mix_of = std::make_pair(mix[0].get<std::string>(), mix[1].get<std::string>());
            cls.mixing = require_number(jc, "mixing");
        } else {
            if (!jc.contains("components") || !jc["components"].is_array() || jc["components"].empty())
                throw DataError("synth spec: class " + cls.label + " needs a nonempty components array");
            for (const auto& comp : jc["components"]) {
                SynthComponent c;
                c.freq = require_number(comp, "freq");
                c.amp = require_number(comp, "amp", 1.0);
                c.phase = require_number(comp, "phase", 0.0);
                cls.components.push_back(c);
            }
        }
        spec.classes.push_back(std::move(cls));
    }

    validate_synth_spec(spec);
    return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    return parse_synth_spec(detail::read_file(path));
}

namespace {

/// Mixture classes resolved to concrete parameters. Pure classes pass
/// through; a mixture at coefficient m interpolates each component of its
/// two base classes and the noise level, with exact endpoints.
struct ResolvedClass {
    std::string label;
    std::size_t clips;
    double noise;
    std::vector<SynthComponent> components;
};

double lerp_exact(double a, double b, double m) {
    if (m == 0.0) return a;
    if (m == 1.0) return b;
    return (1.0 - m) * a + m * b;
}

ResolvedClass resolve_class(const SynthSpec& spec, std::size_t index) {
    const SynthClass& cls = spec.classes[index];
    ResolvedClass out;
    out.label = cls.label;
    out.clips = cls.clips;
    if (!cls.mix_of) {
        out.noise = cls.noise;
        out.components = cls.components;
        return out;
    }
    const auto find = [&](const std::string& name) -> const SynthClass& {
        for (const auto& c : spec.classes)
            if (c.label == name) return c;
        throw DataError("synth spec: mixture " + cls.label + " references unknown class " + name);
    };
    const SynthClass& a = find(cls.mix_of->first);
    const SynthClass& b = find(cls.mix_of->second);
    const double m = cls.mixing;
    out.noise = lerp_exact(a.noise, b.noise, m);
    for (std::size_t i = 0; i < a.components.size(); ++i) {
        SynthComponent c;
        c.freq = lerp_exact(a.components[i].freq, b.components[i].freq, m);
        c.amp = lerp_exact(a.components[i].amp, b.components[i].amp, m);
        c.phase = lerp_exact(a.components[i].phase, b.components[i].phase, m);
        out.components.push_back(c);
    }
    return out;
}

void hash_double(std::uint64_t& h, double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    h = detail::fnv1a64(&bits, sizeof bits, h);
}

}  // namespace

void validate_synth_spec(const SynthSpec& spec) {
    if (spec.channels < 1) throw DataError("synth spec: channels must be at least 1");
    if (spec.classes.empty()) throw DataError("synth spec: classes must be nonempty");
    if (!(spec.frame_rate > 0.0)) throw DataError("synth spec: frame_rate must be positive");
    if (spec.min_frames < 1 || spec.max_frames < spec.min_frames)
        throw DataError("synth spec: need 1 <= min_frames <= max_frames");
    if (!std::isfinite(spec.channel_lag)) throw DataError("synth spec: channel_lag must be finite");

    std::set<std::string> labels;
    for (const auto& cls : spec.classes)
        if (!labels.insert(cls.label).second)
            throw DataError("synth spec: duplicate class label " + cls.label);

    for (const auto& cls : spec.classes) {
        if (cls.label.empty()) throw DataError("synth spec: empty class label");
        if (cls.clips < 1) throw DataError("synth spec: class " + cls.label + " needs at least one clip");
        if (!(cls.noise >= 0.0)) throw DataError("synth spec: negative noise in class " + cls.label);
        if (cls.mix_of) {
            if (!(cls.mixing >= 0.0 && cls.mixing <= 1.0))
                throw DataError("synth spec: mixing must lie in [0, 1] in class " + cls.label);
            // Dangling names first, purity second — a typo in one base
            // should be reported as a typo even if the other is bad too.
            for (const auto& name : {cls.mix_of->first, cls.mix_of->second})
                if (std::none_of(spec.classes.begin(), spec.classes.end(),
                                 [&](const SynthClass& c) { return c.label == name; }))
                    throw DataError("synth spec: mixture " + cls.label + " references unknown class " + name);
            for (const auto& name : {cls.mix_of->first, cls.mix_of->second}) {
                const auto it = std::find_if(spec.classes.begin(), spec.classes.end(),
                                             [&](const SynthClass& c) { return c.label == name; });
                if (it->mix_of)
                    throw DataError("synth spec: mixture " + cls.label + " may only reference pure classes");
            }
            const auto& a = std::find_if(spec.classes.begin(), spec.classes.end(),
                                         [&](const SynthClass& c) { return c.label == cls.mix_of->first; })
                                ->components;
            const auto& b = std::find_if(spec.classes.begin(), spec.classes.end(),
                                         [&](const SynthClass& c) { return c.label == cls.mix_of->second; })
                                ->components;
            if (a.size() != b.size())
                throw DataError("synth spec: mixture " + cls.label +
                                " needs base classes with matching component counts");
        } else {
            if (cls.components.empty())
                throw DataError("synth spec: class " + cls.label + " needs a nonempty components array");
            for (const auto& comp : cls.components)
                if (!std::isfinite(comp.freq) || !std::isfinite(comp.amp) || !std::isfinite(comp.phase))
                    throw DataError("synth spec: non-finite component in class " + cls.label);
        }
    }
}

std::uint64_t class_stream_key(const SynthSpec& spec, std::size_t class_index) {
    if (class_index >= spec.classes.size()) throw DataError("class index out of range");
    const ResolvedClass resolved = resolve_class(spec, class_index);
    std::uint64_t h = 14695981039346656037ull;
    hash_double(h, static_cast<double>(spec.channels));
    hash_double(h, spec.frame_rate);
    hash_double(h, static_cast<double>(spec.min_frames));
    hash_double(h, static_cast<double>(spec.max_frames));
    hash_double(h, spec.channel_lag);
    hash_double(h, resolved.noise);
    hash_double(h, static_cast<double>(resolved.components.size()));
    for (const auto& c : resolved.components) {
        hash_double(h, c.freq);
        hash_double(h, c.amp);
        hash_double(h, c.phase);
    }
    return h;
}

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    validate_synth_spec(spec);

    Dataset ds;
    for (Eigen::Index c = 0; c < spec.channels; ++c) ds.channel_names.push_back("ch" + std::to_string(c));

    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
        const ResolvedClass cls = resolve_class(spec, ci);
        const std::uint64_t stream_key = class_stream_key(spec, ci);

        for (std::size_t clip = 0; clip < cls.clips; ++clip) {
            // Frozen draw order per clip: length, one phase per component,
            // then (only for noise > 0) per-frame-per-channel noise.
            Rng rng(stream_seed(seed, stream_key, clip));
            const auto t_frames = static_cast<Eigen::Index>(
                static_cast<std::uint64_t>(spec.min_frames) +
                bounded_uint(rng, static_cast<std::uint64_t>(spec.max_frames - spec.min_frames) + 1));

            std::vector<double> clip_phase(cls.components.size());
            for (auto& phase : clip_phase) phase = 2.0 * std::numbers::pi * unit_real(rng);

            Sample sample;
            sample.label = cls.label;
            sample.frame_rate = spec.frame_rate;
            char idbuf[16];
            std::snprintf(idbuf, sizeof idbuf, "%04zu", clip);
            sample.clip_id = cls.label + "_" + idbuf;
            sample.frames.resize(t_frames, spec.channels);

            for (Eigen::Index t = 0; t < t_frames; ++t) {
                const double time = static_cast<double>(t) / spec.frame_rate;
                for (Eigen::Index k = 0; k < spec.channels; ++k) {
                    double v = 0.0;
                    for (std::size_t comp = 0; comp < cls.components.size(); ++comp) {
                        const auto& c = cls.components[comp];
                        v += c.amp * std::sin(2.0 * std::numbers::pi * c.freq * time + c.phase +
                                              clip_phase[comp] + spec.channel_lag * static_cast<double>(k));
                    }
                    if (cls.noise > 0.0) v += cls.noise * gaussian(rng);
                    sample.frames(t, k) = v;
                }
            }
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

}  // namespace esn
