#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "esn/classifier.hpp"
#include "esn/errors.hpp"
#include "internal.hpp"

// Model file layout, version 1:
//   bytes 0..7    magic "CESNMODL"
//   bytes 8..11   format_version, u32 little-endian
//   bytes 12..15  reserved (zero)
//   bytes 16..23  header length in bytes, u64 little-endian
//   ...           JSON header (config, labels, channel names, flags)
//   ...           payload: raw little-endian f64 in header-declared order —
//                 W (column-major), W_in, bias, mean, stddev, then one
//                 conceptor matrix per label
//   last 8 bytes  FNV-1a 64 checksum of everything before it, u64 LE

namespace esn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'E', 'S', 'N', 'M', 'O', 'D', 'L'};

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
    return v;
}

std::uint64_t read_u64(const std::string& bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
    return v;
}

// Doubles are stored as their IEEE-754 bit patterns in little-endian order,
// which round-trips exactly.
void append_doubles(std::string& out, const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, data + i, sizeof bits);
        append_u64(out, bits);
    }
}

void read_doubles(const std::string& bytes, std::size_t& offset, double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t bits = read_u64(bytes, offset);
        std::memcpy(data + i, &bits, sizeof bits);
        offset += 8;
    }
}

json config_to_json(const TrainingConfig& config) {
    return json{{"washout", config.washout},
                {"aperture", config.aperture},
                {"reservoir",
                 {{"n_neurons", config.reservoir.n_neurons},
                  {"n_inputs", config.reservoir.n_inputs},
                  {"spectral_radius", config.reservoir.spectral_radius},
                  {"input_scale", config.reservoir.input_scale},
                  {"bias_scale", config.reservoir.bias_scale},
                  {"connectivity", config.reservoir.connectivity},
                  {"seed", config.reservoir.seed}}}};
}

TrainingConfig config_from_json(const json& j) {
    TrainingConfig config;
    config.washout = j.at("washout").get<Eigen::Index>();
    config.aperture = j.at("aperture").get<double>();
    const json& r = j.at("reservoir");
    config.reservoir.n_neurons = r.at("n_neurons").get<Eigen::Index>();
    config.reservoir.n_inputs = r.at("n_inputs").get<Eigen::Index>();
    config.reservoir.spectral_radius = r.at("spectral_radius").get<double>();
    config.reservoir.input_scale = r.at("input_scale").get<double>();
    config.reservoir.bias_scale = r.at("bias_scale").get<double>();
    config.reservoir.connectivity = r.at("connectivity").get<double>();
    config.reservoir.seed = r.at("seed").get<std::uint64_t>();
    return config;
}

}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& destination) {
    if (model.conceptors.empty()) throw DataError("refusing to save a model with no conceptors");
    const Eigen::Index n = model.reservoir.params().n_neurons;
    const Eigen::Index k = model.reservoir.params().n_inputs;

    json header;
    header["format_version"] = ClassifierModel::format_version;
    header["config"] = config_to_json(model.config);
    header["channel_names"] = model.channel_names;
    header["constant_channels"] = model.preprocessing.constant;
    header["conceptors"] = json::array();
    for (const auto& c : model.conceptors) {
        json jc;
        jc["label"] = c.label;
        if (c.aperture)
            jc["aperture"] = *c.aperture;
        else
            jc["aperture"] = nullptr;
        header["conceptors"].push_back(jc);
    }
    const std::string header_text = header.dump();

    std::string out;
    out.reserve(64 + header_text.size() +
                static_cast<std::size_t>((n * n + n * k + 3 * n) * 8) +
                model.conceptors.size() * static_cast<std::size_t>(n * n * 8) + n * 8);
    out.append(kMagic, sizeof kMagic);
    append_u32(out, ClassifierModel::format_version);
    append_u32(out, 0);  // reserved
    append_u64(out, header_text.size());
    out += header_text;

    append_doubles(out, model.reservoir.recurrent().data(), static_cast<std::size_t>(n * n));
    append_doubles(out, model.reservoir.input_weights().data(), static_cast<std::size_t>(n * k));
    append_doubles(out, model.reservoir.bias().data(), static_cast<std::size_t>(n));
    append_doubles(out, model.preprocessing.mean.data(),
                   static_cast<std::size_t>(model.preprocessing.mean.size()));
    append_doubles(out, model.preprocessing.stddev.data(),
                   static_cast<std::size_t>(model.preprocessing.stddev.size()));
    for (const auto& c : model.conceptors) {
        if (c.dim() != n) throw DataError("conceptor " + c.label + " does not match the reservoir size");
        append_doubles(out, c.matrix.data(), static_cast<std::size_t>(n * n));
    }

    append_u64(out, detail::fnv1a64(out.data(), out.size()));
    detail::write_file_atomic(destination, out);
}

ClassifierModel load_model(const std::filesystem::path& source) {
    const std::string bytes = detail::read_file(source);
    if (bytes.size() < 32) throw ModelCorruptError(source.string() + ": file too small to be a model");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw ModelCorruptError(source.string() + ": not a model file (bad magic)");

    // Version gate before integrity: future layouts may move the checksum.
    const std::uint32_t version = read_u32(bytes, 8);
    if (version != ClassifierModel::format_version)
        throw ModelVersionError(source.string() + ": format version " + std::to_string(version) +
                                " is not supported (expected " +
                                std::to_string(ClassifierModel::format_version) + ")");

    const std::uint64_t stored_sum = read_u64(bytes, bytes.size() - 8);
    if (detail::fnv1a64(bytes.data(), bytes.size() - 8) != stored_sum)
        throw ModelCorruptError(source.string() + ": checksum mismatch");

    const std::uint64_t header_len = read_u64(bytes, 16);
    if (24 + header_len + 8 > bytes.size())
        throw ModelCorruptError(source.string() + ": truncated header");

    json header = json::parse(bytes.substr(24, header_len), nullptr, /*allow_exceptions=*/false);
    if (header.is_discarded()) throw ModelCorruptError(source.string() + ": unreadable header");

    TrainingConfig config;
    std::vector<std::string> channel_names;
    std::vector<std::uint8_t> constant;
    std::vector<std::pair<std::string, std::optional<double>>> conceptor_meta;
    try {
        config = config_from_json(header.at("config"));
        channel_names = header.at("channel_names").get<std::vector<std::string>>();
        constant = header.at("constant_channels").get<std::vector<std::uint8_t>>();
        for (const auto& jc : header.at("conceptors")) {
            std::optional<double> aperture;
            if (!jc.at("aperture").is_null()) aperture = jc.at("aperture").get<double>();
            conceptor_meta.emplace_back(jc.at("label").get<std::string>(), aperture);
        }
    } catch (const json::exception& e) {
        throw ModelCorruptError(source.string() + ": malformed header: " + e.what());
    }

    const Eigen::Index n = config.reservoir.n_neurons;
    const Eigen::Index k = config.reservoir.n_inputs;
    if (n < 1 || k < 1 || conceptor_meta.empty())
        throw ModelCorruptError(source.string() + ": header declares an empty model");
    if (static_cast<Eigen::Index>(channel_names.size()) != k ||
        constant.size() != channel_names.size())
        throw ModelCorruptError(source.string() + ": header channel metadata is inconsistent");

    const std::size_t payload_doubles =
        static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * (1 + conceptor_meta.size()) +
        static_cast<std::size_t>(n) * static_cast<std::size_t>(k) + static_cast<std::size_t>(n) +
        2 * static_cast<std::size_t>(k);
    if (bytes.size() != 24 + header_len + payload_doubles * 8 + 8)
        throw ModelCorruptError(source.string() + ": payload size disagrees with the header");

    std::size_t offset = 24 + header_len;
    Eigen::MatrixXd w(n, n), w_in(n, k);
    Eigen::VectorXd b(n);
    NormalizationStats stats;
    stats.mean.resize(k);
    stats.stddev.resize(k);
    stats.constant = std::move(constant);

    read_doubles(bytes, offset, w.data(), static_cast<std::size_t>(n * n));
    read_doubles(bytes, offset, w_in.data(), static_cast<std::size_t>(n * k));
    read_doubles(bytes, offset, b.data(), static_cast<std::size_t>(n));
    read_doubles(bytes, offset, stats.mean.data(), static_cast<std::size_t>(k));
    read_doubles(bytes, offset, stats.stddev.data(), static_cast<std::size_t>(k));

    std::vector<Conceptor> conceptors;
    for (auto& [label, aperture] : conceptor_meta) {
        Conceptor c;
        c.matrix.resize(n, n);
        read_doubles(bytes, offset, c.matrix.data(), static_cast<std::size_t>(n * n));
        c.label = std::move(label);
        c.aperture = aperture;
        conceptors.push_back(std::move(c));
    }

    Reservoir reservoir =
        reservoir_from_parts(std::move(w), std::move(w_in), std::move(b), config.reservoir);
    return ClassifierModel{std::move(reservoir), std::move(conceptors), std::move(stats),
                           std::move(channel_names), config};
}

}  // namespace esn
