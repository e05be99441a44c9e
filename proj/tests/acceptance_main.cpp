// Acceptance gate for the whole project: every release-blocking property
// gets one pass/fail line. Exit code is the number of failed criteria, so
// the test harness treats any red line as a failure of this binary.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esn/classifier.hpp"
#include "esn/conceptor.hpp"
#include "esn/dataio.hpp"
#include "esn/errors.hpp"
#include "esn/evaluation.hpp"
#include "esn/reservoir.hpp"
#include "esn/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#ifndef CONCEPTOR_BIN
#error "CONCEPTOR_BIN must point at the conceptor executable"
#endif

namespace {

namespace fs = std::filesystem;

int failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << index << "  " << name;
    if (!ok && !detail.empty()) std::cout << " -- " << detail;
    std::cout << "\n";
    if (!ok) ++failures;
}

template <typename Fn>
void criterion(int index, const std::string& name, Fn&& fn) {
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = e.what();
    }
    report(index, name, ok, detail);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------
// 1. Held-out classification on an imbalanced two-class set shaped like a
//    realistic engagement-rating corpus: 62+115 training clips, 177 test
//    clips, 9 channels, 120-300 frames. Both per-class recalls must beat
//    chance, a well-separated spec must reach 90% per class, and the whole
//    train+classify cycle must stay under a minute.
bool held_out_classification(std::string& detail) {
    const auto started = std::chrono::steady_clock::now();

    const esn::SynthSpec spec = fixtures::two_class_spec(124, 230, 0.05);
    const esn::Dataset all = esn::synth_generate(spec, 9);
    const auto [train_set, test_set] = esn::split(all, {{"high", 62}, {"low", 115}}, 9);
    if (test_set.samples.size() != 177) {
        detail = "expected 177 held-out clips, got " + std::to_string(test_set.samples.size());
        return false;
    }

    esn::TrainingConfig config;  // stock settings: N=100, rho=0.9, washout 10
    config.reservoir.n_inputs = all.n_channels();
    config.reservoir.seed = 42;
    const esn::ClassifierModel model = esn::train(train_set, config);

    std::map<std::string, std::pair<int, int>> per_class;  // label -> (correct, total)
    for (const auto& sample : test_set.samples) {
        const std::string predicted = esn::classify(model, sample).first;
        auto& [correct, total] = per_class[*sample.label];
        ++total;
        if (predicted == *sample.label) ++correct;
    }

    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              started);
    bool ok = elapsed.count() < 60000;
    std::string recalls;
    for (const auto& [label, tally] : per_class) {
        const double recall = double(tally.first) / double(tally.second);
        recalls += label + "=" + fmt(recall) + " ";
        if (recall <= 0.5 || recall < 0.9) ok = false;
    }
    detail = "per-class recall " + recalls + "in " + std::to_string(elapsed.count()) + " ms";
    if (ok) detail.clear();
    return ok;
}

// ---------------------------------------------------------------------
// 2. Conceptor spectra: learned C shares R's eigenvectors with eigenvalues
//    s/(s + aperture^-2), verified against a full eigendecomposition on 20
//    seeded PSD matrices, and the spectrum grows monotonically in aperture.
bool conceptor_spectrum(std::string& detail) {
    const std::vector<double> apertures = {0.1, 1.0, 10.0, 100.0};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 3 + (trial * 7) % 18;  // up to 20
        esn::Rng rng(esn::stream_seed(0xacce97ull, trial));
        Eigen::MatrixXd x(n, 2 * n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < 2 * n; ++j) x(i, j) = esn::gaussian(rng);
        esn::CorrelationMatrix r;
        r.matrix = (x * x.transpose()) / double(2 * n);
        r.n_state_vectors = 2 * n;

        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_r(r.matrix);
        std::vector<Eigen::VectorXd> spectra;
        for (double aperture : apertures) {
            const esn::Conceptor c = esn::compute_conceptor(r, aperture, "t");
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_c(c.matrix);
            Eigen::VectorXd expected(n);
            const double ridge = 1.0 / (aperture * aperture);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = std::max(es_r.eigenvalues()(i), 0.0);
                expected(i) = s / (s + ridge);
            }
            std::sort(expected.data(), expected.data() + n);
            Eigen::VectorXd got = es_c.eigenvalues();  // already ascending
            worst = std::max(worst, (got - expected).cwiseAbs().maxCoeff());
            spectra.push_back(std::move(got));
        }
        for (std::size_t a = 1; a < spectra.size(); ++a)
            for (Eigen::Index i = 0; i < n; ++i)
                if (spectra[a](i) < spectra[a - 1](i) - 1e-12) {
                    detail = "eigenvalue shrank when the aperture grew (trial " +
                             std::to_string(trial) + ")";
                    return false;
                }
    }
    if (worst >= 1e-9) {
        detail = "worst eigenvalue error " + fmt(worst);
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 3. The vectorized state update matches an independent scalar-loop
//    reimplementation to 1e-12 on ten seeded reservoir/sample pairs.
bool drive_matches_scalar_loops(std::string& detail) {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        esn::ReservoirParams params;
        params.n_neurons = 20 + trial * 3;
        params.n_inputs = 2 + trial % 4;
        params.seed = esn::stream_seed(0xd21fe5ull, trial);
        const esn::Reservoir res = esn::build_reservoir(params);

        esn::Rng rng(esn::stream_seed(0xd21fe5ull, trial, 1));
        esn::Sample sample;
        sample.clip_id = "t" + std::to_string(trial);
        sample.frames.resize(30 + trial, params.n_inputs);
        for (Eigen::Index t = 0; t < sample.frames.rows(); ++t)
            for (Eigen::Index c = 0; c < sample.frames.cols(); ++c)
                sample.frames(t, c) = esn::symmetric_real(rng);

        const Eigen::Index washout = 5;
        const esn::StateTrajectory traj = res.drive(sample, washout);
        const auto expected = oracle::drive_scalar(res.recurrent(), res.input_weights(),
                                                   res.bias(), sample.frames, washout);
        if (traj.length() != Eigen::Index(expected.size())) {
            detail = "trajectory length mismatch on trial " + std::to_string(trial);
            return false;
        }
        for (Eigen::Index t = 0; t < traj.length(); ++t)
            for (Eigen::Index i = 0; i < traj.dim(); ++i)
                worst = std::max(worst, std::abs(traj.states(i, t) -
                                                 expected[std::size_t(t)][std::size_t(i)]));
    }
    if (worst >= 1e-12) {
        detail = "worst state error " + fmt(worst);
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 4. Positive evidence agrees with a triple-loop quadratic-form oracle to
//    1e-10, and never goes negative across 1,000 fuzzed inputs.
bool evidence_oracle(std::string& detail) {
    // One fixed reservoir/model shell; conceptors vary per trial.
    esn::ReservoirParams params;
    params.n_neurons = 16;
    params.n_inputs = 2;
    params.seed = 77;

    esn::NormalizationStats stats;
    stats.mean = Eigen::VectorXd::Zero(2);
    stats.stddev = Eigen::VectorXd::Ones(2);
    stats.constant = {0, 0};

    esn::TrainingConfig config;
    config.reservoir = params;
    config.washout = 0;

    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        esn::Rng rng(esn::stream_seed(0xe71dceull, trial));
        Eigen::MatrixXd x(16, 40);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = esn::gaussian(rng);
        esn::CorrelationMatrix r;
        r.matrix = (x * x.transpose()) / 40.0;
        r.n_state_vectors = 40;
        const esn::Conceptor c = esn::compute_conceptor(r, 5.0, "only");

        const esn::ClassifierModel model{esn::build_reservoir(params), {c}, stats,
                                         {"ch0", "ch1"},               config};

        for (int rep = 0; rep < 20; ++rep) {  // 50 * 20 = 1000 fuzzed inputs
            esn::StateTrajectory traj;
            traj.states.resize(16, 8 + (rep % 11));
            for (Eigen::Index i = 0; i < traj.states.rows(); ++i)
                for (Eigen::Index j = 0; j < traj.states.cols(); ++j)
                    traj.states(i, j) = esn::symmetric_real(rng);

            const esn::EvidenceVector ev = esn::positive_evidence(model, traj);
            ++checked;
            if (ev.values[0] < 0.0) {
                detail = "negative evidence " + fmt(ev.values[0]);
                return false;
            }
            worst = std::max(worst,
                             std::abs(ev.values[0] - oracle::evidence_scalar(c.matrix, traj.states)));
        }
    }
    if (checked != 1000) {
        detail = "expected 1000 fuzzed inputs, ran " + std::to_string(checked);
        return false;
    }
    if (worst >= 1e-10) {
        detail = "worst evidence error " + fmt(worst);
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 5. Fading memory: with spectral radius 0.9, two state sequences started
//    from different initial conditions but fed identical inputs agree to
//    1e-6 after 200 steps.
bool fading_memory(std::string& detail) {
    esn::ReservoirParams params;
    params.n_neurons = 100;
    params.n_inputs = 4;
    params.spectral_radius = 0.9;
    params.seed = 11;
    const esn::Reservoir res = esn::build_reservoir(params);

    esn::Rng rng(esn::stream_seed(0xfade0ull, 0));
    Eigen::VectorXd xa = Eigen::VectorXd::Zero(100);
    Eigen::VectorXd xb(100);
    for (Eigen::Index i = 0; i < 100; ++i) xb(i) = esn::symmetric_real(rng);

    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd input(4);
        for (Eigen::Index c = 0; c < 4; ++c) input(c) = esn::symmetric_real(rng);
        xa = res.step(xa, input);
        xb = res.step(xb, input);
    }
    const double gap = (xa - xb).cwiseAbs().maxCoeff();
    if (gap >= 1e-6) {
        detail = "states still differ by " + fmt(gap) + " after 200 steps";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 6. Morphing: the midpoint conceptor M = 0.5*A + 0.5*B assigns higher
//    mean evidence to half-mixed clips than to pure class-A clips.
bool midpoint_evidence_ordering(std::string& detail) {
    const esn::SynthSpec spec = fixtures::mixture_spec(20, 0.5, 0.05);
    const esn::Dataset all = esn::synth_generate(spec, 33);

    esn::Dataset pure;
    pure.channel_names = all.channel_names;
    for (const auto& s : all.samples)
        if (*s.label == "high" || *s.label == "low") pure.samples.push_back(s);

    esn::TrainingConfig config;
    config.reservoir.n_neurons = 100;
    config.reservoir.n_inputs = all.n_channels();
    config.reservoir.seed = 33;
    const esn::ClassifierModel model = esn::train(pure, config);

    const esn::Conceptor midpoint = esn::linear_combine(
        {model.conceptor_for("high"), model.conceptor_for("low")}, {0.5, 0.5});
    const esn::ClassifierModel probe{model.reservoir,      {midpoint}, model.preprocessing,
                                     model.channel_names,  model.config};

    double mid_mean = 0, pure_a_mean = 0;
    int mid_n = 0, pure_a_n = 0;
    for (const auto& s : all.samples) {
        if (*s.label == "low") continue;
        const double under_m = esn::classify(probe, s).second.values[0];
        if (*s.label == "mid") {
            mid_mean += under_m;
            ++mid_n;
        } else {
            pure_a_mean += under_m;
            ++pure_a_n;
        }
    }
    mid_mean /= mid_n;
    pure_a_mean /= pure_a_n;
    if (!(mid_mean > pure_a_mean)) {
        detail = "mean evidence under the blend: mixed " + fmt(mid_mean) + " vs pure " +
                 fmt(pure_a_mean);
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 7. Krippendorff's alpha: a perfect-agreement table scores exactly 1.0,
//    and 20 seeded tables with 10-30% missing cells match a brute-force
//    pairwise disagreement oracle to 1e-10 at both measurement levels.
bool alpha_against_oracle(std::string& detail) {
    esn::RatingTable perfect;
    perfect.ratings = {{1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0}, {1.0, std::nullopt, 3.0, 4.0}};
    perfect.level = esn::AlphaLevel::interval;
    if (esn::krippendorff_alpha(perfect) != 1.0) {
        detail = "perfect agreement did not score exactly 1.0";
        return false;
    }

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        esn::Rng rng(esn::stream_seed(0xa1fa7ull, trial));
        const std::size_t raters = 3 + esn::bounded_uint(rng, 4);
        const std::size_t items = 12 + esn::bounded_uint(rng, 19);
        const double missing = 0.1 + 0.2 * esn::unit_real(rng);

        esn::RatingTable table;
        table.ratings.assign(raters, std::vector<std::optional<double>>(items));
        for (std::size_t i = 0; i < items; ++i) {
            bool any = false;
            while (!any)  // keep every item rated at least once
                for (std::size_t r = 0; r < raters; ++r) {
                    if (esn::unit_real(rng) < missing) {
                        table.ratings[r][i] = std::nullopt;
                    } else {
                        table.ratings[r][i] = double(1 + esn::bounded_uint(rng, 5));
                        any = true;
                    }
                }
        }
        for (esn::AlphaLevel level : {esn::AlphaLevel::interval, esn::AlphaLevel::ordinal}) {
            table.level = level;
            const auto [d_obs, d_exp] = oracle::alpha_disagreement_pairwise(table);
            const double expected = d_obs == 0.0 ? 1.0 : 1.0 - d_obs / d_exp;
            worst = std::max(worst, std::abs(esn::krippendorff_alpha(table) - expected));
        }
    }
    if (worst >= 1e-10) {
        detail = "worst oracle gap " + fmt(worst);
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// 8. Serialization: a saved-and-reloaded model reproduces labels and
//    evidence values bit for bit on 50 fresh clips.
bool serialization_round_trip(std::string& detail) {
    fixtures::TempDir td("acceptance-model");
    const esn::Dataset train_set = esn::synth_generate(fixtures::two_class_spec(10, 10), 3);

    esn::TrainingConfig config;
    config.reservoir.n_neurons = 50;
    config.reservoir.n_inputs = train_set.n_channels();
    config.reservoir.seed = 3;
    const esn::ClassifierModel model = esn::train(train_set, config);
    esn::save_model(model, td / "model.bin");
    const esn::ClassifierModel reloaded = esn::load_model(td / "model.bin");

    const esn::Dataset probes = esn::synth_generate(fixtures::two_class_spec(25, 25), 4);
    if (probes.samples.size() != 50) {
        detail = "expected 50 probe clips";
        return false;
    }
    for (const auto& s : probes.samples) {
        const auto [label_a, ev_a] = esn::classify(model, s);
        const auto [label_b, ev_b] = esn::classify(reloaded, s);
        if (label_a != label_b || ev_a.values != ev_b.values) {
            detail = "clip " + s.clip_id + " changed after reload";
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------
// 9. Command-line determinism: running synth -> train -> classify -> eval
//    twice with the same configuration leaves byte-identical predictions
//    and reports behind.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool run(const std::string& cmd) { return std::system(cmd.c_str()) == 0; }

bool cli_pipeline_determinism(std::string& detail) {
    fixtures::TempDir td("acceptance-cli");
    const std::string bin = CONCEPTOR_BIN;
    const std::string dir = td.path().string();

    std::ofstream(td / "spec.json") <<
        R"({"channels": 9, "min_frames": 120, "max_frames": 300, "classes": [
             {"label": "high", "clips": 12, "noise": 0.05,
              "components": [{"freq": 1.3, "amp": 1.0}, {"freq": 2.6, "amp": 0.5, "phase": 1.1}]},
             {"label": "low", "clips": 12, "noise": 0.05,
              "components": [{"freq": 0.4, "amp": 1.0, "phase": 0.3}, {"freq": 0.8, "amp": 0.5, "phase": 2.0}]}]})";

    const std::string quiet = " > /dev/null 2>&1";
    const auto pipeline = [&]() -> bool {
        return run(bin + " synth " + dir + "/spec.json --out " + dir + "/data --seed 17" + quiet) &&
               run(bin + " train " + dir + "/data/manifest.csv --out " + dir +
                   "/model.bin --report-dir " + dir + "/train-report --seed 17 --reservoir-size 60" +
                   quiet) &&
               run(bin + " classify " + dir + "/model.bin " + dir + "/data/manifest.csv --out " +
                   dir + "/predictions.csv" + quiet) &&
               run(bin + " eval " + dir + "/predictions.csv " + dir + "/data/manifest.csv --out " +
                   dir + "/report" + quiet);
    };

    if (!pipeline()) {
        detail = "first pipeline run failed";
        return false;
    }
    const std::string pred1 = slurp(td / "predictions.csv");
    const std::string report1 = slurp(fs::path(td / "report") / "report.csv");
    const std::string svg1 = slurp(fs::path(td / "report") / "report.svg");
    if (pred1.empty() || report1.empty() || svg1.empty()) {
        detail = "pipeline left empty artifacts";
        return false;
    }

    if (!pipeline()) {
        detail = "second pipeline run failed";
        return false;
    }
    if (slurp(td / "predictions.csv") != pred1) {
        detail = "predictions changed between identical runs";
        return false;
    }
    if (slurp(fs::path(td / "report") / "report.csv") != report1 ||
        slurp(fs::path(td / "report") / "report.svg") != svg1) {
        detail = "reports changed between identical runs";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    std::cout << "acceptance checks\n";
    criterion(1, "held-out two-class classification (62+115 train, 177 test) beats 90% per class under 60s",
              held_out_classification);
    criterion(2, "conceptor eigenvalues match s/(s+aperture^-2) and grow with aperture",
              conceptor_spectrum);
    criterion(3, "reservoir drive matches an independent scalar-loop reimplementation",
              drive_matches_scalar_loops);
    criterion(4, "positive evidence matches the quadratic-form oracle and stays nonnegative",
              evidence_oracle);
    criterion(5, "fading memory erases initial-state differences by 200 steps", fading_memory);
    criterion(6, "midpoint conceptor favors half-mixed clips over pure ones",
              midpoint_evidence_ordering);
    criterion(7, "Krippendorff's alpha: exact on perfect tables, oracle-tight with missing data",
              alpha_against_oracle);
    criterion(8, "model save/load reproduces classification bit for bit", serialization_round_trip);
    criterion(9, "CLI synth->train->classify->eval reruns byte-identically",
              cli_pipeline_determinism);

    if (failures == 0) std::cout << "all criteria passed\n";
    return failures;
}
