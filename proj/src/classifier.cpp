#include "esn/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "esn/errors.hpp"

namespace esn {

void TrainingConfig::validate() const {
    reservoir.validate();
    if (washout < 0) throw DataError("washout must be nonnegative");
    if (!(aperture > 0.0) || !std::isfinite(aperture))
        throw DataError("aperture must be a positive real, got " + std::to_string(aperture));
}

double EvidenceVector::value_for(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return values[i];
    throw DataError("no evidence entry for label " + label);
}

std::vector<std::string> ClassifierModel::labels() const {
    std::vector<std::string> out;
    out.reserve(conceptors.size());
    for (const auto& c : conceptors) out.push_back(c.label);
    return out;
}

const Conceptor& ClassifierModel::conceptor_for(const std::string& label) const {
    for (const auto& c : conceptors)
        if (c.label == label) return c;
    throw DataError("model has no conceptor for label " + label);
}

ClassifierModel train(const Dataset& train_set, const TrainingConfig& config) {
    config.validate();
    if (train_set.samples.empty()) throw DataError("training set is empty");

    std::set<std::string> distinct;
    for (const auto& s : train_set.samples) {
        if (!s.label) throw DataError("training clip " + s.clip_id + " has no label");
        distinct.insert(*s.label);
    }
    if (distinct.size() < 2)
        throw DataError("training needs at least two distinct labels, got " +
                        std::to_string(distinct.size()));

    // Clips that cannot outlast the washout carry no states; a class is only
    // viable if at least one of its clips does.
    std::vector<std::size_t> usable;
    std::map<std::string, std::size_t> usable_per_label;
    for (std::size_t i = 0; i < train_set.samples.size(); ++i) {
        if (train_set.samples[i].n_frames() > config.washout) {
            usable.push_back(i);
            usable_per_label[*train_set.samples[i].label]++;
        }
    }
    for (const auto& label : distinct)
        if (usable_per_label[label] == 0)
            throw DataError("class " + label + " has no clip longer than the washout of " +
                            std::to_string(config.washout));

    auto [normed, stats] = normalize(train_set);

    TrainingConfig materialized = config;
    materialized.reservoir.n_inputs = train_set.n_channels();
    const Reservoir reservoir = build_reservoir(materialized.reservoir);

    // Drive clips in parallel; trajectories land in slot order, so pooling
    // below is independent of scheduling.
    std::vector<StateTrajectory> trajectories(usable.size());
    {
        std::atomic<std::size_t> cursor{0};
        std::atomic<bool> failed{false};
        std::string failure;
        std::mutex failure_mutex;
        const unsigned n_workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                                         static_cast<unsigned>(usable.size())));
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                while (!failed.load(std::memory_order_relaxed)) {
                    const std::size_t slot = cursor.fetch_add(1);
                    if (slot >= usable.size()) return;
                    const Sample& sample = normed.samples[usable[slot]];
                    try {
                        trajectories[slot] = reservoir.drive(sample, config.washout);
                        if (!trajectories[slot].states.allFinite())
                            throw NumericError("clip " + sample.clip_id +
                                               " produced non-finite reservoir states");
                    } catch (...) {
                        const std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failed.exchange(true)) {
                            try {
                                throw;
                            } catch (const std::exception& e) {
                                failure = e.what();
                            }
                        }
                        return;
                    }
                }
            });
        for (auto& t : workers) t.join();
        if (failed.load()) throw NumericError(failure);
    }

    std::vector<Conceptor> conceptors;
    for (const auto& label : distinct) {  // std::set iterates sorted
        std::vector<StateTrajectory> class_trajectories;
        for (std::size_t slot = 0; slot < usable.size(); ++slot)
            if (*normed.samples[usable[slot]].label == label)
                class_trajectories.push_back(trajectories[slot]);
        conceptors.push_back(
            compute_conceptor(correlation_matrix(class_trajectories), config.aperture, label));
    }

    return ClassifierModel{reservoir, std::move(conceptors), std::move(stats),
                           train_set.channel_names, materialized};
}

EvidenceVector positive_evidence(const ClassifierModel& model, const StateTrajectory& trajectory) {
    if (model.conceptors.empty()) throw DataError("model has no conceptors");
    if (trajectory.length() < 1) throw DataError("trajectory is empty");
    const Eigen::Index n = model.reservoir.params().n_neurons;
    if (trajectory.dim() != n)
        throw DataError("trajectory dimension " + std::to_string(trajectory.dim()) +
                        " does not match reservoir size " + std::to_string(n));

    EvidenceVector ev;
    const double steps = static_cast<double>(trajectory.length());
    for (const auto& c : model.conceptors) {
        // Sum_t z_t^T C z_t == <C X, X> with columns as states.
        const double total = (c.matrix * trajectory.states).cwiseProduct(trajectory.states).sum();
        ev.labels.push_back(c.label);
        ev.values.push_back(total / steps);
    }
    return ev;
}

std::pair<std::string, EvidenceVector> classify(const ClassifierModel& model, const Sample& sample) {
    if (sample.n_channels() != static_cast<Eigen::Index>(model.channel_names.size()))
        throw DataError("clip " + sample.clip_id + " has " + std::to_string(sample.n_channels()) +
                        " channels, model expects " + std::to_string(model.channel_names.size()));
    if (sample.n_frames() <= model.config.washout)
        throw DataError("clip " + sample.clip_id + " has " + std::to_string(sample.n_frames()) +
                        " frames, need more than the washout of " + std::to_string(model.config.washout));

    // Frozen training statistics; test data never feeds back into them.
    Sample prepared = sample;
    prepared.frames.rowwise() -= model.preprocessing.mean.transpose();
    for (Eigen::Index c = 0; c < prepared.frames.cols(); ++c)
        if (!model.preprocessing.constant[static_cast<std::size_t>(c)])
            prepared.frames.col(c) /= model.preprocessing.stddev(c);

    const StateTrajectory trajectory = model.reservoir.drive(prepared, model.config.washout);
    EvidenceVector ev = positive_evidence(model, trajectory);

    std::size_t best = 0;
    for (std::size_t i = 1; i < ev.values.size(); ++i) {
        if (ev.values[i] > ev.values[best] ||
            (ev.values[i] == ev.values[best] && ev.labels[i] < ev.labels[best]))
            best = i;
    }
    return {ev.labels[best], std::move(ev)};
}

}  // namespace esn
