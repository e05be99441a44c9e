#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "esn/dataio.hpp"

namespace esn {

struct ReservoirParams {
    Eigen::Index n_neurons = 100;
    Eigen::Index n_inputs = 1;
    double spectral_radius = 0.9;
    double input_scale = 1.0;
    double bias_scale = 0.2;
    double connectivity = 0.1;  // fraction of nonzero recurrent weights
    std::uint64_t seed = 0;

    /// Throws DataError on out-of-range fields.
    void validate() const;

    bool operator==(const ReservoirParams&) const = default;
};

/// Reservoir states harvested from one clip after washout. Column t holds
/// x(washout + 1 + t); every entry lies strictly inside (-1, 1).
struct StateTrajectory {
    Eigen::MatrixXd states;  // N x (T - washout)
    Eigen::Index washout_dropped = 0;
    std::optional<std::string> source_label;

    Eigen::Index length() const { return states.cols(); }
    Eigen::Index dim() const { return states.rows(); }
};

/// Fixed random echo state network. Immutable once built; step and drive are
/// pure functions of their arguments and safe to call from many threads.
class Reservoir {
public:
    const Eigen::MatrixXd& recurrent() const { return w_; }
    const Eigen::MatrixXd& input_weights() const { return w_in_; }
    const Eigen::VectorXd& bias() const { return b_; }
    const ReservoirParams& params() const { return params_; }

    /// One update: tanh(W x + W_in p + b).
    Eigen::VectorXd step(const Eigen::VectorXd& state, const Eigen::VectorXd& input) const;

    /// Iterates step from x(0) = 0 over every frame of the sample and drops
    /// the first `washout` states.
    StateTrajectory drive(const Sample& sample, Eigen::Index washout) const;

private:
    friend Reservoir build_reservoir(const ReservoirParams&);
    friend Reservoir reservoir_from_parts(Eigen::MatrixXd w, Eigen::MatrixXd w_in,
                                          Eigen::VectorXd b, const ReservoirParams& params);
    Reservoir(Eigen::MatrixXd w, Eigen::MatrixXd w_in, Eigen::VectorXd b, ReservoirParams params);

    Eigen::MatrixXd w_;     // N x N, rescaled to the target spectral radius
    Eigen::MatrixXd w_in_;  // N x K
    Eigen::VectorXd b_;     // N
    ReservoirParams params_;
};

/// Draws sparse-uniform recurrent weights, rescales them to the requested
/// spectral radius, and draws dense input weights and bias. Identical
/// params yield bit-identical reservoirs.
Reservoir build_reservoir(const ReservoirParams& params);

/// Assembles a reservoir from explicit weight matrices — the hook for model
/// deserialization and for tests that pin the dynamics by hand. Checks only
/// shape consistency; the caller vouches for the weights themselves.
Reservoir reservoir_from_parts(Eigen::MatrixXd w, Eigen::MatrixXd w_in, Eigen::VectorXd b,
                               const ReservoirParams& params);

/// Largest eigenvalue modulus via block power iteration (subspace dimension
/// up to 4, QR re-orthonormalization each sweep). Converges to 1e-12
/// relative tolerance or throws NumericError after 10,000 sweeps.
double spectral_radius(const Eigen::MatrixXd& m);

}  // namespace esn
