#include "esn/reservoir.hpp"

#include <cmath>
#include <string>

#include "esn/errors.hpp"
#include "esn/rng.hpp"

namespace esn {

void ReservoirParams::validate() const {
    if (n_neurons < 1) throw DataError("reservoir needs at least one neuron");
    if (n_inputs < 1) throw DataError("reservoir needs at least one input channel");
    if (!(spectral_radius > 0.0) || !std::isfinite(spectral_radius))
        throw DataError("spectral radius must be positive, got " + std::to_string(spectral_radius));
    if (!(connectivity > 0.0) || connectivity > 1.0)
        throw DataError("connectivity must lie in (0, 1], got " + std::to_string(connectivity));
    if (!std::isfinite(input_scale) || input_scale < 0.0)
        throw DataError("input scale must be finite and nonnegative");
    if (!std::isfinite(bias_scale) || bias_scale < 0.0)
        throw DataError("bias scale must be finite and nonnegative");
}

double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DataError("spectral radius needs a square matrix");
    const Eigen::Index n = m.rows();
    const Eigen::Index p = std::min<Eigen::Index>(4, n);

    // Fixed-seed random start block: a deterministic pattern could sit
    // exactly orthogonal to the dominant eigenspace; a seeded draw cannot,
    // and stays reproducible.
    Rng rng(0x5eedb10cull);
    Eigen::MatrixXd q(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) q(i, j) = symmetric_real(rng);
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(n, p);

    constexpr double tol = 1e-12;
    constexpr int max_sweeps = 10000;
    double prev = -1.0;
    int stable = 0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const Eigen::MatrixXd z = m * q;
        // Subspace annihilated: every vector we can still reach is in the
        // kernel, so the dominant modulus is zero (nilpotent or zero matrix).
        if (z.norm() < 1e-290) return 0.0;

        // Ritz values of the section Q^T M Q; complex pairs come out of the
        // small nonsymmetric eigenproblem.
        const Eigen::MatrixXd h = q.transpose() * z;
        const double estimate =
            Eigen::EigenSolver<Eigen::MatrixXd>(h, false).eigenvalues().cwiseAbs().maxCoeff();

        if (prev >= 0.0 && std::abs(estimate - prev) <= tol * std::max(estimate, 1e-300)) {
            // Demand a few quiet sweeps in a row before trusting it.
            if (++stable >= 2) return estimate;
        } else {
            stable = 0;
        }
        prev = estimate;
        q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(n, p);
    }
    throw NumericError("spectral radius estimate did not settle within 10000 sweeps");
}

Reservoir::Reservoir(Eigen::MatrixXd w, Eigen::MatrixXd w_in, Eigen::VectorXd b, ReservoirParams params)
    : w_(std::move(w)), w_in_(std::move(w_in)), b_(std::move(b)), params_(params) {}

Reservoir build_reservoir(const ReservoirParams& params) {
    params.validate();
    const Eigen::Index n = params.n_neurons;
    const Eigen::Index k = params.n_inputs;
    Rng rng(params.seed);

    // Row-major draw order, mask before value, so the sequence of raw draws
    // is pinned down and reproducible across platforms.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (unit_real(rng) < params.connectivity) w(i, j) = symmetric_real(rng);

    if ((w.array() == 0.0).all())
        throw NumericError(
            "sparsity draw left the recurrent matrix empty; retry with a different seed or a "
            "higher connectivity");
    const double raw_radius = spectral_radius(w);
    if (raw_radius <= 0.0)
        throw NumericError(
            "raw recurrent matrix has zero spectral radius; retry with a different seed or a "
            "higher connectivity");
    w *= params.spectral_radius / raw_radius;

    Eigen::MatrixXd w_in(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) w_in(i, j) = params.input_scale * symmetric_real(rng);

    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) b(i) = params.bias_scale * symmetric_real(rng);

    return Reservoir(std::move(w), std::move(w_in), std::move(b), params);
}

Reservoir reservoir_from_parts(Eigen::MatrixXd w, Eigen::MatrixXd w_in, Eigen::VectorXd b,
                               const ReservoirParams& params) {
    if (w.rows() != w.cols()) throw DataError("recurrent matrix must be square");
    if (w.rows() != params.n_neurons || w_in.rows() != params.n_neurons ||
        b.size() != params.n_neurons || w_in.cols() != params.n_inputs)
        throw DataError("reservoir part shapes disagree with the declared parameters");
    return Reservoir(std::move(w), std::move(w_in), std::move(b), params);
}

Eigen::VectorXd Reservoir::step(const Eigen::VectorXd& state, const Eigen::VectorXd& input) const {
    if (state.size() != params_.n_neurons)
        throw DataError("state has " + std::to_string(state.size()) + " entries, reservoir has " +
                        std::to_string(params_.n_neurons) + " neurons");
    if (input.size() != params_.n_inputs)
        throw DataError("input has " + std::to_string(input.size()) + " channels, reservoir expects " +
                        std::to_string(params_.n_inputs));
    Eigen::VectorXd pre = w_ * state + w_in_ * input + b_;
    return pre.unaryExpr([](double v) { return std::tanh(v); });
}

StateTrajectory Reservoir::drive(const Sample& sample, Eigen::Index washout) const {
    if (washout < 0) throw DataError("washout must be nonnegative");
    if (sample.n_channels() != params_.n_inputs)
        throw DataError("clip " + sample.clip_id + " has " + std::to_string(sample.n_channels()) +
                        " channels, reservoir expects " + std::to_string(params_.n_inputs));
    const Eigen::Index t_total = sample.n_frames();
    if (t_total <= washout)
        throw DataError("clip " + sample.clip_id + " has " + std::to_string(t_total) +
                        " frames, need more than the washout of " + std::to_string(washout));

    StateTrajectory traj;
    traj.states.resize(params_.n_neurons, t_total - washout);
    traj.washout_dropped = washout;
    traj.source_label = sample.label;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(params_.n_neurons);
    for (Eigen::Index t = 0; t < t_total; ++t) {
        x = step(x, sample.frames.row(t).transpose());
        if (t >= washout) traj.states.col(t - washout) = x;
    }
    return traj;
}

}  // namespace esn
