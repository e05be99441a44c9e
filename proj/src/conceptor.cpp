#include "esn/conceptor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "esn/errors.hpp"

namespace esn {

CorrelationMatrix correlation_matrix(const std::vector<StateTrajectory>& trajectories) {
    if (trajectories.empty()) throw DataError("no trajectories to correlate");
    const Eigen::Index n = trajectories.front().dim();

    std::int64_t pooled = 0;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (const auto& traj : trajectories) {
        if (traj.dim() != n)
            throw DataError("trajectory state dimension " + std::to_string(traj.dim()) +
                            " does not match " + std::to_string(n));
        if (traj.length() == 0) throw DataError("empty trajectory in correlation pool");
        acc.noalias() += traj.states * traj.states.transpose();
        pooled += traj.length();
    }
    return CorrelationMatrix{acc / static_cast<double>(pooled), pooled};
}

Conceptor compute_conceptor(const CorrelationMatrix& r, double aperture, std::string label) {
    if (!(aperture > 0.0) || !std::isfinite(aperture))
        throw DataError("aperture must be a positive real, got " + std::to_string(aperture));
    if (!r.matrix.allFinite()) throw NumericError("correlation matrix contains non-finite entries");
    if (r.matrix.rows() != r.matrix.cols()) throw DataError("correlation matrix must be square");

    const Eigen::Index n = r.dim();
    const double ridge = 1.0 / (aperture * aperture);
    // (R + a^-2 I) is symmetric positive definite, so a Cholesky solve gives
    // C = R (R + a^-2 I)^-1; the two factors commute, which lets us solve
    // from the left and symmetrize away the last rounding skew.
    Eigen::MatrixXd shifted = r.matrix + ridge * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success)
        throw NumericError("correlation matrix is not positive semidefinite up to rounding");
    Eigen::MatrixXd c = llt.solve(r.matrix);
    c = ((c + c.transpose()) * 0.5).eval();

    return Conceptor{std::move(c), aperture, std::move(label)};
}

Conceptor linear_combine(const std::vector<Conceptor>& conceptors, const std::vector<double>& weights) {
    if (conceptors.size() < 2) throw DataError("need at least two conceptors to combine");
    if (weights.size() != conceptors.size())
        throw DataError("got " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(conceptors.size()) + " conceptors");

    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DataError("combination weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("combination weights sum to " + std::to_string(sum) + ", expected 1");

    const Eigen::Index n = conceptors.front().dim();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    std::string label;
    for (std::size_t i = 0; i < conceptors.size(); ++i) {
        if (conceptors[i].dim() != n) throw DataError("conceptor dimensions differ, cannot combine");
        acc.noalias() += weights[i] * conceptors[i].matrix;
        if (i > 0) label += '~';
        label += conceptors[i].label;
    }
    return Conceptor{std::move(acc), std::nullopt, std::move(label)};
}

double quota(const Conceptor& c) {
    if (c.dim() == 0) throw DataError("quota of an empty conceptor");
    return c.matrix.trace() / static_cast<double>(c.dim());
}

}  // namespace esn
