#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esn/reservoir.hpp"

namespace esn {

/// Symmetric PSD matrix with spectrum in [0, 1) characterizing the state
/// subspace one class occupies. Combined conceptors carry no aperture.
struct Conceptor {
    Eigen::MatrixXd matrix;  // N x N
    std::optional<double> aperture;
    std::string label;

    Eigen::Index dim() const { return matrix.rows(); }
};

/// Time-averaged outer product of pooled reservoir states.
struct CorrelationMatrix {
    Eigen::MatrixXd matrix;  // N x N
    std::int64_t n_state_vectors = 0;

    Eigen::Index dim() const { return matrix.rows(); }
};

/// Pools the states of all trajectories and returns X X^T divided by the
/// pooled state count.
CorrelationMatrix correlation_matrix(const std::vector<StateTrajectory>& trajectories);

/// C = R (R + aperture^-2 I)^-1 via an SPD factorization; shares R's
/// eigenvectors, with eigenvalues s_i / (s_i + aperture^-2).
Conceptor compute_conceptor(const CorrelationMatrix& r, double aperture, std::string label);

/// Convex combination of conceptors; weights must be nonnegative and sum
/// to 1 within 1e-9. Symmetry and spectrum in [0, 1) are preserved.
Conceptor linear_combine(const std::vector<Conceptor>& conceptors, const std::vector<double>& weights);

/// Mean eigenvalue, trace(C) / N: how much state-space volume C admits.
double quota(const Conceptor& c);

}  // namespace esn
