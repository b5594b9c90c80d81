#pragma once

#include <Eigen/Dense>

namespace lifestyle::testing {

/// Brute-force maximiser of π·e - (ρ/2)πΣπᵀ over the lattice
/// {π = n·mesh : n_i >= 0 integer, Σn_i <= round(α/mesh)}, found by
/// exhaustive coarse-to-fine search (each stage scans every lattice point in
/// a window around the previous stage's best). Strict concavity makes the
/// windowed refinement exact up to the mesh.
Eigen::VectorXd brute_force_cqp(const Eigen::VectorXd& excess, const Eigen::MatrixXd& cov,
                                double alpha, double rho, double mesh = 1e-3);

}  // namespace lifestyle::testing
