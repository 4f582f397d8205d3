#pragma once

#include <vector>

#include "fluxlattice/model.hpp"

namespace fluxlattice {

/// Parameters of the effective single-band dispersion
///
///     w(k) = 2 J cos k + 2 beta [1 + cos(k + phi)]
///          = 2 beta + R cos(k + eta),
///
/// with R = 2 |J + beta e^{i phi}| and eta = arg(J + beta e^{i phi}).
struct BandParams {
    double J = 1.0;
    double beta = 1.0;
    double phi = 0.0;

    /// Takes the Hermitian part of the lattice (kappa is ignored).
    static BandParams from_lattice(const LatticeSpec& lattice);

    double amplitude() const; // R
    double phase() const;     // eta
    double center() const noexcept { return 2.0 * beta; }
    double bandwidth() const { return 2.0 * amplitude(); }
    double band_min() const { return center() - amplitude(); }
    double band_max() const { return center() + amplitude(); }
    bool is_flat(double tol = 1e-12) const { return amplitude() < tol; }
};

enum class Branch { Left, Right, Stationary };

const char* to_string(Branch branch) noexcept;

struct BandRoot {
    double k;       // in (-pi, pi]
    double v_group; // d w / d k
    Branch branch;
};

struct BandSolution {
    double omega;
    std::vector<BandRoot> roots;

    /// First root of the given branch, or nullptr.
    const BandRoot* find(Branch branch) const noexcept;
};

struct PhaseAccumulation {
    Branch branch;
    double k;
    double theta; // k N + phi_extra, reduced to (-pi, pi]
};

/// Maps any angle into (-pi, pi]; -pi goes to +pi.
double wrap_angle(double angle);

double dispersion(const BandParams& params, double k);
double group_velocity(const BandParams& params, double k);

/// All real k with w(k) = omega. Empty outside the band; one Stationary
/// root exactly at a band edge. Throws FlatBandError when R < 1e-12.
BandSolution solve_k(const BandParams& params, double omega);

/// D(omega) = (1/2pi) sum_i 1/|v_g(k_i)| over the propagating roots.
/// Throws OutOfBandError at or outside the band edges.
double density_of_states(const BandParams& params, double omega);

/// Phase gathered between two contacts N sites apart, per branch.
std::vector<PhaseAccumulation> phase_accumulation(const BandParams& params, double omega, int N,
                                                  double phi_extra);

} // namespace fluxlattice
