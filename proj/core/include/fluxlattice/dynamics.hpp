#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fluxlattice/model.hpp"

namespace fluxlattice {

/// Amplitudes over the basis of a HamiltonianMatrix at a given time.
struct SingleExcitationState {
    Eigen::VectorXcd amplitudes;
    double time = 0.0;

    double norm_squared() const { return amplitudes.squaredNorm(); }
};

/// Sampled observables of one time evolution.
///
/// `p_site` holds |c_m|^2 on sublattice B, one row per sample and one column
/// per site in `sites` order. `p_apex` holds the summed A-sublattice weight
/// (zero for the effective model), so that
///     sum_j p_atom[j][t] + sum_m p_site(t, m) + p_apex[t] = total_norm[t].
struct EvolutionRecord {
    std::vector<double> times;
    std::vector<std::vector<double>> p_atom; // [atom][sample]
    Eigen::MatrixXd p_site;                  // samples x m_total
    std::vector<int> sites;                  // lattice index of each column
    std::vector<double> p_apex;
    std::vector<double> total_norm;
    SingleExcitationState final_state;

    bool empty() const noexcept { return times.empty(); }
    std::size_t sample_count() const noexcept { return times.size(); }

    /// Nearest sample to `t`; throws InvalidArgument outside [0, t_final].
    std::size_t sample_at(double t) const;
    /// Column of site m in p_site; throws InvalidArgument if absent.
    Eigen::Index column_of(int m) const;
    /// Lattice profile P_m at the sample nearest to t.
    Eigen::VectorXd profile(double t) const;
};

enum class Propagator {
    Automatic,  // spectral when H is Hermitian, adaptive Runge-Kutta otherwise
    Spectral,   // requires Hermitian H
    RungeKutta, // Dormand-Prince 5(4) with embedded error control
};

struct EvolveOptions {
    Propagator propagator = Propagator::Automatic;
    /// Local error bound per unit time for the Runge-Kutta path.
    double tolerance = 1e-10;
    double hermitian_tol = 1e-12;
};

SingleExcitationState atom_excited_state(const HamiltonianMatrix& h, int atom = 0);

/// psi(t) for i dpsi/dt = H psi, t >= 0 measured from psi0.time.
SingleExcitationState propagate(const HamiltonianMatrix& h, const SingleExcitationState& psi0,
                                double t, const EvolveOptions& options = {});

/// Evolves psi0 over [0, t_final] and samples observables every dt_sample
/// (the last sample is t_final exactly).
EvolutionRecord evolve(const HamiltonianMatrix& h, const SingleExcitationState& psi0,
                       double t_final, double dt_sample = 0.05,
                       const EvolveOptions& options = {});

/// (P_L - P_R) / (P_L + P_R) with P_L over m < site_left and P_R over
/// m > site_left + span. Zero when P_L + P_R < 1e-12. Use span = 0 for a
/// small atom.
double chirality(const EvolutionRecord& record, double t, int site_left, int span);

/// Fraction of lattice (B) probability on sites [lo, hi] at time t. An empty
/// lattice (total below 1e-15) counts as fully confined.
double confinement(const EvolutionRecord& record, double t, int lo, int hi);

/// Mean of P_e over the samples in [t0, t1].
double window_mean(const EvolutionRecord& record, int atom, double t0, double t1);

enum class DecayClass { Complete, Fractional, Undetermined };
const char* to_string(DecayClass c) noexcept;

/// Classifies the long-time plateau: fractional above 0.02, complete below
/// 0.01. These thresholds are conventions of this library.
DecayClass classify_decay(double plateau_mean);

/// Least-squares slope of -log P_e over [t0, t1]; returns the decay rate.
double fit_decay_rate(const EvolutionRecord& record, int atom, double t0 = 2.0, double t1 = 20.0);

/// Mean spacing of successive upward crossings of P_e through its record
/// mean, linearly interpolated between samples. Empty with fewer than two
/// crossings.
std::optional<double> oscillation_period(const EvolutionRecord& record, int atom);

/// Distances from the coupling region [site_left, site_left + span] to the
/// outermost site on each side whose P_m(t) exceeds `fraction` of the
/// profile maximum; 0 when no such site exists on that side.
struct EmissionFront {
    int left = 0;
    int right = 0;
};
EmissionFront emission_front(const EvolutionRecord& record, double t, int site_left, int span,
                             double fraction = 0.01);

/// max P_m(t) over the `width` outermost sites at each lattice end.
double edge_weight(const EvolutionRecord& record, double t, int width = 2);

} // namespace fluxlattice
