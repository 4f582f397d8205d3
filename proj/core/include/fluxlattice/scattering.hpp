#pragma once

#include <vector>

#include "fluxlattice/band.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/model.hpp"

namespace fluxlattice {

enum class Incidence { LeftIncident, RightIncident };

const char* to_string(Incidence direction) noexcept;

/// Stationary single-photon scattering state at energy omega.
///
/// k is the right-moving and k_prime the left-moving wave vector. For left
/// incidence the field is e^{ikm} + r e^{ik'm} (m < 0), f e^{ikm} + f' e^{ik'm}
/// (0 <= m <= N) and t e^{ikm} (m > N); right incidence mirrors this with the
/// incoming wave e^{ik'm} arriving from m > N. Sites are relative to the
/// atom's left contact.
struct ScatteringSolution {
    Incidence direction = Incidence::LeftIncident;
    double omega = 0.0;
    double k = 0.0;
    double k_prime = 0.0;
    double v_right = 0.0; // group velocity at k (> 0)
    double v_left = 0.0;  // group velocity at k' (< 0)
    int separation = 0;
    Complex t, r, f, f_prime, c_e;
    double T = 0.0;     // |t|^2
    double R_raw = 0.0; // |r|^2
    /// 1 - T - |v_refl / v_in| R_raw: zero without loss, the absorbed
    /// fraction otherwise.
    double flux_residual = 0.0;
    double condition_number = 0.0;
    double residual = 0.0; // max row residual of the solved 5x5 system

    /// Flux-weighted reflection |v_refl / v_in| R_raw.
    double reflectance() const noexcept;
};

/// Solves the five boundary/atom equations at m = -1, 0, N, N+1 plus the
/// atom row (omega - delta + i gamma) c_e = g (c_0 + e^{i phi_extra} c_N).
/// Throws OutOfBandError unless omega lies strictly inside a dispersive
/// band, InvalidArgument for N < 2, SingularSystemError when the condition
/// number exceeds 1e12.
ScatteringSolution solve_scattering(const BandParams& band, const AtomSpec& atom, double omega,
                                    Incidence direction);

/// Ansatz field amplitude c_m (m relative to the left contact).
Complex field_amplitude(const ScatteringSolution& sol, int m);

/// Max residual of the stationary equations for lattice rows m in [lo, hi]
/// together with the atom row.
double stationary_residual(const BandParams& band, const AtomSpec& atom,
                           const ScatteringSolution& sol, int lo, int hi);

struct WavepacketSpec {
    int m0 = 0;
    double width = 5.0;
    double k0 = 0.0;

    double amplitude() const; // pi^{-1/4} w^{-1/2}
};

/// c_m = A exp(-(m - m0)^2 / 2w^2 + i k0 m) on sublattice B, atoms in the
/// ground state, renormalised to unit norm. Requires the packet centre to
/// be more than 4w from both lattice edges.
SingleExcitationState gaussian_initial_state(const HamiltonianMatrix& h, const WavepacketSpec& wp);

struct DynamicTransmission {
    double transmitted = 0.0; // past the coupling region
    double reflected = 0.0;   // back on the incidence side
};

/// Lattice probability beyond (transmitted) and behind (reflected) the
/// coupling region [site_left, site_left + span] at time t.
DynamicTransmission wavepacket_transmission(const EvolutionRecord& record, int site_left, int span,
                                            Incidence direction, double t);

} // namespace fluxlattice
