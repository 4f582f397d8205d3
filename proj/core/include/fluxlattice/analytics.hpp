#pragma once

#include <cstddef>
#include <vector>

#include "fluxlattice/band.hpp"
#include "fluxlattice/model.hpp"

namespace fluxlattice {

enum class SelfEnergyMethod { ClosedForm, NumericalIntegral };

struct SelfEnergyResult {
    Complex z;     // probe energy actually evaluated (includes i*eta)
    Complex value; // Sigma_e(z)
    double lamb_shift = 0.0; // Re Sigma
    double decay_half = 0.0; // -Im Sigma
    SelfEnergyMethod method = SelfEnergyMethod::ClosedForm;
    /// Quadrature error estimate (integral only).
    double quadrature_error = 0.0;
    /// |Sigma(eta) - Sigma(eta/2)| when the caller asked for z + i0+
    /// (integral only); negative when not computed.
    double regularization_shift = -1.0;
};

struct SelfEnergyOptions {
    double eta = 1e-6;          // stands in for i0+ when Im z == 0
    double relative_tol = 1e-10;
    double absolute_tol = 1e-12; // on the integral before the g^2/2pi prefactor
    std::size_t workspace_limit = 2000;
    bool richardson_check = true;
};

/// Sigma_e(z) = (g^2 / 2pi) int_{-pi}^{pi} dk |1 + e^{i(kN + phi_extra)}|^2 / (z - w_k)
/// by adaptive QUADPACK quadrature (QAG, 61-point Kronrod) split at the on-shell wave vectors.
/// A small atom uses the form factor 1. Requires Im z >= 0; Im z == 0 is
/// evaluated at z + i*eta. Throws FlatBandError for a flat band on the real
/// axis.
SelfEnergyResult self_energy_integral(const BandParams& band, const AtomSpec& atom, Complex z,
                                      const SelfEnergyOptions& options = {});

/// Real-space lattice Green function
///     G(n, z) = (1/2pi) int dk e^{ikn} / (z - w_k),
/// evaluated by residues. Im z == 0 is taken as the limit from above.
Complex green_function(const BandParams& band, int n, Complex z);

/// Residue (closed-form) self-energy, g^2 [2 G(0) + e^{i phi_extra} G(N)
/// + e^{-i phi_extra} G(-N)]. Requires beta == J (within 1e-12); throws
/// FlatBandError when phi is an odd multiple of pi.
SelfEnergyResult self_energy_closed(const BandParams& band, const AtomSpec& atom, Complex z);

struct BranchRate {
    double k;
    double v_group;
    Branch branch;
    double theta; // k N + phi_extra in (-pi, pi]; 0 for a small atom
    double rate;  // g^2 |F(k)|^2 / |v_g|
};

struct DecayRates {
    std::vector<BranchRate> branches;
    double total = 0.0;

    const BranchRate* find(Branch branch) const noexcept;
};

/// Golden-rule decay rate per emission branch at omega = atom.delta,
///     Gamma_i = 2 g^2 [1 + cos(k_i N + phi_extra)] / |v_g(k_i)|,
/// and their sum. For a symmetric band the total reduces to
/// 4 pi g^2 [1 + cos(k N)] D(omega) with D = 1 / (pi |v_g|).
DecayRates markovian_decay_rate(const BandParams& band, const AtomSpec& atom);

} // namespace fluxlattice
