#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fluxlattice {

using Complex = std::complex<double>;

/// Parameters of the flux-threaded sawtooth lattice.
///
/// Sublattice B (the chain the atoms couple to) has `m_total` sites
/// indexed m_min ... m_min + m_total - 1. Sublattice A has one apex site
/// per plaquette, A_m coupling B_m and B_{m+1}, so there are m_total - 1
/// of them. Both models work in the frame rotating at the B-site
/// frequency, so B sites sit at zero energy in the exact model.
struct LatticeSpec {
    double J = 1.0;        // B-B hopping, sets the energy unit
    double lambda = 0.0;   // A-B coupling
    double delta_ab = 1.0; // detuning of A below B
    double phi = 0.0;      // synthetic flux per plaquette
    double kappa = 0.0;    // intrinsic loss of the A sites
    int m_total = 200;
    int m_min = -100;

    /// Lattice whose adiabatically eliminated on-site shift equals `beta`
    /// (lambda = 1, delta_ab = 1/beta; lambda = 0 when beta = 0). Sites
    /// are centred on zero.
    static LatticeSpec with_beta(double J, double beta, double phi, int m_total = 200);

    int m_max() const noexcept { return m_min + m_total - 1; }

    /// beta = lambda^2 / Delta. Throws InvalidArgument when Delta = 0 and
    /// lambda != 0.
    double beta() const;

    /// lambda^2 / (Delta + i kappa); equals beta() for kappa = 0.
    Complex beta_lossy() const;

    /// Effective hopping B_m -> B_{m+1}: J + beta_lossy * e^{i phi}.
    Complex forward_hop() const;

    /// Effective hopping B_{m+1} -> B_m: J + beta_lossy * e^{-i phi}.
    /// Equals conj(forward_hop()) only when kappa = 0.
    Complex backward_hop() const;

    /// Throws InvalidArgument if the lattice itself is malformed.
    void validate() const;
};

/// Two-level (giant) atom coupled to sublattice B.
struct AtomSpec {
    double delta = 0.0;     // detuning from the B-site frequency
    double g = 0.2;         // coupling per contact point
    int site_left = 0;      // first contact
    int separation = 2;     // second contact at site_left + separation
    double phi_extra = 0.0; // extra phase on the right contact
    double gamma = 0.0;     // intrinsic decay of the excited state
    bool small = false;     // single contact at site_left

    int site_right() const noexcept { return site_left + separation; }

    /// Contact sites (one for a small atom, two otherwise).
    std::vector<int> contacts() const;

    /// Throws InvalidArgument unless every contact lies in
    /// [m_min + 2, m_max - 2] and g >= 0, N >= 1, gamma >= 0.
    void validate(const LatticeSpec& lattice) const;
};

struct BasisLabel {
    enum class Kind { Atom, SiteB, SiteA };
    Kind kind;
    int index; // atom number, or lattice index m

    friend bool operator==(const BasisLabel&, const BasisLabel&) = default;
};

/// Dense single-excitation Hamiltonian with a labelled basis.
///
/// Basis ordering is atoms first, then B sites in increasing m, then (exact
/// model only) A sites in increasing m.
class HamiltonianMatrix {
public:
    HamiltonianMatrix(Eigen::MatrixXcd entries, std::vector<BasisLabel> labels,
                      LatticeSpec lattice, std::vector<AtomSpec> atoms);

    Eigen::Index dim() const noexcept { return entries_.rows(); }
    const Eigen::MatrixXcd& entries() const noexcept { return entries_; }
    const std::vector<BasisLabel>& labels() const noexcept { return labels_; }
    const LatticeSpec& lattice() const noexcept { return lattice_; }
    const std::vector<AtomSpec>& atoms() const noexcept { return atoms_; }

    int atom_count() const noexcept { return static_cast<int>(atoms_.size()); }
    bool has_a_sites() const noexcept { return a_count_ > 0; }

    Eigen::Index atom_index(int atom) const;
    Eigen::Index site_b_index(int m) const;
    Eigen::Index site_a_index(int m) const;
    std::optional<Eigen::Index> find(BasisLabel label) const;

    /// Offset of the first B site; B sites occupy [b_offset, b_offset + m_total).
    Eigen::Index b_offset() const noexcept { return atom_count(); }
    Eigen::Index a_offset() const noexcept { return atom_count() + lattice_.m_total; }

    /// max |H_ij - conj(H_ji)|
    double hermiticity_defect() const;
    bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }

private:
    Eigen::MatrixXcd entries_;
    std::vector<BasisLabel> labels_;
    LatticeSpec lattice_;
    std::vector<AtomSpec> atoms_;
    Eigen::Index a_count_ = 0;
};

/// Single-band model obtained by adiabatically eliminating sublattice A:
/// on-site 2*beta and hoppings J + beta e^{+-i phi} along B. With kappa > 0
/// beta is replaced by lambda^2 / (Delta + i kappa) everywhere.
HamiltonianMatrix build_effective(const LatticeSpec& lattice, std::span<const AtomSpec> atoms);

/// Full two-sublattice sawtooth model (A sites at -Delta - i kappa).
HamiltonianMatrix build_exact(const LatticeSpec& lattice, std::span<const AtomSpec> atoms);

} // namespace fluxlattice
