#include "fluxlattice/model.hpp"

#include <cmath>
#include <string>

#include "fluxlattice/error.hpp"

namespace fluxlattice {

namespace {

constexpr Complex kI{0.0, 1.0};

void add_atoms(Eigen::MatrixXcd& h, const LatticeSpec& lattice, std::span<const AtomSpec> atoms)
{
    const Eigen::Index b0 = static_cast<Eigen::Index>(atoms.size());
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const AtomSpec& atom = atoms[j];
        const auto a = static_cast<Eigen::Index>(j);
        h(a, a) = Complex(atom.delta, -atom.gamma);

        const Eigen::Index left = b0 + (atom.site_left - lattice.m_min);
        h(a, left) += atom.g;
        h(left, a) += atom.g;
        if (!atom.small) {
            const Eigen::Index right = b0 + (atom.site_right() - lattice.m_min);
            const Complex c = atom.g * std::exp(kI * atom.phi_extra);
            h(a, right) += c;
            h(right, a) += std::conj(c);
        }
    }
}

std::vector<BasisLabel> make_labels(const LatticeSpec& lattice, std::size_t atom_count, bool with_a)
{
    std::vector<BasisLabel> labels;
    labels.reserve(atom_count + 2 * static_cast<std::size_t>(lattice.m_total));
    for (std::size_t j = 0; j < atom_count; ++j)
        labels.push_back({BasisLabel::Kind::Atom, static_cast<int>(j)});
    for (int m = lattice.m_min; m <= lattice.m_max(); ++m)
        labels.push_back({BasisLabel::Kind::SiteB, m});
    if (with_a) {
        for (int m = lattice.m_min; m < lattice.m_max(); ++m)
            labels.push_back({BasisLabel::Kind::SiteA, m});
    }
    return labels;
}

void validate_all(const LatticeSpec& lattice, std::span<const AtomSpec> atoms)
{
    lattice.validate();
    for (const AtomSpec& atom : atoms)
        atom.validate(lattice);
}

} // namespace

LatticeSpec LatticeSpec::with_beta(double J, double beta, double phi, int m_total)
{
    LatticeSpec spec;
    spec.J = J;
    spec.phi = phi;
    spec.m_total = m_total;
    spec.m_min = -m_total / 2;
    if (beta == 0.0) {
        spec.lambda = 0.0;
        spec.delta_ab = 1.0;
    } else {
        spec.lambda = 1.0;
        spec.delta_ab = 1.0 / beta;
    }
    return spec;
}

double LatticeSpec::beta() const
{
    if (lambda == 0.0)
        return 0.0;
    if (delta_ab == 0.0)
        throw InvalidArgument("beta = lambda^2/Delta is undefined for Delta = 0");
    return lambda * lambda / delta_ab;
}

Complex LatticeSpec::beta_lossy() const
{
    if (kappa == 0.0)
        return beta();
    if (lambda == 0.0)
        return 0.0;
    return lambda * lambda / Complex(delta_ab, kappa);
}

Complex LatticeSpec::forward_hop() const
{
    return J + beta_lossy() * std::exp(kI * phi);
}

Complex LatticeSpec::backward_hop() const
{
    return J + beta_lossy() * std::exp(-kI * phi);
}

void LatticeSpec::validate() const
{
    if (m_total < 8)
        throw InvalidArgument("m_total must be at least 8, got " + std::to_string(m_total));
    if (!std::isfinite(J) || !std::isfinite(lambda) || !std::isfinite(delta_ab)
        || !std::isfinite(phi) || !std::isfinite(kappa))
        throw InvalidArgument("lattice parameters must be finite");
    if (kappa < 0.0)
        throw InvalidArgument("kappa must be non-negative");
}

std::vector<int> AtomSpec::contacts() const
{
    if (small)
        return {site_left};
    return {site_left, site_right()};
}

void AtomSpec::validate(const LatticeSpec& lattice) const
{
    if (!(g >= 0.0) || !std::isfinite(g))
        throw InvalidArgument("atom coupling g must be finite and non-negative");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw InvalidArgument("atom decay gamma must be finite and non-negative");
    if (!std::isfinite(delta) || !std::isfinite(phi_extra))
        throw InvalidArgument("atom detuning and phase must be finite");
    if (separation < 1)
        throw InvalidArgument("coupling separation N must be >= 1");
    const int lo = lattice.m_min + 2;
    const int hi = lattice.m_max() - 2;
    for (int site : contacts()) {
        if (site < lo || site > hi)
            throw InvalidArgument("coupling site " + std::to_string(site) + " outside ["
                                  + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

HamiltonianMatrix::HamiltonianMatrix(Eigen::MatrixXcd entries, std::vector<BasisLabel> labels,
                                     LatticeSpec lattice, std::vector<AtomSpec> atoms)
    : entries_(std::move(entries)),
      labels_(std::move(labels)),
      lattice_(lattice),
      atoms_(std::move(atoms))
{
    if (entries_.rows() != entries_.cols()
        || entries_.rows() != static_cast<Eigen::Index>(labels_.size()))
        throw InvalidArgument("Hamiltonian entries and basis labels disagree in size");
    a_count_ = static_cast<Eigen::Index>(labels_.size()) - atom_count() - lattice_.m_total;
}

Eigen::Index HamiltonianMatrix::atom_index(int atom) const
{
    if (atom < 0 || atom >= atom_count())
        throw InvalidArgument("atom index " + std::to_string(atom) + " out of range");
    return atom;
}

Eigen::Index HamiltonianMatrix::site_b_index(int m) const
{
    if (m < lattice_.m_min || m > lattice_.m_max())
        throw InvalidArgument("B site " + std::to_string(m) + " out of range");
    return b_offset() + (m - lattice_.m_min);
}

Eigen::Index HamiltonianMatrix::site_a_index(int m) const
{
    if (a_count_ == 0 || m < lattice_.m_min || m >= lattice_.m_max())
        throw InvalidArgument("A site " + std::to_string(m) + " out of range");
    return a_offset() + (m - lattice_.m_min);
}

std::optional<Eigen::Index> HamiltonianMatrix::find(BasisLabel label) const
{
    try {
        switch (label.kind) {
        case BasisLabel::Kind::Atom: return atom_index(label.index);
        case BasisLabel::Kind::SiteB: return site_b_index(label.index);
        case BasisLabel::Kind::SiteA: return site_a_index(label.index);
        }
    } catch (const InvalidArgument&) {
    }
    return std::nullopt;
}

double HamiltonianMatrix::hermiticity_defect() const
{
    return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
}

HamiltonianMatrix build_effective(const LatticeSpec& lattice, std::span<const AtomSpec> atoms)
{
    validate_all(lattice, atoms);
    (void)lattice.beta(); // rejects Delta = 0 with lambda != 0, also when kappa > 0

    const Eigen::Index na = static_cast<Eigen::Index>(atoms.size());
    const Eigen::Index dim = na + lattice.m_total;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);

    const Complex onsite = 2.0 * lattice.beta_lossy();
    const Complex fwd = lattice.forward_hop();
    const Complex bwd = lattice.backward_hop();
    for (Eigen::Index i = 0; i < lattice.m_total; ++i) {
        const Eigen::Index b = na + i;
        h(b, b) = onsite;
        if (i + 1 < lattice.m_total) {
            h(b, b + 1) = fwd;
            h(b + 1, b) = bwd;
        }
    }
    add_atoms(h, lattice, atoms);

    return HamiltonianMatrix(std::move(h), make_labels(lattice, atoms.size(), false), lattice,
                             {atoms.begin(), atoms.end()});
}

HamiltonianMatrix build_exact(const LatticeSpec& lattice, std::span<const AtomSpec> atoms)
{
    validate_all(lattice, atoms);

    const Eigen::Index na = static_cast<Eigen::Index>(atoms.size());
    const Eigen::Index nb = lattice.m_total;
    const Eigen::Index dim = na + nb + (nb - 1);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);

    const Complex apex_energy(-lattice.delta_ab, -lattice.kappa);
    const Complex flux = std::exp(kI * lattice.phi);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const Eigen::Index b = na + i;
        if (i + 1 < nb) {
            h(b, b + 1) = lattice.J;
            h(b + 1, b) = lattice.J;

            // A_i couples B_i with lambda and B_{i+1} with lambda e^{i phi}.
            const Eigen::Index a = na + nb + i;
            h(a, a) = apex_energy;
            h(a, b) = lattice.lambda;
            h(b, a) = lattice.lambda;
            h(a, b + 1) = lattice.lambda * flux;
            h(b + 1, a) = lattice.lambda * std::conj(flux);
        }
    }
    add_atoms(h, lattice, atoms);

    return HamiltonianMatrix(std::move(h), make_labels(lattice, atoms.size(), true), lattice,
                             {atoms.begin(), atoms.end()});
}

} // namespace fluxlattice
