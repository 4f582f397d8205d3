#include "fluxlattice/scattering.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "fluxlattice/error.hpp"

namespace fluxlattice {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kConditionLimit = 1e12;

using Unknowns = Eigen::Matrix<Complex, 5, 1>; // t, r, f, f', c_e

struct Scatterer {
    const BandParams& band;
    const AtomSpec& atom;
    Complex xi;
    Complex contact_right; // g e^{i phi_extra} (zero for a small atom)
};

Scatterer make_scatterer(const BandParams& band, const AtomSpec& atom)
{
    const Complex xi = band.J + band.beta * std::exp(kI * band.phi);
    const Complex right = atom.small ? Complex{} : atom.g * std::exp(kI * atom.phi_extra);
    return {band, atom, xi, right};
}

Complex field(Incidence dir, double k, double kp, int N, const Unknowns& x, int m)
{
    const Complex t = x[0], r = x[1], f = x[2], fp = x[3];
    const Complex right = std::exp(kI * (k * m));
    const Complex left = std::exp(kI * (kp * m));
    if (dir == Incidence::LeftIncident) {
        if (m < 0)
            return right + r * left;
        if (m <= N)
            return f * right + fp * left;
        return t * right;
    }
    if (m < 0)
        return t * left;
    if (m <= N)
        return fp * left + f * right;
    return left + r * right;
}

Complex lattice_row(const Scatterer& s, Incidence dir, double omega, double k, double kp,
                    const Unknowns& x, int m)
{
    const int N = s.atom.separation;
    auto c = [&](int j) { return field(dir, k, kp, N, x, j); };
    Complex row = (omega - s.band.center()) * c(m) - s.xi * c(m + 1) - std::conj(s.xi) * c(m - 1);
    if (m == 0)
        row -= s.atom.g * x[4];
    if (m == N)
        row -= std::conj(s.contact_right) * x[4];
    return row;
}

Complex atom_row(const Scatterer& s, Incidence dir, double omega, double k, double kp,
                 const Unknowns& x)
{
    const int N = s.atom.separation;
    return Complex(omega - s.atom.delta, s.atom.gamma) * x[4]
           - s.atom.g * field(dir, k, kp, N, x, 0) - s.contact_right * field(dir, k, kp, N, x, N);
}

Unknowns system_rows(const Scatterer& s, Incidence dir, double omega, double k, double kp,
                     const Unknowns& x)
{
    const int N = s.atom.separation;
    Unknowns e;
    e[0] = lattice_row(s, dir, omega, k, kp, x, -1);
    e[1] = lattice_row(s, dir, omega, k, kp, x, 0);
    e[2] = lattice_row(s, dir, omega, k, kp, x, N);
    e[3] = lattice_row(s, dir, omega, k, kp, x, N + 1);
    e[4] = atom_row(s, dir, omega, k, kp, x);
    return e;
}

} // namespace

const char* to_string(Incidence direction) noexcept
{
    return direction == Incidence::LeftIncident ? "left" : "right";
}

double ScatteringSolution::reflectance() const noexcept
{
    const double v_in = direction == Incidence::LeftIncident ? v_right : v_left;
    const double v_out = direction == Incidence::LeftIncident ? v_left : v_right;
    return std::abs(v_out / v_in) * R_raw;
}

ScatteringSolution solve_scattering(const BandParams& band, const AtomSpec& atom, double omega,
                                    Incidence direction)
{
    if (atom.separation < 2)
        throw InvalidArgument("scattering ansatz needs N >= 2");
    const BandSolution bs = solve_k(band, omega);
    const BandRoot* right = bs.find(Branch::Right);
    const BandRoot* left = bs.find(Branch::Left);
    if (!right || !left)
        throw OutOfBandError("omega = " + std::to_string(omega)
                             + " is not strictly inside the band");

    const Scatterer s = make_scatterer(band, atom);
    const double k = right->k;
    const double kp = left->k;

    const Unknowns zero = Unknowns::Zero();
    const Unknowns b = system_rows(s, direction, omega, k, kp, zero);
    Eigen::Matrix<Complex, 5, 5> A;
    for (int j = 0; j < 5; ++j)
        A.col(j) = system_rows(s, direction, omega, k, kp, Unknowns::Unit(j)) - b;

    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd{Eigen::MatrixXcd(A)};
    const auto& sv = svd.singularValues();
    const double cond = sv[4] > 0.0 ? sv[0] / sv[4] : std::numeric_limits<double>::infinity();
    if (!(cond <= kConditionLimit))
        throw SingularSystemError("scattering system is singular (condition number "
                                      + std::to_string(cond) + ")",
                                  cond);

    const Unknowns x = A.fullPivLu().solve(-b);

    ScatteringSolution sol;
    sol.direction = direction;
    sol.omega = omega;
    sol.k = k;
    sol.k_prime = kp;
    sol.v_right = right->v_group;
    sol.v_left = left->v_group;
    sol.separation = atom.separation;
    sol.t = x[0];
    sol.r = x[1];
    sol.f = x[2];
    sol.f_prime = x[3];
    sol.c_e = x[4];
    sol.T = std::norm(sol.t);
    sol.R_raw = std::norm(sol.r);
    sol.flux_residual = 1.0 - sol.T - sol.reflectance();
    sol.condition_number = cond;
    sol.residual = system_rows(s, direction, omega, k, kp, x).cwiseAbs().maxCoeff();
    return sol;
}

Complex field_amplitude(const ScatteringSolution& sol, int m)
{
    Unknowns x;
    x << sol.t, sol.r, sol.f, sol.f_prime, sol.c_e;
    return field(sol.direction, sol.k, sol.k_prime, sol.separation, x, m);
}

double stationary_residual(const BandParams& band, const AtomSpec& atom,
                           const ScatteringSolution& sol, int lo, int hi)
{
    const Scatterer s = make_scatterer(band, atom);
    Unknowns x;
    x << sol.t, sol.r, sol.f, sol.f_prime, sol.c_e;
    double worst =
        std::abs(atom_row(s, sol.direction, sol.omega, sol.k, sol.k_prime, x));
    for (int m = lo; m <= hi; ++m)
        worst = std::max(worst, std::abs(lattice_row(s, sol.direction, sol.omega, sol.k,
                                                     sol.k_prime, x, m)));
    return worst;
}

double WavepacketSpec::amplitude() const
{
    return std::pow(std::numbers::pi, -0.25) / std::sqrt(width);
}

SingleExcitationState gaussian_initial_state(const HamiltonianMatrix& h, const WavepacketSpec& wp)
{
    if (!(wp.width > 0.0))
        throw InvalidArgument("wavepacket width must be positive");
    const LatticeSpec& lat = h.lattice();
    const double margin = 4.0 * wp.width;
    if (wp.m0 - lat.m_min <= margin || lat.m_max() - wp.m0 <= margin)
        throw InvalidArgument("wavepacket centred at " + std::to_string(wp.m0)
                              + " is within 4w of a lattice edge");

    SingleExcitationState psi{Eigen::VectorXcd::Zero(h.dim()), 0.0};
    const double A = wp.amplitude();
    for (int m = lat.m_min; m <= lat.m_max(); ++m) {
        const double d = m - wp.m0;
        psi.amplitudes[h.site_b_index(m)] =
            A * std::exp(Complex(-d * d / (2.0 * wp.width * wp.width), wp.k0 * m));
    }
    psi.amplitudes.normalize();
    return psi;
}

DynamicTransmission wavepacket_transmission(const EvolutionRecord& record, int site_left, int span,
                                            Incidence direction, double t)
{
    const Eigen::VectorXd p = record.profile(t);
    double behind = 0.0, beyond = 0.0;
    for (std::size_t i = 0; i < record.sites.size(); ++i) {
        const int m = record.sites[i];
        if (m < site_left)
            behind += p[static_cast<Eigen::Index>(i)];
        else if (m > site_left + span)
            beyond += p[static_cast<Eigen::Index>(i)];
    }
    if (direction == Incidence::LeftIncident)
        return {beyond, behind};
    return {behind, beyond};
}

} // namespace fluxlattice
