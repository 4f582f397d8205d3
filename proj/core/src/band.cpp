#include "fluxlattice/band.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "fluxlattice/error.hpp"

namespace fluxlattice {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFlatTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

Branch classify(double v_group)
{
    if (std::abs(v_group) < kStationaryTol)
        return Branch::Stationary;
    return v_group > 0.0 ? Branch::Right : Branch::Left;
}

void require_dispersive(const BandParams& params)
{
    if (params.is_flat(kFlatTol))
        throw FlatBandError("flat band: wave vector and group velocity are undefined");
}

} // namespace

BandParams BandParams::from_lattice(const LatticeSpec& lattice)
{
    return {lattice.J, lattice.beta(), lattice.phi};
}

double BandParams::amplitude() const
{
    return 2.0 * std::hypot(J + beta * std::cos(phi), beta * std::sin(phi));
}

double BandParams::phase() const
{
    return std::atan2(beta * std::sin(phi), J + beta * std::cos(phi));
}

const char* to_string(Branch branch) noexcept
{
    switch (branch) {
    case Branch::Left: return "left";
    case Branch::Right: return "right";
    case Branch::Stationary: return "stationary";
    }
    return "?";
}

const BandRoot* BandSolution::find(Branch branch) const noexcept
{
    for (const BandRoot& root : roots) {
        if (root.branch == branch)
            return &root;
    }
    return nullptr;
}

double wrap_angle(double angle)
{
    double r = std::remainder(angle, 2.0 * kPi); // [-pi, pi]
    if (r <= -kPi)
        r += 2.0 * kPi;
    return r;
}

double dispersion(const BandParams& params, double k)
{
    return 2.0 * params.J * std::cos(k) + 2.0 * params.beta * (1.0 + std::cos(k + params.phi));
}

double group_velocity(const BandParams& params, double k)
{
    return -2.0 * params.J * std::sin(k) - 2.0 * params.beta * std::sin(k + params.phi);
}

BandSolution solve_k(const BandParams& params, double omega)
{
    require_dispersive(params);

    BandSolution out{omega, {}};
    const double R = params.amplitude();
    const double eta = params.phase();
    double x = (omega - params.center()) / R;
    if (std::abs(x) > 1.0)
        return out;
    // Within rounding of an edge the two roots are indistinguishable: snap so
    // the edge yields the single stationary root.
    const double edge_tol = 8.0 * std::numeric_limits<double>::epsilon()
                            * (1.0 + (std::abs(omega) + std::abs(params.center())) / R);
    if (1.0 - std::abs(x) <= edge_tol)
        x = std::copysign(1.0, x);

    const double a = std::acos(x); // [0, pi]
    auto push = [&](double k) {
        k = wrap_angle(k);
        const double v = -R * std::sin(k + eta);
        out.roots.push_back({k, v, classify(v)});
    };
    push(a - eta);
    if (a != 0.0 && a != kPi)
        push(-a - eta);
    return out;
}

double density_of_states(const BandParams& params, double omega)
{
    const BandSolution sol = solve_k(params, omega);
    double sum = 0.0;
    int propagating = 0;
    for (const BandRoot& root : sol.roots) {
        if (root.branch == Branch::Stationary)
            continue;
        sum += 1.0 / std::abs(root.v_group);
        ++propagating;
    }
    if (propagating == 0)
        throw OutOfBandError("density of states diverges or vanishes at omega = "
                             + std::to_string(omega) + " (band edge or outside the band)");
    return sum / (2.0 * kPi);
}

std::vector<PhaseAccumulation> phase_accumulation(const BandParams& params, double omega, int N,
                                                  double phi_extra)
{
    const BandSolution sol = solve_k(params, omega);
    std::vector<PhaseAccumulation> out;
    out.reserve(sol.roots.size());
    for (const BandRoot& root : sol.roots)
        out.push_back({root.branch, root.k, wrap_angle(root.k * N + phi_extra)});
    return out;
}

} // namespace fluxlattice
