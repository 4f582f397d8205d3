#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fluxlattice/cli/config.hpp"
#include "fluxlattice/fluxlattice.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fluxlattice;
using fluxlattice::testing::Rng;
using std::numbers::pi;

namespace {

BandParams random_band(Rng& rng, bool beta_equals_j)
{
    for (;;) {
        BandParams b{1.0, beta_equals_j ? 1.0 : rng.uniform(0.1, 2.0), rng.uniform(0.0, 2 * pi)};
        if (!b.is_flat(0.05))
            return b;
    }
}

double random_in_band(Rng& rng, const BandParams& b, double fraction = 0.95)
{
    return b.center() + rng.uniform(-fraction, fraction) * b.amplitude();
}

AtomSpec random_atom(Rng& rng, const BandParams& b, int max_n = 6)
{
    AtomSpec a;
    a.delta = random_in_band(rng, b);
    a.g = rng.uniform(0.05, 0.5);
    a.separation = rng.integer(2, max_n);
    a.phi_extra = rng.coin() ? 0.0 : rng.uniform(0.0, 2 * pi);
    a.site_left = rng.integer(-3, 3);
    return a;
}

} // namespace

TEST_CASE("dispersion inverts solve_k")
{
    Rng rng(1001);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto b = random_band(rng, false);
        const double omega = random_in_band(rng, b, 0.999);
        const auto s = solve_k(b, omega);
        REQUIRE(s.roots.size() == 2);
        for (const auto& r : s.roots) {
            CHECK(std::abs(dispersion(b, r.k) - omega) < 1e-12);
            CHECK((r.k > -pi && r.k <= pi));
            ++checked;
        }
    }
    CHECK(checked == 2000);
}

TEST_CASE("wave vectors sum to -phi when beta = J")
{
    Rng rng(1002);
    for (int trial = 0; trial < 500; ++trial) {
        const auto b = random_band(rng, true);
        const auto s = solve_k(b, random_in_band(rng, b));
        REQUIRE(s.roots.size() == 2);
        CHECK(oracle::angle_distance(s.roots[0].k + s.roots[1].k + b.phi, 0.0) < 1e-12);
    }
}

TEST_CASE("lossless Hamiltonians are Hermitian")
{
    Rng rng(1003);
    for (int trial = 0; trial < 40; ++trial) {
        LatticeSpec l;
        l.lambda = rng.uniform(0.0, 5.0);
        l.delta_ab = rng.uniform(10.0, 60.0) * (rng.coin() ? 1 : -1);
        l.phi = rng.uniform(0.0, 2 * pi);
        l.m_total = 2 * rng.integer(12, 30);
        l.m_min = -l.m_total / 2;
        const auto b = BandParams::from_lattice(l);
        std::vector<AtomSpec> atoms;
        for (int j = rng.integer(0, 3); j > 0; --j)
            atoms.push_back(random_atom(rng, b.is_flat(1e-3) ? BandParams{1, 0, 0} : b));
        CHECK(build_effective(l, atoms).hermiticity_defect() < 1e-14);
        CHECK(build_exact(l, atoms).hermiticity_defect() < 1e-14);
    }
}

TEST_CASE("Hermitian evolution is unitary")
{
    Rng rng(1004);
    for (int trial = 0; trial < 10; ++trial) {
        const auto b = random_band(rng, false);
        const auto lattice = LatticeSpec::with_beta(1.0, b.beta, b.phi, 2 * rng.integer(20, 60));
        std::vector<AtomSpec> atoms{random_atom(rng, b), random_atom(rng, b)};
        const auto h = build_effective(lattice, atoms);
        const auto r = evolve(h, atom_excited_state(h, rng.integer(0, 1)), rng.uniform(5.0, 30.0), 0.1);
        for (double n : r.total_norm)
            CHECK(std::abs(n - 1.0) < 1e-9);
        for (std::size_t s = 0; s < r.sample_count(); ++s) {
            CHECK(r.p_atom[0][s] <= 1.0 + 1e-9);
            CHECK(r.p_site.row(static_cast<Eigen::Index>(s)).maxCoeff() <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("lossless scattering is reciprocal")
{
    Rng rng(1005);
    for (int set = 0; set < 10; ++set) {
        const auto b = random_band(rng, rng.coin());
        AtomSpec a = random_atom(rng, b);
        a.g = rng.uniform(0.1, 1.0);
        const double inset = 1e-3 * b.amplitude();
        for (int i = 0; i < 200; ++i) {
            const double omega = b.band_min() + inset + (b.bandwidth() - 2 * inset) * i / 199.0;
            const auto l = solve_scattering(b, a, omega, Incidence::LeftIncident);
            const auto r = solve_scattering(b, a, omega, Incidence::RightIncident);
            CHECK(std::abs(l.T - r.T) < 1e-10);
            CHECK(std::abs(l.flux_residual) < 1e-10);
            CHECK(l.residual < 1e-12);
        }
    }
}

TEST_CASE("lossy scattering never creates flux")
{
    Rng rng(1006);
    for (int set = 0; set < 10; ++set) {
        const auto b = random_band(rng, rng.coin());
        AtomSpec a = random_atom(rng, b);
        a.gamma = rng.uniform(0.01, 1.0);
        for (int i = 0; i < 100; ++i) {
            const double omega = random_in_band(rng, b, 0.99);
            for (auto dir : {Incidence::LeftIncident, Incidence::RightIncident}) {
                const auto s = solve_scattering(b, a, omega, dir);
                CHECK(s.T + s.reflectance() <= 1.0 + 1e-10);
            }
        }
    }
}

TEST_CASE("closed and integral self-energies agree")
{
    Rng rng(1007);
    for (int trial = 0; trial < 50; ++trial) {
        const auto b = random_band(rng, true);
        AtomSpec a = random_atom(rng, b);
        a.separation = rng.integer(1, 6);
        const Complex z(random_in_band(rng, b), 1e-6);
        const auto closed = self_energy_closed(b, a, z);
        const auto integral = self_energy_integral(b, a, z);
        // Relative to |Sigma|, floored where interference drives Sigma to zero.
        const double scale = std::max(std::abs(closed.value), 1e-3 * a.g * a.g);
        CHECK(std::abs(closed.value - integral.value) < 1e-4 * scale);
    }
}

TEST_CASE("golden-rule rate equals -2 Im Sigma on the real axis")
{
    Rng rng(1008);
    int compared = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto b = random_band(rng, true);
        AtomSpec a = random_atom(rng, b);
        a.small = rng.integer(0, 4) == 0;
        const auto rates = markovian_decay_rate(b, a);
        const double im = self_energy_closed(b, a, Complex(a.delta, 0.0)).value.imag();
        if (rates.total < 1e-10) {
            CHECK(std::abs(im) < 1e-10);
            continue;
        }
        CHECK(std::abs(rates.total + 2.0 * im) < 1e-6 * rates.total);
        ++compared;
    }
    CHECK(compared > 150);
}

TEST_CASE("decay half-width is non-negative in the band")
{
    Rng rng(1009);
    for (int trial = 0; trial < 50; ++trial) {
        const auto b = random_band(rng, rng.coin());
        const auto a = random_atom(rng, b);
        const auto r = self_energy_integral(b, a, Complex(a.delta, 0.0));
        CHECK(r.decay_half >= -1e-10);
    }
}

TEST_CASE("random configs survive a round trip")
{
    using namespace fluxlattice::cli;
    Rng rng(1010);
    const char* experiments[] = {"decay", "emission", "scatter", "selfenergy", "band"};
    for (int trial = 0; trial < 40; ++trial) {
        const std::string experiment = experiments[trial % 5];
        const int m_total = 2 * rng.integer(20, 120);
        nlohmann::json doc{{"schema_version", 1},
                           {"experiment", experiment},
                           {"model", rng.coin() ? "effective" : "exact"},
                           {"lattice",
                            {{"J", 1.0},
                             {"lambda", rng.uniform(1.0, 10.0)},
                             {"delta_ab", rng.uniform(20.0, 100.0)},
                             {"phi", rng.uniform(0.0, 0.9 * pi)},
                             {"kappa", rng.coin() ? 0.0 : rng.uniform(0.0, 0.5)},
                             {"m_total", m_total}}},
                           {"atoms",
                            {{{"delta", rng.uniform(-0.5, 0.5)},
                              {"g", rng.uniform(0.01, 0.3)},
                              {"site_left", rng.integer(-5, 5)},
                              {"separation", rng.integer(2, 5)},
                              {"phi_extra", rng.uniform(0.0, 2 * pi)},
                              {"gamma", rng.uniform(0.0, 0.3)}}}},
                           {"run", nlohmann::json::object()}};
        if (experiment == "decay" || experiment == "emission")
            doc["run"] = {{"t_final", rng.uniform(1.0, 30.0)}, {"dt_sample", 0.1}};
        CAPTURE(doc.dump());
        const auto first = parse_config(doc);
        const auto explicit_form = to_json(first);
        const auto second = parse_config(explicit_form);
        CHECK(to_json(second) == explicit_form);
        CHECK(second.lattice.m_total == m_total);
        CHECK(second.atoms[0].phi_extra == first.atoms[0].phi_extra);
    }
}
