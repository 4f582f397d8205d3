#include <numbers>
#include <vector>

#include <benchmark/benchmark.h>

#include "fluxlattice/fluxlattice.hpp"

namespace {

using namespace fluxlattice;

constexpr double kPi = std::numbers::pi;

AtomSpec giant(double delta, int N, double g = 0.2)
{
    AtomSpec a;
    a.delta = delta;
    a.separation = N;
    a.g = g;
    return a;
}

void BM_SpectralEvolve(benchmark::State& state)
{
    const auto lattice = LatticeSpec::with_beta(1.0, 1.0, kPi / 2, static_cast<int>(state.range(0)));
    const std::vector<AtomSpec> atoms{giant(4.0, 2)};
    const HamiltonianMatrix h = build_effective(lattice, atoms);
    const auto psi = atom_excited_state(h);
    for (auto _ : state)
        benchmark::DoNotOptimize(evolve(h, psi, 20.0, 0.05));
}
BENCHMARK(BM_SpectralEvolve)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_RungeKuttaEvolve(benchmark::State& state)
{
    LatticeSpec lattice;
    lattice.lambda = 10.0;
    lattice.delta_ab = 100.0;
    lattice.phi = kPi / 2;
    lattice.kappa = 0.2;
    const std::vector<AtomSpec> atoms{giant(4.0, 2)};
    const HamiltonianMatrix h = build_exact(lattice, atoms);
    const auto psi = atom_excited_state(h);
    EvolveOptions opts;
    opts.propagator = Propagator::RungeKutta;
    for (auto _ : state)
        benchmark::DoNotOptimize(evolve(h, psi, 20.0, 0.05, opts));
}
BENCHMARK(BM_RungeKuttaEvolve)->Unit(benchmark::kMillisecond);

void BM_ScatteringSpectrum(benchmark::State& state)
{
    const BandParams band{1.0, 1.0, kPi / 2};
    AtomSpec atom = giant(4.0, 2);
    atom.gamma = 0.5;
    const double lo = band.band_min() + 1e-3;
    const double hi = band.band_max() - 1e-3;
    for (auto _ : state) {
        for (int i = 0; i < 200; ++i) {
            const double w = lo + (hi - lo) * i / 199.0;
            benchmark::DoNotOptimize(solve_scattering(band, atom, w, Incidence::LeftIncident));
        }
    }
}
BENCHMARK(BM_ScatteringSpectrum)->Unit(benchmark::kMillisecond);

void BM_SelfEnergyIntegral(benchmark::State& state)
{
    const BandParams band{1.0, 1.0, kPi / 2};
    const AtomSpec atom = giant(2.0, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(self_energy_integral(band, atom, Complex(2.0, 1e-6)));
}
BENCHMARK(BM_SelfEnergyIntegral)->Unit(benchmark::kMicrosecond);

void BM_SelfEnergyClosed(benchmark::State& state)
{
    const BandParams band{1.0, 1.0, kPi / 2};
    const AtomSpec atom = giant(2.0, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(self_energy_closed(band, atom, Complex(2.0, 1e-6)));
}
BENCHMARK(BM_SelfEnergyClosed);

} // namespace
BENCHMARK_MAIN();
