#include "fluxlattice/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "fluxlattice/error.hpp"

namespace fluxlattice {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

double form_factor(const AtomSpec& atom, double k)
{
    if (atom.small)
        return 1.0;
    return 2.0 + 2.0 * std::cos(k * atom.separation + atom.phi_extra);
}

struct KernelArgs {
    const BandParams* band;
    const AtomSpec* atom;
    Complex z;
};

double kernel_re(double k, void* p)
{
    const auto* a = static_cast<const KernelArgs*>(p);
    return (form_factor(*a->atom, k) / (a->z - dispersion(*a->band, k))).real();
}

double kernel_im(double k, void* p)
{
    const auto* a = static_cast<const KernelArgs*>(p);
    return (form_factor(*a->atom, k) / (a->z - dispersion(*a->band, k))).imag();
}

class Workspace {
public:
    explicit Workspace(std::size_t limit) : ws_(gsl_integration_workspace_alloc(limit)), limit_(limit)
    {
        if (!ws_)
            throw NumericalError("could not allocate quadrature workspace");
    }
    ~Workspace() { gsl_integration_workspace_free(ws_); }
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    gsl_integration_workspace* get() const noexcept { return ws_; }
    std::size_t limit() const noexcept { return limit_; }

private:
    gsl_integration_workspace* ws_;
    std::size_t limit_;
};

void disable_gsl_abort()
{
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

// QUADPACK QAG on [-pi, pi] split at the on-shell wave vectors, so every
// Lorentzian peak (width ~ Im z / |v_g|) sits on a segment endpoint.
Complex integrate(const BandParams& band, const AtomSpec& atom, Complex z,
                  const SelfEnergyOptions& options, double* error)
{
    disable_gsl_abort();

    std::vector<double> cuts{-kPi, kPi};
    if (!band.is_flat()) {
        for (const BandRoot& root : solve_k(band, z.real()).roots)
            cuts.push_back(root.k);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    KernelArgs args{&band, &atom, z};
    Workspace ws(options.workspace_limit);
    double parts[2] = {0.0, 0.0};
    double err_total = 0.0;
    double (*kernels[2])(double, void*) = {kernel_re, kernel_im};
    for (int i = 0; i < 2; ++i) {
        gsl_function f{kernels[i], &args};
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double value = 0.0, err = 0.0;
            const int status = gsl_integration_qag(&f, cuts[c], cuts[c + 1], options.absolute_tol,
                                                   options.relative_tol, ws.limit(),
                                                   GSL_INTEG_GAUSS61, ws.get(), &value, &err);
            // Round-off stalls near a vanishing integral are fine once the
            // estimate sits far below the absolute floor of interest.
            const bool stalled_ok = status == GSL_EROUND && err < 1e3 * options.absolute_tol;
            if (status != GSL_SUCCESS && !stalled_ok)
                throw NumericalError(std::string("self-energy quadrature failed: ")
                                     + gsl_strerror(status));
            parts[i] += value;
            err_total += err;
        }
    }
    const double scale = atom.g * atom.g / (2.0 * kPi);
    if (error)
        *error = err_total * scale;
    return scale * Complex(parts[0], parts[1]);
}

SelfEnergyResult make_result(Complex z, Complex value, SelfEnergyMethod method)
{
    SelfEnergyResult r;
    r.z = z;
    r.value = value;
    r.lamb_shift = value.real();
    r.decay_half = -value.imag();
    r.method = method;
    return r;
}

// Root of xi y^2 - w y + conj(xi) = 0 that lies inside the unit circle for
// z slightly above the real axis, together with the outer root.
struct Roots {
    Complex inner;
    Complex outer;
};

Roots select_roots(Complex xi, Complex w)
{
    const double xi_abs2 = std::norm(xi);
    auto roots_for = [&](Complex ww, Complex s) {
        return std::pair{(ww + s) / (2.0 * xi), (ww - s) / (2.0 * xi)};
    };

    Complex s = std::sqrt(w * w - 4.0 * xi_abs2);
    auto [yp, ym] = roots_for(w, s);
    const double gap = std::abs(std::abs(yp) - std::abs(ym));
    if (gap > 1e-9) {
        if (std::abs(yp) < std::abs(ym))
            return {yp, ym};
        return {ym, yp};
    }

    // On the real axis inside the band both roots sit on the unit circle:
    // pick the branch that continues into the disc for Im z -> 0+.
    const double eps = 1e-6 * (1.0 + std::abs(w));
    const Complex wp = w + Complex(0.0, eps);
    const Complex sp = std::sqrt(wp * wp - 4.0 * xi_abs2);
    if (std::abs(s - sp) > std::abs(-s - sp))
        s = -s;
    auto [pp, pm] = roots_for(wp, sp);
    std::tie(yp, ym) = roots_for(w, s);
    if (std::abs(pp) < std::abs(pm))
        return {yp, ym};
    return {ym, yp};
}

} // namespace

SelfEnergyResult self_energy_integral(const BandParams& band, const AtomSpec& atom, Complex z,
                                      const SelfEnergyOptions& options)
{
    if (z.imag() < 0.0)
        throw InvalidArgument("self-energy requires Im z >= 0");
    const bool on_axis = z.imag() == 0.0;
    if (on_axis && band.is_flat())
        throw FlatBandError("flat band: the pole lies on the integration contour");
    if (on_axis && !(options.eta > 0.0))
        throw InvalidArgument("eta must be positive");

    const Complex probe = on_axis ? z + Complex(0.0, options.eta) : z;
    double err = 0.0;
    SelfEnergyResult r = make_result(probe, integrate(band, atom, probe, options, &err),
                                     SelfEnergyMethod::NumericalIntegral);
    r.quadrature_error = err;
    if (on_axis && options.richardson_check) {
        const Complex half = integrate(band, atom, z + Complex(0.0, 0.5 * options.eta), options,
                                       nullptr);
        r.regularization_shift = std::abs(r.value - half);
    }
    return r;
}

Complex green_function(const BandParams& band, int n, Complex z)
{
    const Complex xi = band.J + band.beta * std::exp(kI * band.phi);
    if (std::abs(xi) < 1e-12)
        throw FlatBandError("flat band: Green function has no residue form");
    const Complex w = z - band.center();
    const Roots roots = select_roots(xi, w);
    const Complex denom = xi * (roots.inner - roots.outer);
    if (n >= 0)
        return -std::pow(roots.inner, n) / denom;
    // Negative separations use the mirrored band (xi -> conj xi), whose inner
    // root is inner * xi / conj(xi).
    return -std::pow(roots.inner * xi / std::conj(xi), -n) / denom;
}

SelfEnergyResult self_energy_closed(const BandParams& band, const AtomSpec& atom, Complex z)
{
    if (std::abs(band.beta - band.J) > 1e-12)
        throw InvalidArgument("closed-form self-energy requires beta == J");
    if (z.imag() < 0.0)
        throw InvalidArgument("self-energy requires Im z >= 0");
    if (band.is_flat())
        throw FlatBandError("closed form degenerates for phi an odd multiple of pi");

    const double g2 = atom.g * atom.g;
    Complex value = green_function(band, 0, z);
    if (atom.small) {
        value *= g2;
    } else {
        const Complex kick = std::exp(kI * atom.phi_extra);
        value = g2 * (2.0 * value + kick * green_function(band, atom.separation, z)
                      + std::conj(kick) * green_function(band, -atom.separation, z));
    }
    return make_result(z, value, SelfEnergyMethod::ClosedForm);
}

const BranchRate* DecayRates::find(Branch branch) const noexcept
{
    for (const BranchRate& b : branches) {
        if (b.branch == branch)
            return &b;
    }
    return nullptr;
}

DecayRates markovian_decay_rate(const BandParams& band, const AtomSpec& atom)
{
    const BandSolution sol = solve_k(band, atom.delta);
    DecayRates out;
    for (const BandRoot& root : sol.roots) {
        if (root.branch == Branch::Stationary)
            throw OutOfBandError("atomic frequency sits on a band edge");
        const double theta =
            atom.small ? 0.0 : wrap_angle(root.k * atom.separation + atom.phi_extra);
        const double rate = atom.g * atom.g * form_factor(atom, root.k) / std::abs(root.v_group);
        out.branches.push_back({root.k, root.v_group, root.branch, theta, rate});
        out.total += rate;
    }
    if (out.branches.empty())
        throw OutOfBandError("atomic frequency lies outside the band");
    return out;
}

} // namespace fluxlattice
