#include "fluxlattice/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "fluxlattice/error.hpp"

namespace fluxlattice {

namespace {

constexpr Complex kMinusI{0.0, -1.0};

using SparseH = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

void check_state(const HamiltonianMatrix& h, const SingleExcitationState& psi)
{
    if (psi.amplitudes.size() != h.dim())
        throw InvalidArgument("state dimension " + std::to_string(psi.amplitudes.size())
                              + " does not match Hamiltonian dimension "
                              + std::to_string(h.dim()));
}

bool use_spectral(const HamiltonianMatrix& h, const EvolveOptions& options)
{
    switch (options.propagator) {
    case Propagator::Spectral:
        if (!h.is_hermitian(options.hermitian_tol))
            throw InvalidArgument("spectral propagation requires a Hermitian Hamiltonian");
        return true;
    case Propagator::RungeKutta: return false;
    case Propagator::Automatic: return h.is_hermitian(options.hermitian_tol);
    }
    return false;
}

// exp(-i H t) through a one-off eigendecomposition.
class SpectralPropagator {
public:
    SpectralPropagator(const HamiltonianMatrix& h, const Eigen::VectorXcd& psi0)
    {
        // Hermitise to remove rounding-level asymmetry before the solver.
        const Eigen::MatrixXcd herm = 0.5 * (h.entries() + h.entries().adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm);
        if (solver.info() != Eigen::Success)
            throw NumericalError("eigendecomposition of the Hamiltonian failed");
        energies_ = solver.eigenvalues();
        vectors_ = solver.eigenvectors();
        coefficients_ = vectors_.adjoint() * psi0;
    }

    Eigen::VectorXcd at(double t) const
    {
        Eigen::VectorXcd phased(coefficients_.size());
        for (Eigen::Index i = 0; i < phased.size(); ++i)
            phased[i] = std::exp(kMinusI * (energies_[i] * t)) * coefficients_[i];
        return vectors_ * phased;
    }

private:
    Eigen::VectorXd energies_;
    Eigen::MatrixXcd vectors_;
    Eigen::VectorXcd coefficients_;
};

// Dormand-Prince 5(4) for the autonomous linear system dpsi/dt = -i H psi.
// The embedded error estimate is held below tolerance * h, i.e. a bound on
// the local error per unit time.
class RungeKuttaPropagator {
public:
    RungeKuttaPropagator(const HamiltonianMatrix& h, Eigen::VectorXcd psi0, double tolerance)
        : tolerance_(tolerance), state_(std::move(psi0))
    {
        if (!(tolerance_ > 0.0))
            throw InvalidArgument("integrator tolerance must be positive");
        matrix_ = h.entries().sparseView();
        matrix_.makeCompressed();
        double row_max = 0.0;
        for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r) {
            double s = 0.0;
            for (SparseH::InnerIterator it(matrix_, r); it; ++it)
                s += std::abs(it.value());
            row_max = std::max(row_max, s);
        }
        step_ = row_max > 0.0 ? 0.1 / row_max : 1.0;
        derivative(state_, k_[0]);
    }

    const Eigen::VectorXcd& state() const noexcept { return state_; }

    void advance_to(double target)
    {
        int rejects = 0;
        while (time_ < target) {
            const double remaining = target - time_;
            const bool last = step_ >= remaining;
            const double h = last ? remaining : step_;
            const double err = attempt(h);
            const double allowed = tolerance_ * h;

            double factor = err > 0.0 ? 0.9 * std::pow(allowed / err, 0.25) : 5.0;
            factor = std::clamp(factor, 0.2, 5.0);
            if (err <= allowed) {
                state_.swap(trial_);
                k_[0].swap(k_[6]); // first-same-as-last
                time_ = last ? target : time_ + h;
                rejects = 0;
                if (!last || factor < 1.0)
                    step_ = h * factor;
            } else {
                step_ = h * std::min(factor, 1.0);
                if (++rejects > 200 || step_ < 1e-14 * std::max(1.0, target))
                    throw NumericalError("Runge-Kutta step size underflow at t = "
                                         + std::to_string(time_));
            }
        }
    }

private:
    void derivative(const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) const
    {
        dy.noalias() = matrix_ * y;
        dy *= kMinusI;
    }

    double attempt(double h)
    {
        static constexpr double a21 = 1.0 / 5.0;
        static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                                a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
        static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                                a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                                a65 = -5103.0 / 18656.0;
        static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                                b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
        static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                                e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

        const Eigen::VectorXcd& y = state_;
        auto& k = k_;
        tmp_ = y + h * (a21 * k[0]);
        derivative(tmp_, k[1]);
        tmp_ = y + h * (a31 * k[0] + a32 * k[1]);
        derivative(tmp_, k[2]);
        tmp_ = y + h * (a41 * k[0] + a42 * k[1] + a43 * k[2]);
        derivative(tmp_, k[3]);
        tmp_ = y + h * (a51 * k[0] + a52 * k[1] + a53 * k[2] + a54 * k[3]);
        derivative(tmp_, k[4]);
        tmp_ = y + h * (a61 * k[0] + a62 * k[1] + a63 * k[2] + a64 * k[3] + a65 * k[4]);
        derivative(tmp_, k[5]);
        trial_ = y + h * (b1 * k[0] + b3 * k[2] + b4 * k[3] + b5 * k[4] + b6 * k[5]);
        derivative(trial_, k[6]);

        tmp_ = h * (e1 * k[0] + e3 * k[2] + e4 * k[3] + e5 * k[4] + e6 * k[5] + e7 * k[6]);
        return tmp_.cwiseAbs().maxCoeff();
    }

    SparseH matrix_;
    double tolerance_;
    double time_ = 0.0;
    double step_ = 1.0;
    Eigen::VectorXcd state_;
    Eigen::VectorXcd trial_;
    Eigen::VectorXcd tmp_;
    std::array<Eigen::VectorXcd, 7> k_;
};

std::vector<double> sample_grid(double t_final, double dt)
{
    std::vector<double> times;
    const auto n = static_cast<std::size_t>(std::floor(t_final / dt + 1e-9));
    times.reserve(n + 2);
    for (std::size_t i = 0; i <= n; ++i)
        times.push_back(static_cast<double>(i) * dt);
    if (t_final - times.back() > 1e-9 * std::max(1.0, t_final))
        times.push_back(t_final);
    else
        times.back() = std::min(times.back(), t_final);
    return times;
}

class Recorder {
public:
    Recorder(const HamiltonianMatrix& h, std::size_t samples) : h_(h)
    {
        const int nb = h.lattice().m_total;
        rec_.times.reserve(samples);
        rec_.p_atom.assign(static_cast<std::size_t>(h.atom_count()), {});
        for (auto& series : rec_.p_atom)
            series.reserve(samples);
        rec_.p_site = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples), nb);
        rec_.sites.resize(static_cast<std::size_t>(nb));
        for (int i = 0; i < nb; ++i)
            rec_.sites[static_cast<std::size_t>(i)] = h.lattice().m_min + i;
        rec_.p_apex.reserve(samples);
        rec_.total_norm.reserve(samples);
    }

    void record(double t, const Eigen::VectorXcd& psi)
    {
        const Eigen::Index row = static_cast<Eigen::Index>(rec_.times.size());
        rec_.times.push_back(t);
        const Eigen::VectorXd prob = psi.cwiseAbs2();
        for (int j = 0; j < h_.atom_count(); ++j)
            rec_.p_atom[static_cast<std::size_t>(j)].push_back(prob[j]);
        const Eigen::Index nb = h_.lattice().m_total;
        rec_.p_site.row(row) = prob.segment(h_.b_offset(), nb).transpose();
        const Eigen::Index na = prob.size() - h_.a_offset();
        rec_.p_apex.push_back(na > 0 ? prob.tail(na).sum() : 0.0);
        rec_.total_norm.push_back(prob.sum());
        rec_.final_state = {psi, t};
    }

    EvolutionRecord take() { return std::move(rec_); }

private:
    const HamiltonianMatrix& h_;
    EvolutionRecord rec_;
};

double sum_range(const Eigen::VectorXd& profile, const std::vector<int>& sites, int lo, int hi)
{
    double s = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (sites[i] >= lo && sites[i] <= hi)
            s += profile[static_cast<Eigen::Index>(i)];
    }
    return s;
}

} // namespace

std::size_t EvolutionRecord::sample_at(double t) const
{
    if (times.empty())
        throw InvalidArgument("empty evolution record");
    const double tol = 1e-9 * std::max(1.0, times.back());
    if (t < times.front() - tol || t > times.back() + tol)
        throw InvalidArgument("time " + std::to_string(t) + " outside the recorded window");
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end())
        return times.size() - 1;
    const auto i = static_cast<std::size_t>(it - times.begin());
    if (i > 0 && t - times[i - 1] < *it - t)
        return i - 1;
    return i;
}

Eigen::Index EvolutionRecord::column_of(int m) const
{
    const auto it = std::find(sites.begin(), sites.end(), m);
    if (it == sites.end())
        throw InvalidArgument("site " + std::to_string(m) + " not in record");
    return static_cast<Eigen::Index>(it - sites.begin());
}

Eigen::VectorXd EvolutionRecord::profile(double t) const
{
    return p_site.row(static_cast<Eigen::Index>(sample_at(t))).transpose();
}

SingleExcitationState atom_excited_state(const HamiltonianMatrix& h, int atom)
{
    SingleExcitationState psi{Eigen::VectorXcd::Zero(h.dim()), 0.0};
    psi.amplitudes[h.atom_index(atom)] = 1.0;
    return psi;
}

SingleExcitationState propagate(const HamiltonianMatrix& h, const SingleExcitationState& psi0,
                                double t, const EvolveOptions& options)
{
    check_state(h, psi0);
    if (t < 0.0)
        throw InvalidArgument("propagation time must be non-negative");
    if (t == 0.0)
        return psi0;
    if (use_spectral(h, options))
        return {SpectralPropagator(h, psi0.amplitudes).at(t), psi0.time + t};
    RungeKuttaPropagator rk(h, psi0.amplitudes, options.tolerance);
    rk.advance_to(t);
    return {rk.state(), psi0.time + t};
}

EvolutionRecord evolve(const HamiltonianMatrix& h, const SingleExcitationState& psi0,
                       double t_final, double dt_sample, const EvolveOptions& options)
{
    check_state(h, psi0);
    if (!(t_final > 0.0))
        throw InvalidArgument("t_final must be positive");
    if (!(dt_sample > 0.0))
        throw InvalidArgument("dt_sample must be positive");

    const std::vector<double> times = sample_grid(t_final, dt_sample);
    Recorder recorder(h, times.size());

    if (use_spectral(h, options)) {
        const SpectralPropagator prop(h, psi0.amplitudes);
        for (double t : times)
            recorder.record(t, t == 0.0 ? psi0.amplitudes : prop.at(t));
    } else {
        RungeKuttaPropagator rk(h, psi0.amplitudes, options.tolerance);
        for (double t : times) {
            rk.advance_to(t);
            recorder.record(t, rk.state());
        }
    }
    return recorder.take();
}

double chirality(const EvolutionRecord& record, double t, int site_left, int span)
{
    const Eigen::VectorXd p = record.profile(t);
    const int lo = record.sites.front();
    const int hi = record.sites.back();
    const double left = sum_range(p, record.sites, lo, site_left - 1);
    const double right = sum_range(p, record.sites, site_left + span + 1, hi);
    const double total = left + right;
    if (total < 1e-12)
        return 0.0;
    return (left - right) / total;
}

double confinement(const EvolutionRecord& record, double t, int lo, int hi)
{
    const Eigen::VectorXd p = record.profile(t);
    const double total = p.sum();
    if (total < 1e-15)
        return 1.0;
    return sum_range(p, record.sites, lo, hi) / total;
}

double window_mean(const EvolutionRecord& record, int atom, double t0, double t1)
{
    if (atom < 0 || atom >= static_cast<int>(record.p_atom.size()))
        throw InvalidArgument("atom index out of range");
    const auto& series = record.p_atom[static_cast<std::size_t>(atom)];
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < record.times.size(); ++i) {
        if (record.times[i] >= t0 - 1e-12 && record.times[i] <= t1 + 1e-12) {
            sum += series[i];
            ++count;
        }
    }
    if (count == 0)
        throw InvalidArgument("no samples inside the averaging window");
    return sum / static_cast<double>(count);
}

const char* to_string(DecayClass c) noexcept
{
    switch (c) {
    case DecayClass::Complete: return "complete";
    case DecayClass::Fractional: return "fractional";
    case DecayClass::Undetermined: return "undetermined";
    }
    return "?";
}

DecayClass classify_decay(double plateau_mean)
{
    if (plateau_mean > 0.02)
        return DecayClass::Fractional;
    if (plateau_mean < 0.01)
        return DecayClass::Complete;
    return DecayClass::Undetermined;
}

double fit_decay_rate(const EvolutionRecord& record, int atom, double t0, double t1)
{
    if (atom < 0 || atom >= static_cast<int>(record.p_atom.size()))
        throw InvalidArgument("atom index out of range");
    const auto& series = record.p_atom[static_cast<std::size_t>(atom)];
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < record.times.size(); ++i) {
        const double t = record.times[i];
        if (t < t0 - 1e-12 || t > t1 + 1e-12 || series[i] <= 0.0)
            continue;
        const double y = std::log(series[i]);
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        ++n;
    }
    if (n < 2)
        throw InvalidArgument("not enough positive samples in the fit window");
    const double dn = static_cast<double>(n);
    const double denom = dn * stt - st * st;
    if (denom <= 0.0)
        throw NumericalError("degenerate fit window");
    return -(dn * sty - st * sy) / denom;
}

std::optional<double> oscillation_period(const EvolutionRecord& record, int atom)
{
    if (atom < 0 || atom >= static_cast<int>(record.p_atom.size()))
        throw InvalidArgument("atom index out of range");
    const auto& series = record.p_atom[static_cast<std::size_t>(atom)];
    if (series.size() < 3)
        return std::nullopt;
    double mean = 0.0;
    for (double v : series)
        mean += v;
    mean /= static_cast<double>(series.size());

    std::vector<double> crossings;
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double a = series[i - 1] - mean;
        const double b = series[i] - mean;
        if (a < 0.0 && b >= 0.0) {
            const double s = a / (a - b);
            crossings.push_back(record.times[i - 1] + s * (record.times[i] - record.times[i - 1]));
        }
    }
    if (crossings.size() < 2)
        return std::nullopt;
    return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

EmissionFront emission_front(const EvolutionRecord& record, double t, int site_left, int span,
                             double fraction)
{
    const Eigen::VectorXd p = record.profile(t);
    EmissionFront front;
    if (p.size() == 0)
        return front;
    const double threshold = fraction * p.maxCoeff();
    if (!(threshold > 0.0))
        return front;
    for (std::size_t i = 0; i < record.sites.size(); ++i) {
        if (p[static_cast<Eigen::Index>(i)] <= threshold)
            continue;
        const int m = record.sites[i];
        if (m < site_left)
            front.left = std::max(front.left, site_left - m);
        else if (m > site_left + span)
            front.right = std::max(front.right, m - site_left - span);
    }
    return front;
}

double edge_weight(const EvolutionRecord& record, double t, int width)
{
    const Eigen::VectorXd p = record.profile(t);
    const Eigen::Index n = p.size();
    const Eigen::Index w = std::min<Eigen::Index>(width, n);
    if (w <= 0)
        return 0.0;
    return std::max(p.head(w).maxCoeff(), p.tail(w).maxCoeff());
}

} // namespace fluxlattice
