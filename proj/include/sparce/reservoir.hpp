#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <vector>

#include "sparce/rng.hpp"
#include "sparce/types.hpp"

namespace sparce {

enum class Activation { tanh, relu };

enum class InputDist { uniform, lognormal };

/// Fixed hyperparameters of a leaky-integrator reservoir:
/// V(t+dt) = (1-alpha) V(t) + alpha f(gamma W_in s(t) + rho W V(t)).
struct ReservoirParams {
    Index n_nodes = 100;
    double alpha = 1.0;  // leak rate, dt/tau, in (0,1]
    double rho = 0.9;    // spectral radius scale in (0,1]
    double gamma = 1.0;  // input gain
    double p_er = 0.1;   // Erdos-Renyi connection probability in (0,1]
    Activation activation = Activation::tanh;
    InputDist input_dist = InputDist::uniform;
    double lognormal_mu = 0.0;
    double lognormal_sigma = 1.0;
    std::uint64_t seed = 0;
};

/// A built reservoir. `w` is stored with its eigenvalues rescaled so that
/// max |eig(w)| = 1; the effective recurrent matrix at runtime is rho * w.
template <class Scalar>
struct Reservoir {
    ReservoirParams params;
    SparseMatrix<Scalar> w;  // N x N
    Matrix<Scalar> w_in;     // N x N_in
    Vector<Scalar> state;    // V, length N

    Index n_nodes() const { return w.rows(); }
    Index n_in() const { return w_in.cols(); }
    void reset() { state.setZero(); }
};

struct SpectralEstimate {
    double radius = 0.0;
    int iterations = 0;
    bool converged = false;
    bool used_dense = false;
};

namespace detail {

template <class Scalar>
double dense_spectral_radius(const SparseMatrix<Scalar>& w) {
    Matrix<double> dense = Matrix<Scalar>(w).template cast<double>();
    Eigen::EigenSolver<Matrix<double>> solver(dense, /*computeEigenvectors=*/false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Largest eigenvalue modulus of a (generally nonsymmetric) sparse matrix.
///
/// Runs a two-term Krylov power iteration: fitting W u ~ a u + b v over the
/// last two iterates captures both a dominant real eigenvalue and a dominant
/// complex-conjugate pair (roots of x^2 - a x - b). Dense eigendecomposition
/// is used directly for n <= 200 and as a fallback for n <= 2000 when the
/// iteration stalls.
template <class Scalar>
SpectralEstimate spectral_radius(const SparseMatrix<Scalar>& w, std::uint64_t seed,
                                 double tol = 1e-10, int max_iter = 20000) {
    const Index n = w.rows();
    require(n == w.cols(), "spectral_radius: matrix must be square");
    SpectralEstimate est;
    if (n <= 200) {
        est.radius = detail::dense_spectral_radius(w);
        est.converged = true;
        est.used_dense = true;
        return est;
    }

    auto engine = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<double> v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(engine);
    v.normalize();

    const SparseMatrix<double> wd = w.template cast<double>();
    Vector<double> u(n), t(n);
    double prev = -1.0;
    int stable = 0;
    for (int it = 1; it <= max_iter; ++it) {
        u.noalias() = wd * v;
        const double nu = u.norm();
        if (nu == 0.0) {  // v fell in the kernel; restart from fresh noise
            for (Index i = 0; i < n; ++i) v[i] = normal(engine);
            v.normalize();
            continue;
        }
        u /= nu;
        t.noalias() = wd * u;

        // least-squares fit t ~ a u + b v
        const double uu = 1.0, uv = u.dot(v), vv = 1.0;
        const double ut = u.dot(t), vt = v.dot(t);
        const double det = uu * vv - uv * uv;
        double radius;
        if (std::abs(det) < 1e-12) {
            radius = nu;  // iterates aligned: v is already an eigenvector
        } else {
            const double a = (ut * vv - vt * uv) / det;
            const double b = (vt * uu - ut * uv) / det;
            const double disc = a * a + 4.0 * b;
            radius = disc >= 0.0
                         ? std::max(std::abs((a + std::sqrt(disc)) / 2.0),
                                    std::abs((a - std::sqrt(disc)) / 2.0))
                         : std::sqrt(-b);
        }
        est.iterations = it;
        est.radius = radius;
        if (prev >= 0.0 && std::abs(radius - prev) <= tol * std::max(radius, 1e-300)) {
            if (++stable >= 3) {
                est.converged = true;
                return est;
            }
        } else {
            stable = 0;
        }
        prev = radius;
        v = u;
    }
    if (n <= 2000) {
        est.radius = detail::dense_spectral_radius(w);
        est.converged = true;
        est.used_dense = true;
        return est;
    }
    return est;
}

/// Samples W (Erdos-Renyi, standard-normal weights, rescaled to unit
/// spectral radius) and W_in per the configured input distribution.
/// State starts at zero.
template <class Scalar = double>
Reservoir<Scalar> build_reservoir(const ReservoirParams& params, Index n_in) {
    require(params.n_nodes >= 1, "build_reservoir: n_nodes must be >= 1");
    require(n_in >= 1, "build_reservoir: n_in must be >= 1");
    require(params.p_er > 0.0 && params.p_er <= 1.0, "build_reservoir: p_er must be in (0,1]");
    require(params.alpha > 0.0 && params.alpha <= 1.0, "build_reservoir: alpha must be in (0,1]");
    require(params.rho >= 0.0 && params.rho <= 1.0, "build_reservoir: rho must be in [0,1]");
    require(params.gamma >= 0.0, "build_reservoir: gamma must be >= 0");
    const double n_sq = static_cast<double>(params.n_nodes) * static_cast<double>(params.n_nodes);
    require(params.p_er * n_sq >= 1.0, "build_reservoir: p_er too small, less than one expected edge");

    const Index n = params.n_nodes;
    Reservoir<Scalar> res;
    res.params = params;

    auto w_engine = make_engine(derive_seed(params.seed, "reservoir.w"));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(params.p_er * n_sq * 1.2) + 16);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (coin(w_engine) < params.p_er)
                triplets.emplace_back(i, j, static_cast<Scalar>(normal(w_engine)));
    if (triplets.empty())
        throw NumericError("build_reservoir: sampled W is all-zero; p_er too small for this N");
    res.w.resize(n, n);
    res.w.setFromTriplets(triplets.begin(), triplets.end());
    res.w.makeCompressed();

    const SpectralEstimate est =
        spectral_radius(res.w, derive_seed(params.seed, "reservoir.power_iter"));
    if (!est.converged)
        throw NumericError("build_reservoir: eigenvalue estimation failed to converge; re-seed");
    if (!(est.radius > 0.0) || !std::isfinite(est.radius))
        throw NumericError("build_reservoir: sampled W has zero spectral radius; re-seed");
    res.w *= static_cast<Scalar>(1.0 / est.radius);

    auto in_engine = make_engine(derive_seed(params.seed, "reservoir.w_in"));
    res.w_in.resize(n, n_in);
    if (params.input_dist == InputDist::uniform) {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (Index j = 0; j < n_in; ++j)
            for (Index i = 0; i < n; ++i) res.w_in(i, j) = static_cast<Scalar>(unif(in_engine));
    } else {
        std::lognormal_distribution<double> logn(params.lognormal_mu, params.lognormal_sigma);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n_in; ++j) res.w_in(i, j) = static_cast<Scalar>(logn(in_engine));
        // bound per-neuron drive: rows sum to one
        for (Index i = 0; i < n; ++i) {
            const Scalar s = res.w_in.row(i).template lpNorm<1>();
            if (s > Scalar(0)) res.w_in.row(i) /= s;
        }
    }

    res.state = Vector<Scalar>::Zero(n);
    return res;
}

template <class Scalar>
void apply_activation(Activation act, Matrix<Scalar>& pre) {
    if (act == Activation::tanh)
        pre = pre.array().tanh().matrix();
    else
        pre = pre.cwiseMax(Scalar(0));
}

/// One Eq.-1 step on an externally owned state. `inputs` is N_in x B and
/// `states` is N x B; B = 1 recovers the single-trajectory case. The
/// reservoir itself is untouched, so clones of the state can advance in
/// parallel against shared W, W_in.
template <class Scalar, class Derived>
void advance(const Reservoir<Scalar>& res, const Eigen::MatrixBase<Derived>& inputs,
             Matrix<Scalar>& states) {
    require(inputs.rows() == res.n_in(), "advance: input dimension does not match W_in");
    require(states.rows() == res.n_nodes() && states.cols() == inputs.cols(),
            "advance: state dimensions do not match reservoir/batch");
    const auto& p = res.params;
    Matrix<Scalar> pre = Scalar(p.gamma) * (res.w_in * inputs.derived());
    pre.noalias() += Scalar(p.rho) * (res.w * states);
    apply_activation(p.activation, pre);
    states = Scalar(1.0 - p.alpha) * states + Scalar(p.alpha) * pre;
}

/// In-place step of the reservoir's own state vector.
template <class Scalar, class Derived>
void step(Reservoir<Scalar>& res, const Eigen::MatrixBase<Derived>& input) {
    require(input.size() == res.n_in(), "step: input dimension does not match W_in");
    Matrix<Scalar> st = res.state;
    advance(res, input, st);
    res.state = st.col(0);
}

/// Drives the reservoir through a T x N_in sequence, returning the T x N
/// trajectory of states V(1..T). With `reset`, the state is zeroed first.
template <class Scalar, class Derived>
Matrix<Scalar> run_sequence(Reservoir<Scalar>& res, const Eigen::MatrixBase<Derived>& seq,
                            bool reset = true) {
    require(seq.rows() >= 1, "run_sequence: empty sequence");
    require(seq.cols() == res.n_in(), "run_sequence: input dimension does not match W_in");
    if (reset) res.reset();
    const Index t_len = seq.rows();
    Matrix<Scalar> trajectory(t_len, res.n_nodes());
    Matrix<Scalar> st = res.state;
    for (Index t = 0; t < t_len; ++t) {
        advance(res, seq.row(t).transpose(), st);
        trajectory.row(t) = st.col(0).transpose();
    }
    res.state = st.col(0);
    return trajectory;
}

/// Two unidirectionally coupled reservoirs (fast first stage feeding a slow
/// second stage). The coupling matrix is stored as the second reservoir's
/// W_in with gamma = coupling gain, so both stages step through Eq. 1.
struct HierarchyParams {
    ReservoirParams first;
    ReservoirParams second;
    double coupling_gain = 1.0;  // gamma_21
};

template <class Scalar>
struct Hierarchy {
    Reservoir<Scalar> first;
    Reservoir<Scalar> second;

    const Matrix<Scalar>& coupling() const { return second.w_in; }
    double coupling_gain() const { return second.params.gamma; }
    void reset() {
        first.reset();
        second.reset();
    }
};

template <class Scalar = double>
Hierarchy<Scalar> build_hierarchy(const HierarchyParams& params, Index n_in) {
    require(params.coupling_gain >= 0.0, "build_hierarchy: coupling gain must be >= 0");
    Hierarchy<Scalar> h;
    h.first = build_reservoir<Scalar>(params.first, n_in);
    ReservoirParams second = params.second;
    second.gamma = params.coupling_gain;
    second.input_dist = InputDist::uniform;  // dense coupling, uniform [-1,1]
    if (second.seed == params.first.seed) second.seed = derive_seed(second.seed, "hierarchy.second");
    h.second = build_reservoir<Scalar>(second, params.first.n_nodes);
    return h;
}

/// Runs the hierarchy over a sequence; returns the second reservoir's
/// trajectory (T x N2). Coupling is strictly first -> second.
template <class Scalar, class Derived>
Matrix<Scalar> run_hierarchy(Hierarchy<Scalar>& h, const Eigen::MatrixBase<Derived>& seq,
                             bool reset = true) {
    require(seq.rows() >= 1, "run_hierarchy: empty sequence");
    require(seq.cols() == h.first.n_in(), "run_hierarchy: input dimension mismatch");
    require(h.second.n_in() == h.first.n_nodes(),
            "run_hierarchy: coupling dimensions do not match reservoirs");
    if (reset) h.reset();
    const Index t_len = seq.rows();
    Matrix<Scalar> trajectory(t_len, h.second.n_nodes());
    Matrix<Scalar> s1 = h.first.state;
    Matrix<Scalar> s2 = h.second.state;
    for (Index t = 0; t < t_len; ++t) {
        advance(h.first, seq.row(t).transpose(), s1);
        advance(h.second, s1, s2);
        trajectory.row(t) = s2.col(0).transpose();
    }
    h.first.state = s1.col(0);
    h.second.state = s2.col(0);
    return trajectory;
}

/// Timescale window for picking (alpha, rho): the linearised dynamic's real
/// eigenvalue extremes 1 - alpha(1 +/- rho) approximate exp(-dt/tau) at the
/// window edges.
struct TimescaleRange {
    double tau_min = 1.0;
    double tau_max = 1.0;
    double dt = 1.0;
};

struct LeakSpectralChoice {
    double alpha = 0.0;
    double rho = 0.0;
    double alpha_raw = 0.0;  // pre-clamp values
    double rho_raw = 0.0;
    bool clamped = false;
};

inline LeakSpectralChoice hyperparams_from_timescales(const TimescaleRange& tr) {
    require(tr.dt > 0.0 && tr.dt <= tr.tau_min && tr.tau_min <= tr.tau_max,
            "hyperparams_from_timescales: need 0 < dt <= tau_min <= tau_max");
    LeakSpectralChoice out;
    out.alpha_raw = tr.dt / (2.0 * tr.tau_min) + tr.dt / (2.0 * tr.tau_max);
    out.rho_raw = tr.dt / (2.0 * out.alpha_raw * tr.tau_min) -
                  tr.dt / (2.0 * out.alpha_raw * tr.tau_max);
    out.alpha = std::min(out.alpha_raw, 1.0);
    out.rho = std::min(out.rho_raw, 1.0);
    out.clamped = out.alpha_raw > 1.0 || out.rho_raw > 1.0;
    return out;
}

}  // namespace sparce
