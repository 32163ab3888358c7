#pragma once

// Test-only oracles, written independently of the library code paths they
// check. Anything here recomputes results from first principles (straight
// loops, dense solvers, full sorts, finite differences).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Straight-line transcription of the leaky-integrator update:
// V(t+dt) = (1-alpha) V(t) + alpha f(gamma W_in s(t) + rho W V(t)).
inline std::vector<VectorXd> leaky_integrator_trajectory(
    const MatrixXd& w, const MatrixXd& w_in, const MatrixXd& inputs /*T x n_in*/, double alpha,
    double rho, double gamma, bool use_tanh, VectorXd v0) {
    const Index n = w.rows();
    const Index t_len = inputs.rows();
    std::vector<VectorXd> out;
    VectorXd v = v0;
    for (Index t = 0; t < t_len; ++t) {
        VectorXd pre = VectorXd::Zero(n);
        for (Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Index j = 0; j < w_in.cols(); ++j) acc += gamma * w_in(i, j) * inputs(t, j);
            for (Index j = 0; j < n; ++j) acc += rho * w(i, j) * v[j];
            pre[i] = use_tanh ? std::tanh(acc) : std::max(acc, 0.0);
        }
        for (Index i = 0; i < n; ++i) v[i] = (1.0 - alpha) * v[i] + alpha * pre[i];
        out.push_back(v);
    }
    return out;
}

inline double dense_spectral_radius(const MatrixXd& w) {
    Eigen::EigenSolver<MatrixXd> solver(w, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// Complex eigenvalues sorted by (real, imag) for set comparisons.
inline std::vector<std::complex<double>> sorted_eigenvalues(const MatrixXd& m) {
    Eigen::EigenSolver<MatrixXd> solver(m, false);
    std::vector<std::complex<double>> eig(solver.eigenvalues().data(),
                                          solver.eigenvalues().data() + m.rows());
    std::sort(eig.begin(), eig.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return eig;
}

// Full-sort percentile with linear interpolation between closest ranks.
inline double sort_percentile(std::vector<double> values, double n) {
    std::sort(values.begin(), values.end());
    const auto m = static_cast<Index>(values.size());
    const double rank = (n / 100.0) * static_cast<double>(m - 1);
    const auto lo = static_cast<Index>(rank);
    const auto hi = std::min(lo + 1, m - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// Elementwise soft-threshold (shrinkage) operator.
inline VectorXd soft_threshold(const VectorXd& v, const VectorXd& theta) {
    VectorXd x(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v[i]) - theta[i];
        double s = 0.0;
        if (v[i] > 0) s = 1.0;
        if (v[i] < 0) s = -1.0;
        x[i] = s * std::max(mag, 0.0);
    }
    return x;
}

// Central finite differences of a scalar function along each coordinate of
// a parameter vector accessed through get/set callbacks.
inline VectorXd central_differences(const std::function<double()>& f,
                                    const std::function<double(Index)>& get,
                                    const std::function<void(Index, double)>& set, Index size,
                                    double h = 1e-5) {
    VectorXd grad(size);
    for (Index i = 0; i < size; ++i) {
        const double orig = get(i);
        set(i, orig + h);
        const double fp = f();
        set(i, orig - h);
        const double fm = f();
        set(i, orig);
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Brute-force pair-enumeration specialization (Eqs. of the appendix):
// spec_ijk = |N_ij/M_j - N_ik/M_k|, Sp_i = mean over strictly positive pairs.
inline std::vector<double> specialization_pairs(
    const std::vector<std::vector<long>>& n_active,  // [node][class]
    const std::vector<long>& m_presented) {
    const std::size_t n = n_active.size();
    const std::size_t c = m_presented.size();
    std::vector<double> sp(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        long cnt = 0;
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t k = j + 1; k < c; ++k) {
                const double s = std::abs(double(n_active[i][j]) / double(m_presented[j]) -
                                          double(n_active[i][k]) / double(m_presented[k]));
                if (s > 0.0) {
                    sum += s;
                    ++cnt;
                }
            }
        sp[i] = cnt ? sum / double(cnt) : 0.0;
    }
    return sp;
}

}  // namespace oracles
